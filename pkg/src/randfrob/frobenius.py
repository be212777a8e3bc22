"""Problem construction and the power-series coefficient recursion.

The equation solved is

    x''(t) + A(t) x'(t) + B(t) x(t) = C(t),   x(t0) = Y0,  x'(t0) = Y1,

where A, B, C are power series in (t - t0) whose coefficients are
polynomials in random symbols, and Y0, Y1 are such polynomials too.
Matching coefficients of the series expansion of the equation gives

    X_0 = Y0,  X_1 = Y1,
    X_{n+2} = [ C_n - sum_{m=0}^{n} ((m+1) A_{n-m} X_{m+1} + B_{n-m} X_m) ]
              / ((n+2)(n+1)),   n >= 0,

which `compute_coeffs` evaluates with exact rational arithmetic.  The
homogeneous equation is the C = 0 special case.  Missing series entries are
zero polynomials; sparse problem files simply omit them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence, Union

from .errors import DistributionError, MissingSymbolError, SpecError
from .poly import Poly, SymbolTable, parse_poly, to_fraction
from .randmodel import (
    DependenceBlock,
    NormValue,
    RandomModel,
    distribution_from_spec,
)

Radius = Union[Fraction, float]  # math.inf for entire series


@dataclass(frozen=True)
class GeneratorRule:
    """Recipe for an infinite coefficient family, expanded up to order M."""

    family: str
    order: int  # M: highest expanded index
    params: dict = field(default_factory=dict)


@dataclass
class SeriesProcess:
    """Power-series data process: sparse map n -> coefficient polynomial."""

    coeffs: dict[int, Poly]
    generator: GeneratorRule | None = None

    def coeff(self, n: int) -> Poly | None:
        return self.coeffs.get(n)

    def items(self):
        return sorted(self.coeffs.items())

    def max_index(self) -> int:
        return max(self.coeffs, default=-1)

    def is_zero(self) -> bool:
        return not self.coeffs


ZERO_SERIES = SeriesProcess(coeffs={})


@dataclass
class ProblemSpec:
    """A fully resolved problem: series data, initial conditions, model."""

    a: SeriesProcess
    b: SeriesProcess
    c: SeriesProcess | None
    y0: Poly
    y1: Poly
    t0: Fraction
    radius: Radius
    model: RandomModel
    default_order: int = 20
    name: str = ""

    @property
    def table(self) -> SymbolTable:
        return self.model.table

    @property
    def homogeneous(self) -> bool:
        return self.c is None or self.c.is_zero()


@dataclass
class SeriesSolution:
    """Computed series coefficients X_0 .. X_N of the solution process."""

    X: list[Poly]
    order: int
    spec: ProblemSpec

    def __post_init__(self):
        assert len(self.X) == self.order + 1


def compute_coeffs(spec: ProblemSpec, order: int) -> SeriesSolution:
    """Run the coefficient recursion up to X_order, exactly.

    The division by (n+2)(n+1) is exact rational arithmetic; no rounding
    occurs at any truncation order.
    """
    if order < 2:
        raise ValueError(f"truncation order must be >= 2, got {order}")
    a_items = spec.a.items()
    b_items = spec.b.items()
    X = [spec.y0, spec.y1]
    for n in range(order - 1):
        acc = Poly.zero()
        for k, ak in a_items:  # k = n - m, so m = n - k
            if k > n:
                break
            m = n - k
            acc = acc + (m + 1) * (ak * X[m + 1])
        for k, bk in b_items:
            if k > n:
                break
            acc = acc + bk * X[n - k]
        rhs = -acc
        if spec.c is not None:
            cn = spec.c.coeff(n)
            if cn is not None:
                rhs = rhs + cn
        X.append(Fraction(1, (n + 2) * (n + 1)) * rhs)
    return SeriesSolution(X=X, order=order, spec=spec)


def residual_coefficients(sol: SeriesSolution) -> list[Poly]:
    """Plug the computed coefficients back into the matched-coefficient identity.

    Returns, for 0 <= n <= N-2,

        R_n = (n+2)(n+1) X_{n+2}
              + sum_{m=0}^{n} ((m+1) A_{n-m} X_{m+1} + B_{n-m} X_m) - C_n,

    each of which must be the zero polynomial for a correct solution.
    """
    spec = sol.spec
    a_items = spec.a.items()
    b_items = spec.b.items()
    residuals = []
    for n in range(sol.order - 1):
        acc = ((n + 2) * (n + 1)) * sol.X[n + 2]
        for k, ak in a_items:
            if k > n:
                break
            m = n - k
            acc = acc + (m + 1) * (ak * sol.X[m + 1])
        for k, bk in b_items:
            if k > n:
                break
            acc = acc + bk * sol.X[n - k]
        if spec.c is not None:
            cn = spec.c.coeff(n)
            if cn is not None:
                acc = acc - cn
        residuals.append(acc)
    return residuals


# ---------------------------------------------------------------------------
# coefficient norms and hypothesis validation


def coefficient_sup_norms(proc: SeriesProcess, model: RandomModel) -> dict[int, NormValue]:
    """Triangle-inequality ess-sup bound for each explicit coefficient."""
    return {n: model.poly_linfty_bound(p) for n, p in proc.items()}


def coefficient_l2_norms(proc: SeriesProcess, model: RandomModel) -> dict[int, float]:
    return {n: model.poly_l2_norm(p) for n, p in proc.items()}


def _radius_estimate(proc: SeriesProcess, norms: Mapping[int, NormValue]) -> float:
    """Root-test radius estimate from the available coefficient norms.

    A series without a generator rule has finitely many nonzero terms, so
    the root test gives an infinite radius.  For generator-backed families
    the estimate is 1 / max_n ||.||^(1/n) over the expanded indices n >= 1,
    a conservative practical stand-in for 1/limsup.
    """
    if proc.generator is None:
        return math.inf
    rho = 0.0
    for n, v in norms.items():
        if n >= 1 and v > 0:
            rho = max(rho, float(v) ** (1.0 / n))
    return math.inf if rho == 0.0 else 1.0 / rho


@dataclass(frozen=True)
class CoefficientCheck:
    series: str
    index: int
    sup_bound: float  # math.inf when unbounded
    bounded: bool


@dataclass(frozen=True)
class L2Check:
    label: str
    norm: float
    finite: bool


@dataclass
class HypothesisReport:
    """Verdicts on the conditions for a mean-square analytic solution."""

    coefficient_checks: list[CoefficientCheck]
    l2_checks: list[L2Check]
    radius_estimate_a: float
    radius_estimate_b: float
    radius_estimate: float
    declared_radius: float
    status: str  # "pass" | "warn" | "fail"
    messages: list[str]

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "messages": list(self.messages),
            "radius_estimate_a": _json_real(self.radius_estimate_a),
            "radius_estimate_b": _json_real(self.radius_estimate_b),
            "radius_estimate": _json_real(self.radius_estimate),
            "declared_radius": _json_real(self.declared_radius),
            "coefficients": [
                {
                    "series": c.series,
                    "n": c.index,
                    "sup_bound": _json_real(c.sup_bound),
                    "bounded": c.bounded,
                }
                for c in self.coefficient_checks
            ],
            "l2": [
                {"label": c.label, "norm": c.norm, "finite": c.finite}
                for c in self.l2_checks
            ],
        }


def _json_real(x) -> float | str:
    x = float(x)
    return "inf" if math.isinf(x) else x


def validate_hypotheses(spec: ProblemSpec) -> HypothesisReport:
    """Check boundedness of A/B coefficients, L2 of C/Y0/Y1, and the radius.

    Returns verdicts, never raises: a failed check yields status "fail" with
    a message naming the violating coefficient.
    """
    model = spec.model
    checks: list[CoefficientCheck] = []
    messages: list[str] = []
    failed = False

    radius_est = {}
    for label, proc in (("A", spec.a), ("B", spec.b)):
        norms = coefficient_sup_norms(proc, model)
        for n in sorted(norms):
            bounded = norms[n] != math.inf
            checks.append(CoefficientCheck(label, n, float(norms[n]), bounded))
            if not bounded:
                failed = True
                messages.append(f"{label}_{n} not essentially bounded")
        radius_est[label] = _radius_estimate(proc, norms)

    l2_checks: list[L2Check] = []
    for label, p in (("Y0", spec.y0), ("Y1", spec.y1)):
        norm = model.poly_l2_norm(p)
        l2_checks.append(L2Check(label, norm, math.isfinite(norm)))
    if spec.c is not None:
        for n, norm in sorted(coefficient_l2_norms(spec.c, model).items()):
            l2_checks.append(L2Check(f"C_{n}", norm, math.isfinite(norm)))
    for check in l2_checks:
        if not check.finite:
            failed = True
            messages.append(f"{check.label} has no finite mean-square norm")

    estimate = min(radius_est["A"], radius_est["B"])
    declared = float(spec.radius)
    warned = False
    if declared > estimate * (1 + 1e-12):
        warned = True
        messages.append(
            f"declared radius {declared:g} exceeds root-test estimate {estimate:g}"
        )

    status = "fail" if failed else ("warn" if warned else "pass")
    return HypothesisReport(
        coefficient_checks=checks,
        l2_checks=l2_checks,
        radius_estimate_a=radius_est["A"],
        radius_estimate_b=radius_est["B"],
        radius_estimate=estimate,
        declared_radius=declared,
        status=status,
        messages=messages,
    )


# ---------------------------------------------------------------------------
# problem-document ingestion

_TOP_KEYS = {"name", "problem", "symbols", "blocks", "series", "generators", "initial"}
_SERIES_KEYS = {"A", "B", "C"}


def build_problem(doc: Mapping) -> ProblemSpec:
    """Validate a parsed problem document and resolve it to a ProblemSpec.

    The document layout is the JSON schema described in the README: problem
    constants, scalar symbol declarations, vector dependence blocks, sparse
    series term lists and/or generator rules, and initial-condition
    expressions.  Every error names the offending key.
    """
    if not isinstance(doc, Mapping):
        raise SpecError("problem document must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise SpecError(f"unknown top-level key(s): {sorted(unknown)}")

    prob = doc.get("problem", {})
    if not isinstance(prob, Mapping):
        raise SpecError("'problem' must be an object")
    unknown = set(prob) - {"t0", "radius", "order"}
    if unknown:
        raise SpecError(f"unknown key(s) in 'problem': {sorted(unknown)}")
    t0 = to_fraction(prob.get("t0", 0))
    radius = _read_radius(prob.get("radius", "inf"))
    default_order = _read_order(prob.get("order", 20))

    table = SymbolTable()
    blocks: list[DependenceBlock] = []

    def declare(name: str, context: str) -> int:
        if not isinstance(name, str):
            raise SpecError(f"{context}: symbol name must be a string, got {name!r}")
        if name in table:
            raise SpecError(f"symbol {name!r} owned by two blocks")
        return table.add(name)

    for entry in _entries(doc.get("symbols", []), "symbols"):
        name = _require(entry, "name", "symbols entry")
        sid = declare(name, "symbols")
        dist = _make_dist(entry, f"symbol {name!r}")
        if dist.arity != 1:
            raise SpecError(
                f"symbol {name!r}: vector distribution {dist.kind!r} needs a block declaration"
            )
        blocks.append(DependenceBlock((sid,), dist))

    for entry in _entries(doc.get("blocks", []), "blocks"):
        names = _require(entry, "names", "blocks entry")
        if not isinstance(names, (list, tuple)) or not names:
            raise SpecError("blocks entry: 'names' must be a non-empty list")
        sids = tuple(declare(n, "blocks") for n in names)
        dist = _make_dist(entry, f"block {list(names)!r}")
        try:
            blocks.append(DependenceBlock(sids, dist))
        except DistributionError as exc:
            raise SpecError(f"block {list(names)!r}: {exc}") from exc

    series_doc = doc.get("series", {})
    if not isinstance(series_doc, Mapping):
        raise SpecError("'series' must be an object")
    unknown = set(series_doc) - _SERIES_KEYS
    if unknown:
        raise SpecError(f"unknown series name(s): {sorted(unknown)} (expected A, B, C)")
    gens_doc = doc.get("generators", {})
    if not isinstance(gens_doc, Mapping):
        raise SpecError("'generators' must be an object")
    unknown = set(gens_doc) - _SERIES_KEYS
    if unknown:
        raise SpecError(f"unknown generator target(s): {sorted(unknown)}")

    processes: dict[str, SeriesProcess] = {}
    for label in ("A", "B", "C"):
        explicit = series_doc.get(label)
        gen = gens_doc.get(label)
        if explicit is not None and gen is not None:
            raise SpecError(f"series {label}: give either explicit terms or a generator, not both")
        if gen is not None:
            processes[label] = _expand_generator(label, gen, default_order, table, blocks)
        elif explicit is not None:
            processes[label] = _explicit_series(label, explicit, table)
        else:
            processes[label] = SeriesProcess(coeffs={})

    initial = doc.get("initial")
    if not isinstance(initial, Mapping) or set(initial) != {"Y0", "Y1"}:
        raise SpecError("'initial' must be an object with exactly the keys Y0 and Y1")
    y0 = _value_poly(initial["Y0"], table, "initial Y0")
    y1 = _value_poly(initial["Y1"], table, "initial Y1")

    try:
        model = RandomModel(table, blocks)
    except DistributionError as exc:
        raise SpecError(str(exc)) from exc

    c_proc = processes["C"]
    return ProblemSpec(
        a=processes["A"],
        b=processes["B"],
        c=None if c_proc.is_zero() else c_proc,
        y0=y0,
        y1=y1,
        t0=t0,
        radius=radius,
        model=model,
        default_order=default_order,
        name=str(doc.get("name", "")),
    )


def _read_radius(value) -> Radius:
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity"):
        return math.inf
    radius = to_fraction(value)
    if radius <= 0:
        raise SpecError(f"radius must be positive, got {radius}")
    return radius


def _read_order(value) -> int:
    order = to_fraction(value)
    if order.denominator != 1 or order < 2:
        raise SpecError(f"'order' must be an integer >= 2, got {value!r}")
    return int(order)


def _entries(value, what: str) -> list:
    if not isinstance(value, (list, tuple)):
        raise SpecError(f"'{what}' must be a list")
    for entry in value:
        if not isinstance(entry, Mapping):
            raise SpecError(f"'{what}' entries must be objects")
    return list(value)


def _require(entry: Mapping, key: str, context: str):
    if key not in entry:
        raise SpecError(f"{context}: missing key {key!r}")
    return entry[key]


def _make_dist(entry: Mapping, context: str):
    kind = _require(entry, "dist", context)
    params = entry.get("params", {})
    if not isinstance(params, Mapping):
        raise SpecError(f"{context}: 'params' must be an object")
    extra = set(entry) - {"name", "names", "dist", "params"}
    if extra:
        raise SpecError(f"{context}: unknown key(s) {sorted(extra)}")
    try:
        return distribution_from_spec(kind, dict(params))
    except DistributionError as exc:
        raise SpecError(f"{context}: {exc}") from exc


def _value_poly(value, table: SymbolTable, context: str) -> Poly:
    """A series/initial value: rational literal or polynomial expression text."""
    if isinstance(value, (int, Fraction)):
        return Poly.const(value)
    if isinstance(value, str):
        try:
            return parse_poly(value, table)
        except MissingSymbolError as exc:
            raise SpecError(f"{context}: {exc}") from exc
    raise SpecError(f"{context}: expected a rational or expression string, got {value!r}")


def _explicit_series(label: str, entries, table: SymbolTable) -> SeriesProcess:
    coeffs: dict[int, Poly] = {}
    for entry in _entries(entries, f"series {label}"):
        unknown = set(entry) - {"n", "value"}
        if unknown:
            raise SpecError(f"series {label}: unknown key(s) {sorted(unknown)}")
        n = to_fraction(_require(entry, "n", f"series {label} entry"))
        if n.denominator != 1 or n < 0:
            raise SpecError(f"series {label}: index must be a nonnegative integer, got {entry['n']!r}")
        n = int(n)
        if n in coeffs:
            raise SpecError(f"series {label}: duplicate entry for n={n}")
        p = _value_poly(_require(entry, "value", f"series {label} entry"), table, f"series {label} term n={n}")
        if p:
            coeffs[n] = p
    return SeriesProcess(coeffs=coeffs)


_GENERATOR_FAMILIES = ("iid", "inverse_square")


def _expand_generator(
    label: str,
    gen: Mapping,
    default_order: int,
    table: SymbolTable,
    blocks: list[DependenceBlock],
) -> SeriesProcess:
    """Expand a named coefficient family into explicit terms of order <= M.

    Families:
      iid            one fresh independent symbol per index n = 0..M,
                     named <prefix>_<n>, all with the given distribution;
      inverse_square deterministic 1/n^2 for n = 1..M (index 0 is zero).

    M defaults to twice the problem's default truncation order: input terms
    beyond the output order cannot influence the computed coefficients, so
    2N is a safe and cheap cover for any solve at order <= N.
    """
    if not isinstance(gen, Mapping):
        raise SpecError(f"generator for series {label} must be an object")
    family = _require(gen, "family", f"generator {label}")
    if family not in _GENERATOR_FAMILIES:
        raise SpecError(
            f"generator {label}: unknown family {family!r} (known: {list(_GENERATOR_FAMILIES)})"
        )
    m_value = gen.get("M")
    order = 2 * default_order if m_value is None else int(to_fraction(m_value))
    if order < 0:
        raise SpecError(f"generator {label}: M must be nonnegative")

    if family == "inverse_square":
        unknown = set(gen) - {"family", "M"}
        if unknown:
            raise SpecError(f"generator {label}: unknown key(s) {sorted(unknown)}")
        coeffs = {n: Poly.const(Fraction(1, n * n)) for n in range(1, order + 1)}
        return SeriesProcess(coeffs=coeffs, generator=GeneratorRule(family, order))

    unknown = set(gen) - {"family", "M", "dist", "params", "prefix"}
    if unknown:
        raise SpecError(f"generator {label}: unknown key(s) {sorted(unknown)}")
    dist = _make_dist({"dist": _require(gen, "dist", f"generator {label}"),
                       "params": gen.get("params", {})}, f"generator {label}")
    if dist.arity != 1:
        raise SpecError(f"generator {label}: iid family needs a scalar distribution")
    prefix = gen.get("prefix", label)
    coeffs = {}
    for n in range(order + 1):
        name = f"{prefix}_{n}"
        if name in table:
            raise SpecError(
                f"generator {label}: generated symbol {name!r} clashes with an existing declaration"
            )
        sid = table.add(name)
        blocks.append(DependenceBlock((sid,), dist))
        coeffs[n] = Poly.symbol(sid)
    return SeriesProcess(
        coeffs=coeffs,
        generator=GeneratorRule(family, order, {"prefix": prefix, "dist": dist.kind}),
    )
