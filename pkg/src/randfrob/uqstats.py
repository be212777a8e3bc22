"""Exact mean/variance curves, the dominating majorant sequence, and bounds.

The mean and variance of the truncated solution X^N(t) = sum X_n (t-t0)^n
are exact linear algebra over the first and second moments of the
coefficients:

    E[X^N(t)]  = sum_n E[X_n] tau^n
    E[(X^N)^2] = sum_{n,m} E[X_n X_m] tau^{n+m},      tau = t - t0.

`moment_matrix` computes those moments once per solve (they are exact
rationals); `stat_curves` then evaluates any time grid in exact rational
arithmetic, converting to float only on output.

`majorant_sequence` builds the deterministic sequence H_n that dominates
the mean-square norms ||X_n||: with D_s a sup/mean-square bound constant
for the input coefficients at scale s, it satisfies

    H_0 = ||Y0||,  H_1 = ||Y1||,  H_2 = (D_s/2) (H_1 + H_0 + 1),
    H_{n+2} = (n/((n+2) s) + D_s/(n+2)) H_{n+1}
              + D_s/((n+2)(n+1)) H_n,            n >= 1,

and sum_{n>N} H_n |tau|^n estimates the truncation error of the order-N
partial sum.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

from .errors import UnboundedCoefficientError
from .frobenius import (
    ProblemSpec,
    SeriesSolution,
    coefficient_l2_norms,
    coefficient_sup_norms,
)
from .poly import mono_mul, to_fraction
from .randmodel import RandomModel

VARIANCE_CLAMP = 1e-12

# Above this many monomial pairs, E[X_n X_m] is accumulated pair-by-pair
# instead of materializing the product polynomial (memory control at N=20).
PAIR_THRESHOLD = 100_000


@dataclass
class MomentMatrix:
    """First and second moments of the series coefficients, exact rationals."""

    means: list[Fraction]
    second: list[list[Fraction]]  # symmetric (N+1) x (N+1)
    order: int


@dataclass
class StatCurve:
    """Mean/variance values on a time grid; MC curves add CI half-widths."""

    grid: list[float]
    mean: list[float]
    variance: list[float]
    ci_halfwidth: list[float] | None = None
    label: str = ""

    def __post_init__(self):
        n = len(self.grid)
        if len(self.mean) != n or len(self.variance) != n:
            raise ValueError("grid, mean and variance must have equal lengths")
        if self.ci_halfwidth is not None and len(self.ci_halfwidth) != n:
            raise ValueError("ci_halfwidth length must match the grid")
        clamped = []
        for v in self.variance:
            if v < 0:
                if v < -VARIANCE_CLAMP:
                    warnings.warn(
                        f"variance {v:.3e} clamped to 0 (below -{VARIANCE_CLAMP:g})",
                        stacklevel=2,
                    )
                v = 0.0
            clamped.append(v)
        self.variance = clamped


@dataclass
class MajorantSeq:
    """Dominating sequence for the coefficient mean-square norms."""

    s: float
    d_s: float
    h: list[float]
    input_max_index: int  # highest input-series index the bound constant saw


def _pairwise_expect(model: RandomModel, p, q) -> Fraction:
    total = Fraction(0)
    for m1, c1 in p.terms.items():
        for m2, c2 in q.terms.items():
            total += c1 * c2 * model.expect_monomial(mono_mul(m1, m2))
    return total


def moment_matrix(
    sol: SeriesSolution,
    model: RandomModel,
    pair_threshold: int = PAIR_THRESHOLD,
) -> MomentMatrix:
    """Exact E[X_n] and E[X_n X_m] for all coefficient pairs."""
    coeffs = sol.X
    n_tot = sol.order + 1
    means = [model.expect_poly(x) for x in coeffs]
    second = [[Fraction(0)] * n_tot for _ in range(n_tot)]
    for n in range(n_tot):
        for m in range(n, n_tot):
            pairs = len(coeffs[n].terms) * len(coeffs[m].terms)
            if pairs <= pair_threshold:
                val = model.expect_poly(coeffs[n] * coeffs[m])
            else:
                val = _pairwise_expect(model, coeffs[n], coeffs[m])
            second[n][m] = val
            second[m][n] = val
    return MomentMatrix(means=means, second=second, order=sol.order)


def stat_curves(
    mm: MomentMatrix,
    grid,
    t0,
    radius: float = math.inf,
    label: str = "series",
) -> StatCurve:
    """Evaluate mean and variance of the truncated solution on a grid.

    Evaluation is exact rational arithmetic in tau = t - t0 (grid values are
    taken at their exact binary/decimal value), emitted as doubles.
    """
    t0 = to_fraction(t0)
    # Collapse the double sum over (n, m) by total power n + m.
    diag = [Fraction(0)] * (2 * mm.order + 1)
    for n in range(mm.order + 1):
        row = mm.second[n]
        for m in range(mm.order + 1):
            diag[n + m] += row[m]

    ts, means, variances = [], [], []
    for t in grid:
        tau = to_fraction(t) - t0
        if abs(tau) >= radius:
            warnings.warn(
                f"grid point t={float(t):g} lies outside the declared radius",
                stacklevel=2,
            )
        mean = _horner(mm.means, tau)
        second = _horner(diag, tau)
        var = second - mean * mean
        ts.append(float(t))
        means.append(float(mean))
        variances.append(float(var))
    return StatCurve(grid=ts, mean=means, variance=variances, label=label)


def _horner(coeffs, tau: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * tau + c
    return acc


def exact_stats(mm: MomentMatrix, t, t0) -> tuple[Fraction, Fraction]:
    """Mean and variance at a single time, as exact rationals."""
    tau = to_fraction(t) - to_fraction(t0)
    powers = [tau**k for k in range(2 * mm.order + 1)]
    mean = sum((c * powers[n] for n, c in enumerate(mm.means)), Fraction(0))
    second = Fraction(0)
    for n in range(mm.order + 1):
        for m in range(mm.order + 1):
            second += mm.second[n][m] * powers[n + m]
    return mean, second - mean * mean


def majorant_sequence(spec: ProblemSpec, s, order: int) -> MajorantSeq:
    """Build H_0..H_order dominating the coefficient mean-square norms.

    The bound constant D_s is the max of ||A_n||_sup s^n, ||B_n||_sup s^n and
    ||C_n||_ms s^n over the explicitly available input terms, so the
    domination is exact for the (truncated-input) problem actually solved;
    `input_max_index` records how far the inputs reached.
    """
    s_f = float(s)
    if not 0 < s_f < float(spec.radius):
        raise ValueError(
            f"scale s must lie in (0, radius): got s={s_f:g}, radius={float(spec.radius):g}"
        )
    if order < 2:
        raise ValueError("majorant order must be >= 2")

    model = spec.model
    d_s = 0.0
    max_index = -1
    for label, proc in (("A", spec.a), ("B", spec.b)):
        for n, norm in coefficient_sup_norms(proc, model).items():
            if norm == math.inf:
                raise UnboundedCoefficientError(
                    f"{label}_{n} not essentially bounded; no majorant exists"
                )
            d_s = max(d_s, float(norm) * s_f**n)
            max_index = max(max_index, n)
    if spec.c is not None:
        for n, norm in coefficient_l2_norms(spec.c, model).items():
            d_s = max(d_s, norm * s_f**n)
            max_index = max(max_index, n)

    h = [model.poly_l2_norm(spec.y0), model.poly_l2_norm(spec.y1)]
    h.append((d_s / 2) * (h[1] + h[0] + 1))
    for n in range(1, order - 1):
        nxt = (n / ((n + 2) * s_f) + d_s / (n + 2)) * h[n + 1] + (
            d_s / ((n + 2) * (n + 1))
        ) * h[n]
        h.append(nxt)
    return MajorantSeq(s=s_f, d_s=d_s, h=h, input_max_index=max_index)


TAIL_RATIO_THRESHOLD = 0.999


def tail_bound(maj: MajorantSeq, t, t0, trunc_order: int) -> float:
    """Estimate sum_{n > trunc_order} H_n |t-t0|^n.

    Sums the available majorant terms and extrapolates the rest
    geometrically from the last empirical ratio rho = H_K s^K / H_{K-1}
    s^{K-1}, rescaled to the evaluation point: the extrapolated terms form a
    geometric series with ratio q = rho |t-t0| / s.  The consecutive ratios
    decrease toward 1 from above for this recurrence, so the extrapolation
    is an upper estimate once q < 1 -- an estimate, not a certificate.
    When q has not dropped below 0.999 (the ratios have not yet stabilized
    below 1 at this evaluation point; compute more majorant terms or reduce
    s) the bound is reported as not convergent and the result is math.inf.
    """
    tau = abs(float(t) - float(t0))
    if tau >= maj.s:
        raise ValueError(
            f"t must satisfy |t - t0| < s: |{float(t):g} - {float(t0):g}| >= {maj.s:g}"
        )
    k_max = len(maj.h) - 1
    if trunc_order >= k_max:
        raise ValueError(
            f"majorant computed only to order {k_max}; need more terms beyond N={trunc_order}"
        )
    total = sum(maj.h[n] * tau**n for n in range(trunc_order + 1, k_max + 1))

    last, prev = maj.h[k_max], maj.h[k_max - 1]
    if last == 0.0 or tau == 0.0:
        return total
    if prev == 0.0 or (q := (maj.s * last / prev) * tau / maj.s) >= TAIL_RATIO_THRESHOLD:
        warnings.warn(
            f"majorant tail not convergent at s={maj.s:g} for t={float(t):g};"
            " compute more terms or reduce s",
            stacklevel=2,
        )
        return math.inf
    return total + maj.h[k_max] * tau**k_max * q / (1.0 - q)


def lipschitz_k(spec: ProblemSpec, t) -> float:
    """Upper bound on the Lipschitz function of the first-order system map.

    Writing the equation as a 2-dimensional first-order system, the system
    matrix norm is max{1, ||A(t)||_sup + ||B(t)||_sup}; the series norms are
    bounded here by the triangle inequality over the truncated inputs, so
    the returned value is an upper-bound surrogate, not the exact essential
    supremum.
    """
    tau = abs(float(t) - float(spec.t0))
    if tau >= float(spec.radius):
        raise ValueError(f"t={float(t):g} lies outside the declared radius")
    total = 0.0
    for label, proc in (("A", spec.a), ("B", spec.b)):
        for n, norm in coefficient_sup_norms(proc, spec.model).items():
            if norm == math.inf:
                raise UnboundedCoefficientError(f"{label}_{n} not essentially bounded")
            total += float(norm) * tau**n
    return max(1.0, total)
