"""Distributions, dependence blocks, and the exact moment oracle.

All probabilistic structure lives here.  A `RandomModel` partitions the
symbols of a `SymbolTable` into mutually independent dependence blocks;
within a block the joint distribution may couple its symbols (the
multinomial vector being the canonical example).  Raw and joint moments
are computed in closed form or by exhaustive enumeration of finite
supports, always as exact `Fraction` values: distribution parameters are
coerced to rationals on construction, so the expectation of any polynomial
in the symbols is an exact rational.

Sampling draws from a caller-supplied `numpy.random.Generator`, one block
at a time in declaration order, so a fixed seed reproduces the exact draw
sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence, Union

from .errors import DistributionError, MissingSymbolError
from .poly import Mono, Poly, SymbolTable, to_fraction

Rational = Fraction
NormValue = Union[Fraction, float]  # math.inf marks an unbounded support


class Distribution:
    """Base class; concrete kinds implement moments, norms and sampling."""

    kind = "abstract"
    arity = 1

    def raw_moment(self, k: int) -> Fraction:
        """Exact E[Z^k] for scalar kinds; vector kinds reject the query."""
        raise DistributionError(f"raw_moment unsupported for kind {self.kind!r}")

    def linfty(self) -> NormValue:
        """Essential supremum of |Z| (math.inf when the support is unbounded)."""
        raise NotImplementedError

    def sample(self, stream) -> float:
        raise NotImplementedError


def _check_probability(p: Fraction, what: str) -> Fraction:
    if p < 0 or p > 1:
        raise DistributionError(f"{what} must lie in [0, 1], got {p}")
    return p


def _check_positive(v: Fraction, what: str) -> Fraction:
    if v <= 0:
        raise DistributionError(f"{what} must be positive, got {v}")
    return v


def _normalize_probs(probs: Sequence, what: str) -> tuple[Fraction, ...]:
    ps = tuple(_check_probability(to_fraction(p), what) for p in probs)
    if not ps:
        raise DistributionError(f"{what}: need at least one probability")
    total = sum(ps)
    if abs(total - 1) > Fraction(1, 10**9):
        raise DistributionError(f"{what} must sum to 1, got {float(total):g}")
    if total != 1:
        ps = tuple(p / total for p in ps)  # exact renormalization of float dust
    return ps


@dataclass(frozen=True)
class PointMass(Distribution):
    value: Fraction

    kind = "pointmass"

    def __post_init__(self):
        object.__setattr__(self, "value", to_fraction(self.value))

    def raw_moment(self, k: int) -> Fraction:
        return Fraction(1) if k == 0 else self.value**k

    def linfty(self) -> Fraction:
        return abs(self.value)

    def sample(self, stream) -> float:
        return float(self.value)


@dataclass(frozen=True)
class Bernoulli(Distribution):
    p: Fraction

    kind = "bernoulli"

    def __post_init__(self):
        object.__setattr__(self, "p", _check_probability(to_fraction(self.p), "p"))
        object.__setattr__(self, "_p_float", float(self.p))

    def raw_moment(self, k: int) -> Fraction:
        # 0/1 support: Z^k = Z for k >= 1.
        return Fraction(1) if k == 0 else self.p

    def linfty(self) -> Fraction:
        return Fraction(1) if self.p > 0 else Fraction(0)

    def sample(self, stream) -> float:
        return 1.0 if stream.random() < self._p_float else 0.0


@dataclass(frozen=True)
class Binomial(Distribution):
    n: int
    p: Fraction

    kind = "binomial"

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 0:
            raise DistributionError(f"trial count must be a nonnegative int, got {self.n!r}")
        object.__setattr__(self, "p", _check_probability(to_fraction(self.p), "p"))

    def raw_moment(self, k: int) -> Fraction:
        if k == 0:
            return Fraction(1)
        q = 1 - self.p
        total = Fraction(0)
        for i in range(self.n + 1):
            total += math.comb(self.n, i) * self.p**i * q ** (self.n - i) * i**k
        return total

    def linfty(self) -> Fraction:
        return Fraction(self.n) if self.p > 0 else Fraction(0)

    def sample(self, stream) -> float:
        return float(stream.binomial(self.n, float(self.p)))


@dataclass(frozen=True)
class Beta(Distribution):
    alpha: Fraction
    beta: Fraction

    kind = "beta"

    def __post_init__(self):
        object.__setattr__(self, "alpha", _check_positive(to_fraction(self.alpha), "alpha"))
        object.__setattr__(self, "beta", _check_positive(to_fraction(self.beta), "beta"))

    def raw_moment(self, k: int) -> Fraction:
        # E[Z^k] = prod_{j<k} (alpha+j)/(alpha+beta+j)
        total = Fraction(1)
        for j in range(k):
            total *= (self.alpha + j) / (self.alpha + self.beta + j)
        return total

    def linfty(self) -> Fraction:
        return Fraction(1)

    def sample(self, stream) -> float:
        return float(stream.beta(float(self.alpha), float(self.beta)))


@dataclass(frozen=True)
class Gamma(Distribution):
    shape: Fraction
    rate: Fraction  # shape-rate parametrization: mean = shape / rate

    kind = "gamma"

    def __post_init__(self):
        object.__setattr__(self, "shape", _check_positive(to_fraction(self.shape), "shape"))
        object.__setattr__(self, "rate", _check_positive(to_fraction(self.rate), "rate"))

    def raw_moment(self, k: int) -> Fraction:
        # E[Z^k] = prod_{j<k} (shape+j)/rate
        total = Fraction(1)
        for j in range(k):
            total *= (self.shape + j) / self.rate
        return total

    def linfty(self) -> float:
        return math.inf

    def sample(self, stream) -> float:
        return float(stream.gamma(float(self.shape), 1.0 / float(self.rate)))


@dataclass(frozen=True)
class Uniform(Distribution):
    a: Fraction
    b: Fraction

    kind = "uniform"

    def __post_init__(self):
        object.__setattr__(self, "a", to_fraction(self.a))
        object.__setattr__(self, "b", to_fraction(self.b))
        if not self.a < self.b:
            raise DistributionError(f"uniform needs a < b, got [{self.a}, {self.b}]")

    def raw_moment(self, k: int) -> Fraction:
        return (self.b ** (k + 1) - self.a ** (k + 1)) / ((k + 1) * (self.b - self.a))

    def linfty(self) -> Fraction:
        return max(abs(self.a), abs(self.b))

    def sample(self, stream) -> float:
        return float(stream.uniform(float(self.a), float(self.b)))


@dataclass(frozen=True)
class FiniteDiscrete(Distribution):
    support: tuple[Fraction, ...]
    probs: tuple[Fraction, ...]

    kind = "finite_discrete"

    def __post_init__(self):
        support = tuple(to_fraction(x) for x in self.support)
        probs = _normalize_probs(self.probs, "finite_discrete probabilities")
        if len(support) != len(probs):
            raise DistributionError("support and probabilities differ in length")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)

    def raw_moment(self, k: int) -> Fraction:
        return sum((p * x**k for x, p in zip(self.support, self.probs)), Fraction(0))

    def linfty(self) -> Fraction:
        points = [abs(x) for x, p in zip(self.support, self.probs) if p > 0]
        return max(points, default=Fraction(0))

    def sample(self, stream) -> float:
        u = stream.random()
        acc = Fraction(0)
        for x, p in zip(self.support, self.probs):
            acc += p
            if u < acc:
                return float(x)
        return float(self.support[-1])


@dataclass(frozen=True)
class MultinomialVector(Distribution):
    trials: int
    probs: tuple[Fraction, ...]

    kind = "multinomial"

    def __post_init__(self):
        if not isinstance(self.trials, int) or self.trials < 0:
            raise DistributionError(f"trial count must be a nonnegative int, got {self.trials!r}")
        probs = _normalize_probs(self.probs, "multinomial probabilities")
        object.__setattr__(self, "probs", probs)
        # conditional success probabilities of the sequential decomposition
        cond = []
        mass = Fraction(1)
        for p in probs[:-1]:
            cond.append(min(1.0, float(p / mass)) if mass > 0 else 0.0)
            mass -= p
        object.__setattr__(self, "_cond_floats", tuple(cond))

    @property
    def arity(self) -> int:
        return len(self.probs)

    def support(self) -> Iterator[tuple[tuple[int, ...], Fraction]]:
        """All count vectors summing to `trials`, with exact pmf weights."""
        for counts in _compositions(self.trials, self.arity):
            pmf = Fraction(math.factorial(self.trials))
            for c, p in zip(counts, self.probs):
                pmf = pmf / math.factorial(c) * p**c
            yield counts, pmf

    def joint_moment(self, exponents: Sequence[int]) -> Fraction:
        if len(exponents) != self.arity:
            raise DistributionError(
                f"expected {self.arity} exponents for multinomial block, got {len(exponents)}"
            )
        total = Fraction(0)
        for counts, pmf in self.support():
            value = Fraction(1)
            for c, e in zip(counts, exponents):
                if e:
                    value *= c**e
            total += pmf * value
        return total

    def linfty(self) -> Fraction:
        return Fraction(self.trials)

    def component_linfty(self, index: int) -> Fraction:
        return Fraction(self.trials) if self.probs[index] > 0 else Fraction(0)

    def sample(self, stream) -> tuple[float, ...]:
        # Sequential binomial decomposition: condition each category count on
        # the trials not yet assigned to earlier categories.
        remaining = self.trials
        counts = []
        for cond in self._cond_floats:
            c = int(stream.binomial(remaining, cond))
            counts.append(float(c))
            remaining -= c
        counts.append(float(remaining))
        return tuple(counts)


def _compositions(n: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (n,)
        return
    for head in range(n + 1):
        for tail in _compositions(n - head, parts - 1):
            yield (head,) + tail


_DIST_PARAMS = {
    "pointmass": ("value",),
    "bernoulli": ("p",),
    "binomial": ("n", "p"),
    "beta": ("alpha", "beta"),
    "gamma": ("shape", "rate"),
    "uniform": ("a", "b"),
    "finite_discrete": ("support", "probs"),
    "multinomial": ("trials", "probs"),
}


def distribution_from_spec(kind: str, params: dict) -> Distribution:
    """Build a distribution from its problem-file form (kind name + params)."""
    key = str(kind).lower()
    if key not in _DIST_PARAMS:
        known = ", ".join(sorted(_DIST_PARAMS))
        raise DistributionError(f"unknown distribution kind {kind!r} (known: {known})")
    wanted = _DIST_PARAMS[key]
    missing = [p for p in wanted if p not in params]
    extra = [p for p in params if p not in wanted]
    if missing:
        raise DistributionError(f"{key}: missing parameter(s) {missing}")
    if extra:
        raise DistributionError(f"{key}: unknown parameter(s) {extra}")
    args = {p: params[p] for p in wanted}
    if key == "binomial":
        args["n"] = _as_int(args["n"], "binomial n")
    if key == "multinomial":
        args["trials"] = _as_int(args["trials"], "multinomial trials")
    cls = {
        "pointmass": PointMass,
        "bernoulli": Bernoulli,
        "binomial": Binomial,
        "beta": Beta,
        "gamma": Gamma,
        "uniform": Uniform,
        "finite_discrete": FiniteDiscrete,
        "multinomial": MultinomialVector,
    }[key]
    if key in ("finite_discrete", "multinomial"):
        args = {k: tuple(v) if isinstance(v, (list, tuple)) else v for k, v in args.items()}
    return cls(**args)


def _as_int(value, what: str) -> int:
    frac = to_fraction(value)
    if frac.denominator != 1:
        raise DistributionError(f"{what} must be an integer, got {value!r}")
    return int(frac)


@dataclass(frozen=True)
class DependenceBlock:
    """An ordered group of symbols with a declared joint distribution."""

    symbols: tuple[int, ...]
    dist: Distribution

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        if len(self.symbols) != self.dist.arity:
            raise DistributionError(
                f"block of {len(self.symbols)} symbol(s) does not match "
                f"{self.dist.kind} arity {self.dist.arity}"
            )


def raw_moment(dist: Distribution, k: int) -> Fraction:
    """Exact E[Z^k]; k = 0 gives 1 for every kind."""
    if k < 0:
        raise DistributionError("moment order must be nonnegative")
    return dist.raw_moment(k)


def joint_moment(block: DependenceBlock, exponents: Sequence[int]) -> Fraction:
    """Exact E[prod Z_i^{e_i}] over one block, by closed form or enumeration."""
    exps = tuple(exponents)
    if len(exps) != len(block.symbols):
        raise DistributionError(
            f"expected {len(block.symbols)} exponents, got {len(exps)}"
        )
    if isinstance(block.dist, MultinomialVector):
        return block.dist.joint_moment(exps)
    return raw_moment(block.dist, exps[0])


def linfty_norm(dist: Distribution) -> NormValue:
    return dist.linfty()


def sample_block(block: DependenceBlock, stream) -> dict[int, float]:
    """One joint draw of a block as a symbol-id -> value map."""
    value = block.dist.sample(stream)
    if isinstance(block.dist, MultinomialVector):
        return dict(zip(block.symbols, value))
    return {block.symbols[0]: value}


class RandomModel:
    """Partition of all symbols into mutually independent dependence blocks.

    Joint moments are memoized per (block, exponent pattern); the cache is
    filled during read-only queries and never changes results.
    """

    def __init__(self, table: SymbolTable, blocks: Sequence[DependenceBlock]):
        self.table = table
        self.blocks = list(blocks)
        if not self.blocks:
            raise DistributionError("a random model needs at least one block")
        owner: dict[int, tuple[int, int]] = {}
        for bidx, block in enumerate(self.blocks):
            for pos, sid in enumerate(block.symbols):
                if sid in owner:
                    raise DistributionError(
                        f"symbol {table.name_of(sid)!r} owned by two blocks"
                    )
                if not 0 <= sid < len(table):
                    raise MissingSymbolError(f"block references unknown symbol id {sid}")
                owner[sid] = (bidx, pos)
        missing = [table.name_of(s) for s in range(len(table)) if s not in owner]
        if missing:
            raise DistributionError(f"symbols missing from every block: {missing}")
        self._owner = owner
        self._moment_cache: dict[tuple[int, tuple[int, ...]], Fraction] = {}
        self._monomial_cache: dict[Mono, Fraction] = {}

    @property
    def n_symbols(self) -> int:
        return len(self.table)

    def block_of(self, sid: int) -> int:
        try:
            return self._owner[sid][0]
        except KeyError:
            raise MissingSymbolError(f"unknown symbol id {sid}") from None

    def joint_moment(self, bidx: int, exponents: tuple[int, ...]) -> Fraction:
        key = (bidx, exponents)
        cached = self._moment_cache.get(key)
        if cached is None:
            cached = joint_moment(self.blocks[bidx], exponents)
            self._moment_cache[key] = cached
        return cached

    def expect_monomial(self, mono: Mono) -> Fraction:
        """E[prod sym^e]: factorizes across blocks, joint within a block."""
        cached = self._monomial_cache.get(mono)
        if cached is not None:
            return cached
        per_block: dict[int, list[int]] = {}
        for sid, e in mono:
            info = self._owner.get(sid)
            if info is None:
                raise MissingSymbolError(
                    f"symbol id {sid} does not belong to this model"
                )
            bidx, pos = info
            exps = per_block.setdefault(bidx, [0] * len(self.blocks[bidx].symbols))
            exps[pos] = e
        total = Fraction(1)
        for bidx, exps in per_block.items():
            total *= self.joint_moment(bidx, tuple(exps))
        self._monomial_cache[mono] = total
        return total

    def expect_poly(self, p: Poly) -> Fraction:
        """Exact E[P] by linearity over terms."""
        return sum(
            (coeff * self.expect_monomial(mono) for mono, coeff in p.terms.items()),
            Fraction(0),
        )

    def symbol_linfty(self, sid: int) -> NormValue:
        bidx, pos = self._owner[sid]
        dist = self.blocks[bidx].dist
        if isinstance(dist, MultinomialVector):
            return dist.component_linfty(pos)
        return dist.linfty()

    def poly_linfty_bound(self, p: Poly) -> NormValue:
        """Triangle-inequality upper bound on ess sup |P|.

        Exact for constants and single bounded symbols scaled by rationals;
        an upper bound in general.  math.inf when an unbounded symbol
        appears.
        """
        total = Fraction(0)
        for mono, coeff in p.terms.items():
            factor = abs(coeff)
            for sid, e in mono:
                norm = self.symbol_linfty(sid)
                if norm == math.inf:
                    return math.inf
                factor *= norm**e
            total += factor
        return total

    def poly_l2_norm(self, p: Poly) -> float:
        """sqrt(E[P^2]) through the moment oracle."""
        return math.sqrt(float(self.expect_poly(p * p)))

    def sample_block(self, block: DependenceBlock, stream) -> dict[int, float]:
        return sample_block(block, stream)

    def draw(self, stream) -> list[float]:
        """One joint draw of every block, as a dense symbol-id-indexed list."""
        values = [0.0] * self.n_symbols
        for block in self.blocks:
            for sid, v in sample_block(block, stream).items():
                values[sid] = v
        return values


def expect_poly(p: Poly, model: RandomModel) -> Fraction:
    """Module-level alias for `RandomModel.expect_poly` (memoized on the model)."""
    return model.expect_poly(p)
