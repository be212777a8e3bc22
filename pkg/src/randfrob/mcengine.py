"""Monte Carlo validation of the exact statistics.

Two independent routes per sampled realization of the random symbols:

  series  evaluate the truncated solution series at the sampled values;
  rk4     freeze the sampled values into scalar coefficient functions and
          integrate the equation with classical fixed-step RK4.

Sampling is counter-seeded: realization i draws from a Philox stream keyed
by (seed, i), so results are bit-identical across runs, chunk layouts and
worker counts.  Samples are processed in fixed-size chunks whose partial
sums are combined with compensated summation in chunk order; the reduction
tree never depends on scheduling.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import GridMismatchError
from .frobenius import ProblemSpec, SeriesProcess, SeriesSolution
from .poly import Poly
from .randmodel import RandomModel
from .uqstats import StatCurve

CHUNK = 8192
CI_MULTIPLIER = 1.96  # normal-approximation 95% interval; not configurable

THREADS_ENV = "RANDFROB_THREADS"


@dataclass(frozen=True)
class McConfig:
    """Sampling run configuration."""

    samples: int
    seed: int
    method: str = "series"
    rk4_step: float = 1e-3
    input_truncation: int | None = None

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.method not in ("series", "rk4"):
            raise ValueError(f"method must be 'series' or 'rk4', got {self.method!r}")
        if self.rk4_step <= 0:
            raise ValueError("rk4_step must be positive")


def _worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def _sample_matrix(model: RandomModel, seed: int, start: int, count: int) -> np.ndarray:
    """Draw realizations start .. start+count-1 as a (count, n_symbols) array.

    Realization i uses a Philox stream keyed by (seed, i).  One Generator is
    reused and re-keyed per sample, which draws the exact same values as a
    freshly constructed Generator(Philox(key=[seed, i])) would.
    """
    out = np.empty((count, model.n_symbols))
    mask = (1 << 64) - 1
    stream = np.random.Generator(np.random.Philox(key=np.zeros(2, dtype=np.uint64)))
    template = dict(stream.bit_generator.state)
    zero_counter = np.zeros(4, dtype=np.uint64)
    key = np.empty(2, dtype=np.uint64)
    key[0] = seed & mask
    for j in range(count):
        key[1] = (start + j) & mask
        template["state"] = {"counter": zero_counter, "key": key.copy()}
        template["buffer"] = zero_counter
        template["buffer_pos"] = 4
        template["has_uint32"] = 0
        template["uinteger"] = 0
        stream.bit_generator.state = template
        out[j, :] = model.draw(stream)
    return out


def _eval_poly_batch(p: Poly, values: np.ndarray) -> np.ndarray:
    """Evaluate a polynomial on every row of a (count, n_symbols) matrix."""
    count = values.shape[0]
    total = np.zeros(count)
    for mono, coeff in p.terms.items():
        term = np.full(count, float(coeff))
        for sid, e in mono:
            term *= values[:, sid] ** e
        total += term
    return total


def _run_chunks(
    samples: int,
    worker: Callable[[int, int], tuple[np.ndarray, np.ndarray]],
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Apply `worker(start, count)` over fixed-size chunks, in order.

    The chunk layout depends only on the sample count, so any worker count
    produces the same partials in the same order.
    """
    starts = list(range(0, samples, CHUNK))
    jobs = [(s, min(CHUNK, samples - s)) for s in starts]
    n_workers = min(_worker_count(), len(jobs))
    if n_workers <= 1:
        results = [worker(s, c) for s, c in jobs]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(lambda job: worker(*job), jobs))
    sums = [r[0] for r in results]
    sumsqs = [r[1] for r in results]
    return sums, sumsqs


def _aggregate(
    grid: Sequence[float],
    samples: int,
    sums: list[np.ndarray],
    sumsqs: list[np.ndarray],
    label: str,
) -> StatCurve:
    means, variances, halfwidths = [], [], []
    if samples == 1:
        warnings.warn("sample variance undefined for a single draw; reporting 0")
    for g in range(len(grid)):
        total = math.fsum(chunk[g] for chunk in sums)
        total_sq = math.fsum(chunk[g] for chunk in sumsqs)
        mean = total / samples
        if samples > 1:
            var = (total_sq - samples * mean * mean) / (samples - 1)
        else:
            var = 0.0
        means.append(mean)
        variances.append(var)  # StatCurve clamps float dust to 0
        halfwidths.append(CI_MULTIPLIER * math.sqrt(max(var, 0.0) / samples))
    return StatCurve(
        grid=[float(t) for t in grid],
        mean=means,
        variance=variances,
        ci_halfwidth=halfwidths,
        label=label,
    )


def mc_series(
    sol: SeriesSolution,
    model: RandomModel,
    grid: Sequence[float],
    cfg: McConfig,
) -> StatCurve:
    """Sample the random symbols and evaluate the truncated series per draw."""
    if cfg.method != "series":
        raise ValueError(f"mc_series called with method {cfg.method!r}")
    t0 = float(sol.spec.t0)
    taus = np.array([float(t) - t0 for t in grid])
    # Power matrix (grid, order+1): partial sum is one matmul per chunk.
    powers = taus[:, None] ** np.arange(sol.order + 1)[None, :]

    def worker(start: int, count: int):
        values = _sample_matrix(model, cfg.seed, start, count)
        coeff_rows = np.empty((sol.order + 1, count))
        for n, p in enumerate(sol.X):
            coeff_rows[n, :] = _eval_poly_batch(p, values)
        paths = powers @ coeff_rows  # (grid, count)
        return paths.sum(axis=1), (paths * paths).sum(axis=1)

    sums, sumsqs = _run_chunks(cfg.samples, worker)
    return _aggregate(grid, cfg.samples, sums, sumsqs, label=f"mc-series[{cfg.samples}]")


def _dense_series(proc: SeriesProcess | None, cap: int | None) -> list[tuple[int, Poly]]:
    if proc is None:
        return []
    return [(n, p) for n, p in proc.items() if cap is None or n <= cap]


def _steps_for(delta: float, h: float) -> int:
    exact = delta / h
    n = max(1, round(exact))
    if abs(exact - n) > 1e-9 * max(1.0, abs(exact)):
        warnings.warn(
            f"step {h:g} does not divide grid spacing {delta:g};"
            f" using {n} steps of {delta / n:g}"
        )
    return n


def mc_rk4(
    spec: ProblemSpec,
    model: RandomModel,
    grid: Sequence[float],
    cfg: McConfig,
) -> StatCurve:
    """Integrate the sampled equation with classical RK4 at a fixed step.

    Each realization freezes the sampled symbol values into polynomial
    coefficient functions a(t), b(t), c(t) of the truncated input series and
    integrates x'' = c - b x - a x' from t0 through the grid, recording x at
    grid points (aligned to whole steps; non-dividing spacings are warned
    about and quantized).
    """
    if cfg.method != "rk4":
        raise ValueError(f"mc_rk4 called with method {cfg.method!r}")
    t0 = float(spec.t0)
    ts = [float(t) for t in grid]
    if any(t1 > t2 for t1, t2 in zip(ts, ts[1:])):
        raise ValueError("grid must be sorted ascending")
    if ts and ts[0] < t0 - 1e-12:
        raise ValueError(f"grid must start at or after t0={t0:g}")

    a_terms = _dense_series(spec.a, cfg.input_truncation)
    b_terms = _dense_series(spec.b, cfg.input_truncation)
    c_terms = _dense_series(spec.c, cfg.input_truncation)

    legs = []  # (t_start, n_steps, h_actual, record_after)
    t_prev = t0
    for t in ts:
        delta = t - t_prev
        if delta <= 1e-14:
            legs.append((t_prev, 0, cfg.rk4_step, True))
        else:
            n = _steps_for(delta, cfg.rk4_step)
            legs.append((t_prev, n, delta / n, True))
        t_prev = t

    def coeff_matrix(terms: list[tuple[int, Poly]], values: np.ndarray) -> np.ndarray | None:
        if not terms:
            return None
        deg = max(n for n, _ in terms)
        mat = np.zeros((deg + 1, values.shape[0]))
        for n, p in terms:
            mat[n, :] = _eval_poly_batch(p, values)
        return mat

    def series_at(mat: np.ndarray | None, tau: float):
        if mat is None:
            return 0.0
        acc = mat[-1]
        for row in mat[-2::-1]:
            acc = acc * tau + row
        return acc

    def worker(start: int, count: int):
        values = _sample_matrix(model, cfg.seed, start, count)
        a_mat = coeff_matrix(a_terms, values)
        b_mat = coeff_matrix(b_terms, values)
        c_mat = coeff_matrix(c_terms, values)

        def accel(tau: float, x, v):
            return series_at(c_mat, tau) - series_at(b_mat, tau) * x - series_at(a_mat, tau) * v

        x = _eval_poly_batch(spec.y0, values)
        v = _eval_poly_batch(spec.y1, values)
        sums = np.empty((len(ts), count))
        for g, (t_start, n_steps, h, _) in enumerate(legs):
            for i in range(n_steps):
                t_a = t_start + i * h
                tau_a = t_a - t0
                tau_m = tau_a + h / 2
                tau_b = tau_a + h
                k1x = v
                k1v = accel(tau_a, x, v)
                x2 = x + (h / 2) * k1x
                v2 = v + (h / 2) * k1v
                k2x = v2
                k2v = accel(tau_m, x2, v2)
                x3 = x + (h / 2) * k2x
                v3 = v + (h / 2) * k2v
                k3x = v3
                k3v = accel(tau_m, x3, v3)
                x4 = x + h * k3x
                v4 = v + h * k3v
                k4x = v4
                k4v = accel(tau_b, x4, v4)
                x = x + (h / 6) * (k1x + 2 * k2x + 2 * k3x + k4x)
                v = v + (h / 6) * (k1v + 2 * k2v + 2 * k3v + k4v)
            sums[g, :] = x
        return sums.sum(axis=1), (sums * sums).sum(axis=1)

    sums, sumsqs = _run_chunks(cfg.samples, worker)
    return _aggregate(grid, cfg.samples, sums, sumsqs, label=f"mc-rk4[{cfg.samples}]")


# ---------------------------------------------------------------------------
# curve comparison


@dataclass(frozen=True)
class PointComparison:
    t: float
    mean_delta: float
    var_delta: float
    mean_sigmas: float | None  # |delta| in combined-CI standard errors
    outside_ci: bool | None


@dataclass
class ComparisonReport:
    points: list[PointComparison]
    max_abs_mean: float
    max_rel_mean: float
    max_abs_var: float
    max_rel_var: float
    has_ci: bool
    n_outside_ci: int
    labels: tuple[str, str]

    def summary(self) -> str:
        lines = [
            f"compared {self.labels[0] or 'a'} vs {self.labels[1] or 'b'}"
            f" on {len(self.points)} grid points",
            f"mean:     max abs dev {self.max_abs_mean:.6g}, max rel dev {self.max_rel_mean:.6g}",
            f"variance: max abs dev {self.max_abs_var:.6g}, max rel dev {self.max_rel_var:.6g}",
        ]
        if self.has_ci:
            flagged = [p.t for p in self.points if p.outside_ci]
            if flagged:
                lines.append(
                    f"{len(flagged)} point(s) outside the combined 95% CI: "
                    + ", ".join(f"{t:g}" for t in flagged)
                )
            else:
                lines.append("all mean deviations within the combined 95% CI")
        return "\n".join(lines)


def compare_curves(a: StatCurve, b: StatCurve) -> ComparisonReport:
    """Deviation report between two curves on the same grid.

    CI flagging uses the mean's combined standard error from whichever
    curves carry half-widths; exact curves contribute zero width.
    """
    if len(a.grid) != len(b.grid) or any(
        ta != tb for ta, tb in zip(a.grid, b.grid)
    ):
        raise GridMismatchError(
            f"curves have different grids ({len(a.grid)} vs {len(b.grid)} points)"
        )
    has_ci = a.ci_halfwidth is not None or b.ci_halfwidth is not None
    points = []
    max_abs_mean = max_rel_mean = max_abs_var = max_rel_var = 0.0
    n_outside = 0
    for i, t in enumerate(a.grid):
        dmean = a.mean[i] - b.mean[i]
        dvar = a.variance[i] - b.variance[i]
        max_abs_mean = max(max_abs_mean, abs(dmean))
        max_abs_var = max(max_abs_var, abs(dvar))
        denom_m = max(abs(a.mean[i]), abs(b.mean[i]))
        denom_v = max(abs(a.variance[i]), abs(b.variance[i]))
        if denom_m > 0:
            max_rel_mean = max(max_rel_mean, abs(dmean) / denom_m)
        if denom_v > 0:
            max_rel_var = max(max_rel_var, abs(dvar) / denom_v)
        sigmas = None
        outside = None
        if has_ci:
            hw_a = a.ci_halfwidth[i] if a.ci_halfwidth is not None else 0.0
            hw_b = b.ci_halfwidth[i] if b.ci_halfwidth is not None else 0.0
            se = math.hypot(hw_a, hw_b) / CI_MULTIPLIER
            if se > 0:
                sigmas = abs(dmean) / se
                outside = sigmas > CI_MULTIPLIER
            else:
                sigmas = 0.0 if dmean == 0 else math.inf
                outside = dmean != 0
            if outside:
                n_outside += 1
        points.append(PointComparison(t, dmean, dvar, sigmas, outside))
    return ComparisonReport(
        points=points,
        max_abs_mean=max_abs_mean,
        max_rel_mean=max_rel_mean,
        max_abs_var=max_abs_var,
        max_rel_var=max_rel_var,
        has_ci=has_ci,
        n_outside_ci=n_outside,
        labels=(a.label, b.label),
    )
