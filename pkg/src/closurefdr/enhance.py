"""Power enhancements for the closed scan: stochastic rounding and
truncation boosting.

Stochastic rounding draws one uniform U and tries to extend the closed
discovery set by exactly one index: the extension is accepted when U falls
below the smallest "rounding fraction" over null sets whose FDP would get
worse, which preserves the e-value property of every intersection e-value.
The result never loses discoveries relative to the deterministic scan.

Boosting exploits that the scan only ever compares an intersection
e-value against the finite ladder of thresholds (r/k)/alpha: e-values can
be snapped down to that ladder, and when the null distribution is known, a
factor b >= 1 can be applied first, as large as the unit-expectation
constraint E[T(b E)] <= 1 allows. Grid elements are computed with exactly
the same float expression as the scan thresholds, so snapping never drops
a passing cell to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import bruteforce
from .core import (
    CapacityError,
    ConfigurationError,
    DomainError,
    as_evalues,
    check_alpha,
    top_k_indices,
)
from .ebh import EbhResult, _closed_thresholds, _result, closed_ebh
from .merging import EXPLICIT_K_MAX, ArithmeticMeanCollection, ascending_prefix


@dataclass(frozen=True)
class RoundingContext:
    """One stochastic-rounding attempt: the deterministic size, the single
    shared uniform draw, and the level."""

    k_hat: int
    u: float
    alpha: float


def _extension_threshold(values: np.ndarray, alpha: float, k_hat: int) -> float:
    """Smallest rounding fraction over null sets that block the extension
    from k_hat to k_hat + 1 discoveries; the exact acceptance probability
    is this value clipped to [0, 1]. Subset enumeration, so K is capped."""
    K = values.shape[0]
    if K > EXPLICIT_K_MAX:
        raise CapacityError(
            f"stochastic rounding enumerates 2^K null sets; limit is K <= {EXPLICIT_K_MAX}"
        )
    e_all = ArithmeticMeanCollection(values).all_subset_values()
    masks, popcnt = bruteforce._mask_tables(K)
    cur_mask = np.uint32(bruteforce.set_to_mask(top_k_indices(values, k_hat)))
    nxt_mask = np.uint32(bruteforce.set_to_mask(top_k_indices(values, k_hat + 1)))
    inter_cur = popcnt[np.bitwise_and(masks[1:], cur_mask)]
    inter_nxt = popcnt[np.bitwise_and(masks[1:], nxt_mask)]
    fdp_cur = inter_cur / max(k_hat, 1)
    fdp_nxt = inter_nxt / (k_hat + 1)
    blocking = fdp_nxt > fdp_cur
    if not blocking.any():
        return 1.0
    num = e_all[1:][blocking] - fdp_cur[blocking] / alpha
    den = (fdp_nxt[blocking] - fdp_cur[blocking]) / alpha
    return float(np.min(num / den))


def acceptance_probability(evalues, alpha) -> float:
    """Exact probability that stochastic rounding extends the deterministic
    closed set by one discovery; 0 when it already rejects everything."""
    values = as_evalues(evalues)
    alpha = check_alpha(alpha)
    k_hat = closed_ebh(values, alpha).k_star
    if k_hat == values.shape[0]:
        return 0.0
    return float(np.clip(_extension_threshold(values, alpha, k_hat), 0.0, 1.0))


def stochastic_rounding_context(evalues, alpha, seed) -> RoundingContext:
    values = as_evalues(evalues)
    alpha = check_alpha(alpha)
    if seed is None:
        raise DomainError("stochastic rounding requires an explicit seed")
    u = float(np.random.default_rng(seed).random())
    k_hat = closed_ebh(values, alpha).k_star
    return RoundingContext(k_hat=k_hat, u=u, alpha=alpha)


def randomized_closed_ebh(evalues, alpha, seed) -> EbhResult:
    """Closed eBH with one stochastic-rounding step.

    Computes the deterministic size k_hat, draws one uniform from the seed,
    and accepts k_hat + 1 discoveries when the draw clears every blocking
    null set's rounding fraction. Never returns fewer discoveries than the
    deterministic procedure.
    """
    values = as_evalues(evalues)
    alpha = check_alpha(alpha)
    ctx = stochastic_rounding_context(values, alpha, seed)
    K = values.shape[0]
    k_final = ctx.k_hat
    if ctx.k_hat < K and ctx.u <= _extension_threshold(values, alpha, ctx.k_hat):
        k_final = ctx.k_hat + 1
    return _result(values, k_final, _closed_thresholds(alpha, K))


@dataclass(frozen=True)
class TruncationGrid:
    """The ladder of values a realized FDP/alpha can take for null sets of
    size up to a_size: {(r/k)/alpha : k in [K], r in [min(k, a_size)]} plus
    0, sorted and deduplicated. Elements are computed with the same float
    expression as the scan thresholds."""

    alpha: float
    K: int
    a_size: int
    values: np.ndarray

    @classmethod
    def build(cls, alpha, K: int, a_size: int) -> "TruncationGrid":
        alpha = check_alpha(alpha)
        if K < 1 or a_size < 1:
            raise DomainError("grid needs K >= 1 and a_size >= 1")
        chunks = [np.zeros(1)]
        for k in range(1, K + 1):
            r = np.arange(1, min(k, a_size) + 1)
            chunks.append((r / k) / alpha)
        return cls(alpha=alpha, K=K, a_size=a_size,
                   values=np.unique(np.concatenate(chunks)))


def truncate(grid: TruncationGrid, x: float) -> float:
    """Largest grid element <= x (0 is always in the grid)."""
    x = float(x)
    if not x >= 0.0:
        raise DomainError(f"truncation input must be >= 0, got {x}")
    idx = int(np.searchsorted(grid.values, x, side="right")) - 1
    return float(grid.values[idx])


def truncate_array(grid: TruncationGrid, xs: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.float64)
    idx = np.searchsorted(grid.values, xs, side="right") - 1
    return grid.values[np.maximum(idx, 0)]


@dataclass(frozen=True)
class NullExpectationOracle:
    """Null expectation of a transformed e-value.

    Monte Carlo mode holds frozen draws (deterministic given the seed used
    to produce them) and reports a standard error; survival mode evaluates
    step-function transforms exactly from the null survival function
    S(t) = P(E >= t).
    """

    mode: str
    samples: np.ndarray | None = None
    survival: object = None
    seed: int | None = None

    @classmethod
    def from_samples(cls, samples, seed: int | None = None) -> "NullExpectationOracle":
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < 1:
            raise DomainError("oracle samples must be a nonempty 1-d array")
        return cls(mode="monte-carlo", samples=samples, seed=seed)

    @classmethod
    def from_sampler(cls, sampler, n: int, seed: int) -> "NullExpectationOracle":
        """sampler(rng, n) -> n null draws of the e-value."""
        rng = np.random.default_rng(seed)
        return cls.from_samples(np.asarray(sampler(rng, int(n)), dtype=np.float64), seed=seed)

    @classmethod
    def from_survival(cls, survival) -> "NullExpectationOracle":
        """survival(t) = P(E >= t), vectorized over t > 0."""
        return cls(mode="survival", survival=survival)

    def expectation(self, transform) -> float:
        if self.mode != "monte-carlo":
            raise ConfigurationError("generic transforms need the Monte Carlo mode")
        return float(np.mean(transform(self.samples)))

    def expected_truncated(self, grid: TruncationGrid, b: float) -> float:
        """E[T(b E)] under the null."""
        if b < 0.0:
            raise DomainError(f"boost factor must be >= 0, got {b}")
        if self.mode == "monte-carlo":
            return float(np.mean(truncate_array(grid, b * self.samples)))
        positive = grid.values[grid.values > 0.0]
        if positive.size == 0:
            return 0.0
        steps = np.diff(np.concatenate(([0.0], positive)))
        tail = np.asarray(self.survival(positive / b), dtype=np.float64)
        return float(np.sum(steps * tail))

    def mc_standard_error(self, grid: TruncationGrid, b: float) -> float:
        if self.mode != "monte-carlo":
            raise ConfigurationError("standard errors only exist in Monte Carlo mode")
        vals = truncate_array(grid, b * self.samples)
        return float(np.std(vals, ddof=1) / np.sqrt(vals.size))


@dataclass(frozen=True)
class BoostResult:
    factor: float
    expectation: float
    capped: bool
    trace: tuple = field(default_factory=tuple)


B_CAP = 1e6


def boost_factor(grid: TruncationGrid, oracle: NullExpectationOracle,
                 tol: float = 1e-6) -> BoostResult:
    """Largest b >= 1 with E[T(b E)] <= 1, to within tol.

    Doubles an upper bracket until the expectation exceeds 1 (capped at
    B_CAP, flagged when the cap binds), then bisects; b -> E[T(b E)] is
    nondecreasing, which also holds path-by-path for frozen Monte Carlo
    draws. Raises when the unboosted e-value is already invalid.
    """
    trace = []
    e1 = oracle.expected_truncated(grid, 1.0)
    trace.append((1.0, e1))
    if e1 > 1.0:
        raise DomainError(
            f"E[T(E)] = {e1} > 1 at b = 1; input e-value is not valid under this null"
        )
    lo, hi = 1.0, 1.0
    while hi < B_CAP:
        hi = min(hi * 2.0, B_CAP)
        e_hi = oracle.expected_truncated(grid, hi)
        trace.append((hi, e_hi))
        if e_hi > 1.0:
            break
        lo = hi
    else:
        return BoostResult(factor=B_CAP, expectation=trace[-1][1],
                           capped=True, trace=tuple(trace))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        e_mid = oracle.expected_truncated(grid, mid)
        trace.append((mid, e_mid))
        if e_mid <= 1.0:
            lo = mid
        else:
            hi = mid
    return BoostResult(factor=lo, expectation=oracle.expected_truncated(grid, lo),
                       capped=False, trace=tuple(trace))


def stratum_boost_factors(alpha, K: int, oracles: dict, tol: float = 1e-6) -> dict:
    """Boost factor per null-set size class m, from one oracle per class.

    Under an i.i.d. null the mean of m base e-values has one distribution
    per m, so one factor per size stratum covers every null set.
    """
    alpha = check_alpha(alpha)
    factors = {}
    for m in range(1, K + 1):
        if m not in oracles:
            raise ConfigurationError(f"no null-expectation oracle for |A| = {m}")
        grid = TruncationGrid.build(alpha, K, m)
        factors[m] = boost_factor(grid, oracles[m], tol=tol).factor
    return factors


def boosted_closed_ebh(evalues, alpha, factors) -> EbhResult:
    """Closed scan with every intersection e-value replaced by its
    grid-truncated, boosted version T_m(b_m E_A), m = |A|.

    Needs one factor >= 1 per size stratum in factors (a mapping m -> b_m).
    Dominates the unboosted scan: thresholds are grid points, so any cell
    the plain scan passes is still passed after snapping.
    """
    values = as_evalues(evalues)
    alpha = check_alpha(alpha)
    K = values.shape[0]
    b = np.empty(K + 1)
    for m in range(1, K + 1):
        if m not in factors:
            raise ConfigurationError(f"missing boost factor for stratum |A| = {m}")
        if factors[m] < 1.0:
            raise DomainError(f"boost factors must be >= 1, got {factors[m]} at m = {m}")
        b[m] = float(factors[m])
    grids = {m: TruncationGrid.build(alpha, K, m) for m in range(1, K + 1)}
    asc, prefix = ascending_prefix(values)
    thresholds = _closed_thresholds(alpha, K)
    for k in range(K, 0, -1):
        base = K - k
        ok = True
        for m in range(1, K + 1):
            r_lo = max(1, m - (K - k))
            r_hi = min(k, m)
            if r_lo > r_hi:
                continue
            r = np.arange(r_lo, r_hi + 1)
            cells = (prefix[base + r] - prefix[base] + prefix[m - r]) / m
            boosted = truncate_array(grids[m], b[m] * cells)
            thr = (r / k) / alpha
            if np.any(thr > boosted):
                ok = False
                break
        if ok:
            return _result(values, k, thresholds)
    return _result(values, 0, thresholds)
