"""Intersection e-values E_A built from base inputs.

Four rules are supported: the arithmetic mean of the base e-values over A
(valid under arbitrary dependence), their product (independent e-values),
the compound normalization sum(A)/K, and explicit per-subset maps. The
mean and product rules also expose the closed-form worst-case values the
fast step-up scans rely on: among all null sets with a fixed overlap with
the rejection set, the one minimizing E_A.
"""

from __future__ import annotations

import numpy as np

from .core import CapacityError, DomainError, as_evalues, validate_subset

# Ceiling for any path that materializes all 2^K nonempty subsets.
EXPLICIT_K_MAX = 20


def _indices_array(A, K: int) -> np.ndarray:
    subset = validate_subset(A, K)
    if not subset:
        raise DomainError("intersection e-values are defined for nonempty subsets only")
    return np.fromiter((i - 1 for i in sorted(subset)), dtype=np.intp)


def ascending_prefix(values: np.ndarray) -> tuple:
    """Ascending sort of values plus prefix sums (prefix[j] = sum of the j
    smallest). Shared by every mean-rule worst-case computation so all of
    them agree bit-for-bit."""
    asc = np.sort(np.asarray(values, dtype=np.float64))
    prefix = np.concatenate(([0.0], np.cumsum(asc)))
    return asc, prefix


class ECollection:
    """Base class: a rule assigning an e-value to every nonempty A."""

    K: int

    def evaluate(self, A) -> float:
        raise NotImplementedError

    def all_subset_values(self, k_max: int = EXPLICIT_K_MAX) -> np.ndarray:
        """E_A for every subset, indexed by bitmask (bit i-1 <-> index i).

        Entry 0 (the empty set) is left at 0 and never consulted. Cost is
        O(K 2^K); guarded by k_max.
        """
        raise NotImplementedError

    def _check_capacity(self, k_max: int) -> None:
        if self.K > k_max:
            raise CapacityError(
                f"subset enumeration needs 2^{self.K} values; limit is K <= {k_max}"
            )


def _subset_sums(values: np.ndarray) -> np.ndarray:
    """Sums over all subsets by bitmask, accumulated in ascending index order."""
    K = values.shape[0]
    sums = np.zeros(1 << K)
    for i in range(K):
        step = 1 << i
        view = sums.reshape(-1, 2 * step)
        view[:, step:] = view[:, :step] + values[i]
    return sums


def _subset_popcounts(K: int) -> np.ndarray:
    counts = np.zeros(1 << K, dtype=np.int64)
    for i in range(K):
        step = 1 << i
        view = counts.reshape(-1, 2 * step)
        view[:, step:] = view[:, :step] + 1
    return counts


class ArithmeticMeanCollection(ECollection):
    """E_A = mean of the base e-values over A."""

    def __init__(self, values):
        self.values = as_evalues(values)
        self.K = self.values.shape[0]
        self.ascending, self.prefix = ascending_prefix(self.values)

    def evaluate(self, A) -> float:
        idx = _indices_array(A, self.K)
        return float(np.sum(self.values[idx]) / idx.shape[0])

    def all_subset_values(self, k_max: int = EXPLICIT_K_MAX) -> np.ndarray:
        self._check_capacity(k_max)
        sums = _subset_sums(self.values)
        counts = _subset_popcounts(self.K)
        counts[0] = 1  # keep the unused empty-set entry finite
        return sums / counts

    def worst_case(self, k: int, r: int, m: int) -> float:
        return worst_case_mean(self, k, r, m)


class CompoundCollection(ECollection):
    """E_A = sum of the compound e-values over A, divided by K.

    The compound validity condition is a distributional statement about the
    inputs; it is the caller's responsibility, not checked here.
    """

    def __init__(self, values):
        self.values = as_evalues(values)
        self.K = self.values.shape[0]
        self.ascending, self.prefix = ascending_prefix(self.values)

    def evaluate(self, A) -> float:
        idx = _indices_array(A, self.K)
        return float(np.sum(self.values[idx]) / self.K)

    def all_subset_values(self, k_max: int = EXPLICIT_K_MAX) -> np.ndarray:
        self._check_capacity(k_max)
        return _subset_sums(self.values) / self.K


class ProductCollection(ECollection):
    """E_A = product of the base e-values over A (independence rule).

    Products are accumulated in log space; a zero factor short-circuits to
    an exact 0.0 so underflow can never turn a true zero into a tiny
    positive value or vice versa.
    """

    def __init__(self, values):
        self.values = as_evalues(values)
        self.K = self.values.shape[0]
        self.is_zero = self.values == 0.0
        with np.errstate(divide="ignore"):
            self.logs = np.where(self.is_zero, 0.0, np.log(np.where(self.is_zero, 1.0, self.values)))

    def evaluate(self, A) -> float:
        idx = _indices_array(A, self.K)
        if np.any(self.is_zero[idx]):
            return 0.0
        return float(np.exp(np.sum(self.logs[idx])))

    def all_subset_values(self, k_max: int = EXPLICIT_K_MAX) -> np.ndarray:
        self._check_capacity(k_max)
        log_sums = _subset_sums(self.logs)
        has_zero = np.zeros(1 << self.K, dtype=bool)
        for i in range(self.K):
            step = 1 << i
            view = has_zero.reshape(-1, 2 * step)
            view[:, step:] = view[:, :step] | self.is_zero[i]
        out = np.exp(log_sums)
        out[has_zero] = 0.0
        return out


class ExplicitCollection(ECollection):
    """E_A looked up from a fully materialized per-subset table."""

    def __init__(self, K: int, values_by_mask: np.ndarray):
        if K > EXPLICIT_K_MAX:
            raise CapacityError(
                f"explicit collections store 2^K values; limit is K <= {EXPLICIT_K_MAX}"
            )
        self.K = int(K)
        table = np.asarray(values_by_mask, dtype=np.float64)
        if table.shape != (1 << self.K,):
            raise DomainError(
                f"explicit table must have 2^{self.K} entries, got shape {table.shape}"
            )
        if not np.all(np.isfinite(table)) or np.any(table[1:] < 0.0):
            raise DomainError("explicit e-values must be finite and nonnegative")
        self.table = table

    @classmethod
    def from_function(cls, K: int, fn) -> "ExplicitCollection":
        """Build from fn(subset as frozenset of 1-based indices) -> value."""
        if K > EXPLICIT_K_MAX:
            raise CapacityError(f"K = {K} exceeds the explicit limit {EXPLICIT_K_MAX}")
        table = np.zeros(1 << K)
        for mask in range(1, 1 << K):
            subset = frozenset(i + 1 for i in range(K) if mask >> i & 1)
            table[mask] = fn(subset)
        return cls(K, table)

    @classmethod
    def from_dict(cls, K: int, mapping) -> "ExplicitCollection":
        if K > EXPLICIT_K_MAX:
            raise CapacityError(f"K = {K} exceeds the explicit limit {EXPLICIT_K_MAX}")
        table = np.zeros(1 << K)
        seen = 0
        for subset, value in mapping.items():
            idx = _indices_array(subset, K)
            mask = int(np.sum(1 << idx))
            table[mask] = value
            seen += 1
        if seen != (1 << K) - 1:
            raise DomainError(
                f"explicit map must cover all {(1 << K) - 1} nonempty subsets, got {seen}"
            )
        return cls(K, table)

    def evaluate(self, A) -> float:
        idx = _indices_array(A, self.K)
        return float(self.table[int(np.sum(1 << idx))])

    def all_subset_values(self, k_max: int = EXPLICIT_K_MAX) -> np.ndarray:
        return self.table


def worst_case_mean(coll: ArithmeticMeanCollection, k: int, r: int, m: int) -> float:
    """Smallest mean e-value over null sets A with exactly r members among
    the top-k e-values and |A| = m.

    The minimizer takes the r smallest values inside the top-k set plus the
    m - r smallest values overall, so with cached prefix sums each query is
    O(1).
    """
    K = coll.K
    if not 1 <= r <= k <= K:
        raise DomainError(f"need 1 <= r <= k <= K, got r={r}, k={k}, K={K}")
    if not r <= m <= r + K - k:
        raise DomainError(f"need r <= m <= r + K - k, got m={m}")
    prefix = coll.prefix
    base = K - k
    s_top = prefix[base + r] - prefix[base]
    s_low = prefix[m - r]
    return (s_top + s_low) / m


def worst_case_product(values, R, r: int) -> float:
    """Smallest product e-value over null sets A with |A intersect R| = r.

    Equals the product of the r smallest e-values inside R times the
    product of every e-value outside R that is < 1 (each such factor only
    shrinks the product; factors >= 1 are left out). A zero factor anywhere
    in that selection gives an exact 0.0.
    """
    values = as_evalues(values)
    K = values.shape[0]
    R = validate_subset(R, K)
    if not 1 <= r <= len(R):
        raise DomainError(f"need 1 <= r <= |R|, got r={r}, |R|={len(R)}")
    mask = np.zeros(K, dtype=bool)
    mask[[i - 1 for i in R]] = True
    inside = np.sort(values[mask])[:r]
    outside = values[~mask]
    chosen_out = outside[outside < 1.0]
    if np.any(inside == 0.0) or np.any(chosen_out == 0.0):
        return 0.0
    log_total = np.sum(np.log(inside)) + np.sum(np.log(chosen_out))
    return float(np.exp(log_total))
