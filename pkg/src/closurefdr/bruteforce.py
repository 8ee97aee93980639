"""Exhaustive verification oracles.

Everything here enumerates subsets by bitmask and is exponential in K on
purpose: these are the independent reference implementations the fast
procedures are validated against, never the production path. Bit i - 1 of
a mask corresponds to hypothesis index i.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .core import CapacityError, DomainError, ErrorMetric, check_alpha
from .merging import EXPLICIT_K_MAX, ECollection


def set_to_mask(subset) -> int:
    return sum(1 << (int(i) - 1) for i in subset)


def mask_to_set(mask: int) -> frozenset:
    return frozenset(i + 1 for i in range(mask.bit_length()) if mask >> i & 1)


@lru_cache(maxsize=4)
def _mask_tables(K: int):
    masks = np.arange(1 << K, dtype=np.uint32)
    popcnt = np.bitwise_count(masks).astype(np.int64)
    return masks, popcnt


def metric_values_all_subsets(metric: ErrorMetric, R_mask: int, K: int) -> np.ndarray:
    """F_A(R) for every subset A (by mask), for a fixed rejection mask."""
    masks, popcnt = _mask_tables(K)
    inter = popcnt[np.bitwise_and(masks, np.uint32(R_mask))]
    r_size = int(popcnt[R_mask])
    if metric.kind == "fdp":
        return inter / max(r_size, 1)
    if metric.kind == "kfwer":
        return (inter >= metric.k).astype(np.float64)
    if metric.kind == "pfer":
        return inter.astype(np.float64)
    if metric.kind == "fdx":
        realized = inter / max(r_size, 1)
        return (realized > metric.gamma).astype(np.float64)
    raise DomainError(f"unknown metric kind {metric.kind!r}")


def check_candidate(coll: ECollection, metric: ErrorMetric, alpha, R,
                    e_all: np.ndarray | None = None) -> bool:
    """Membership of R in the candidate family by enumerating every
    nonempty A and testing F_A(R) / alpha <= E_A."""
    alpha = check_alpha(alpha)
    K = coll.K
    metric.validate_for(K)
    if e_all is None:
        e_all = coll.all_subset_values()
    R_mask = R if isinstance(R, int) else set_to_mask(R)
    F = metric_values_all_subsets(metric, R_mask, K)
    return bool(np.all(F[1:] / alpha <= e_all[1:]))


def candidate_masks(coll: ECollection, metric: ErrorMetric, alpha,
                    k_max: int = EXPLICIT_K_MAX) -> list:
    """All candidate rejection sets, as bitmasks, by double enumeration.

    Cost is O(4^K): every R against every nonempty A. Intended for K up to
    ~10 in routine verification; hard-refused above k_max.
    """
    K = coll.K
    if K > k_max:
        raise CapacityError(
            f"candidate enumeration is O(4^K); K = {K} exceeds the limit {k_max}"
        )
    alpha = check_alpha(alpha)
    metric.validate_for(K)
    e_all = coll.all_subset_values(k_max)
    e_nonempty = e_all[1:]
    masks, popcnt = _mask_tables(K)
    out = []
    for R_mask in range(1 << K):
        F = metric_values_all_subsets(metric, R_mask, K)
        if np.all(F[1:] / alpha <= e_nonempty):
            out.append(R_mask)
    return out


def candidate_family(coll: ECollection, metric: ErrorMetric, alpha,
                     k_max: int = EXPLICIT_K_MAX) -> list:
    """Candidate rejection sets as frozensets of 1-based indices."""
    return [mask_to_set(m) for m in candidate_masks(coll, metric, alpha, k_max)]


def max_topk_candidate_size(coll: ECollection, metric: ErrorMetric, alpha, values,
                            k_max: int = EXPLICIT_K_MAX) -> int:
    """Largest k whose top-k set (shared tie-break on `values`) is a
    candidate, per the exhaustive family. 0 when only the empty set is."""
    from .core import top_k_indices

    cand = set(candidate_masks(coll, metric, alpha, k_max))
    K = coll.K
    for k in range(K, 0, -1):
        if set_to_mask(top_k_indices(values, k)) in cand:
            return k
    return 0


def max_cardinality_candidates(coll: ECollection, metric: ErrorMetric, alpha,
                               k_max: int = EXPLICIT_K_MAX) -> list:
    """All candidates of maximum cardinality, as frozensets."""
    cand = candidate_masks(coll, metric, alpha, k_max)
    _, popcnt = _mask_tables(coll.K)
    best = max(int(popcnt[m]) for m in cand)
    return [mask_to_set(m) for m in cand if int(popcnt[m]) == best]
