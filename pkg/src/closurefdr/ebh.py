"""The eBH step-up family and its closed improvements.

eBH rejects the k largest e-values for the largest k at which at least k
of them clear K/(alpha k). The closed variant keeps the same FDR guarantee
while asking much less of each e-value: the top-k set is accepted as soon
as, for every possible overlap r between a null set and the rejections,
the worst-case mean e-value stays at or above (r/k)/alpha. Variants of the
same scan cover compound e-values (sum/K rule, monotone, so the worst null
set never reaches outside the rejections) and products of independent
e-values (log-space, with exact zero propagation).

All procedures break ties among equal e-values by ascending index, so the
discovery sets of the dominating chain eBH <= minimally-adaptive <= closed
are literal set inclusions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import (
    EMPTY_DISCOVERY,
    DiscoverySet,
    DomainError,
    as_evalues,
    check_alpha,
    descending_order,
    top_k_indices,
    validate_subset,
)
from .merging import ascending_prefix


@dataclass(frozen=True)
class EbhResult:
    """Outcome of a step-up e-value procedure.

    thresholds_used holds the per-size threshold ladder the scan consulted:
    for plain eBH the k-th entry is K/(alpha k), for the minimally adaptive
    variant (K-1)/(alpha k), and for the closed procedures the singleton
    floor 1/(alpha k) that every rejected e-value must clear at size k.
    """

    discoveries: DiscoverySet
    k_star: int
    thresholds_used: np.ndarray


def _result(values: np.ndarray, k_star: int, thresholds: np.ndarray) -> EbhResult:
    discoveries = DiscoverySet.from_indices(top_k_indices(values, k_star))
    return EbhResult(discoveries=discoveries, k_star=k_star, thresholds_used=thresholds)


def ebh(evalues, alpha) -> EbhResult:
    """eBH step-up at level alpha.

    k* is the largest k with at least k e-values >= K/(alpha k); the
    rejections are exactly the k* largest (the count at k* can never
    strictly exceed k*, or k* would not be maximal).
    """
    values = as_evalues(evalues)
    alpha = check_alpha(alpha)
    K = values.shape[0]
    desc = values[descending_order(values)]
    ks = np.arange(1, K + 1)
    thresholds = K / (alpha * ks)
    feasible = desc >= thresholds
    k_star = int(ks[feasible][-1]) if feasible.any() else 0
    return _result(values, k_star, thresholds)


def ebh_minimally_adaptive(evalues, alpha) -> EbhResult:
    """eBH gated on the global-null mean test, run at the (K-1)/(alpha k)
    ladder.

    Rejects nothing unless the grand mean e-value reaches 1/alpha; once it
    does, the step-up count uses K-1 in place of K. For K = 1 the ladder
    degenerates, so the plain eBH rule is used.
    """
    values = as_evalues(evalues)
    alpha = check_alpha(alpha)
    K = values.shape[0]
    if K == 1:
        return ebh(values, alpha)
    ks = np.arange(1, K + 1)
    thresholds = (K - 1) / (alpha * ks)
    grand_mean = float(np.sum(values) / K)
    if grand_mean >= 1.0 / alpha:
        desc = values[descending_order(values)]
        feasible = desc >= thresholds
        k_star = int(ks[feasible][-1]) if feasible.any() else 0
    else:
        k_star = 0
    return _result(values, k_star, thresholds)


def _closed_thresholds(alpha: float, K: int) -> np.ndarray:
    return 1.0 / (alpha * np.arange(1, K + 1))


def closed_ebh(evalues, alpha) -> EbhResult:
    """Closed eBH under the arithmetic-mean rule.

    Scans candidate sizes k downward from K and accepts the first top-k set
    whose every worst-case cell passes: for overlap r in [k] and null size
    m in [r, r + K - k], the mean of the r smallest e-values inside the
    top k plus the m - r smallest overall must be at least (r/k)/alpha.
    Falls back to the eBH set, which is always a candidate. O(K^3) worst
    case with O(1) per cell.
    """
    values = as_evalues(evalues)
    alpha = check_alpha(alpha)
    K = values.shape[0]
    anchor = ebh(values, alpha)
    asc, prefix = ascending_prefix(values)
    k_star = kernels.scan_topk(asc, prefix, alpha, k_lo=anchor.k_star,
                               metric_code=kernels.METRIC_FDP)
    return _result(values, k_star, _closed_thresholds(alpha, K))


def fdr_hat(evalues, k: int) -> float:
    """Self-consistency diagnostic of the top-k set: the largest value of
    FDP_A / E_A over all nonempty null sets A under the mean rule, computed
    from the (r, m) worst-case table. 0 for k = 0; inf when a worst-case
    mean is exactly zero."""
    values = as_evalues(evalues)
    K = values.shape[0]
    if not 0 <= k <= K:
        raise DomainError(f"top-k size {k} outside [0, {K}]")
    if k == 0:
        return 0.0
    asc, prefix = ascending_prefix(values)
    return kernels.worst_ratio_max(asc, prefix, k)


def closed_ebh_compound(compound_evalues, alpha) -> EbhResult:
    """Closed eBH for compound e-values, using the sum/K intersection rule.

    That rule is monotone in A, so for each overlap r the single worst null
    set is the r smallest compound values inside the top k and nothing
    outside; the scan is O(K^2). Falls back to eBH applied to the compound
    values, which the same argument keeps inside the candidate family.
    """
    values = as_evalues(compound_evalues)
    alpha = check_alpha(alpha)
    K = values.shape[0]
    anchor = ebh(values, alpha)
    _, prefix = ascending_prefix(values)
    k_star = anchor.k_star
    for k in range(K, anchor.k_star, -1):
        base = K - k
        r = np.arange(1, k + 1)
        worst = (prefix[base + r] - prefix[base]) / K
        thr = (r / k) / alpha
        if not np.any(thr > worst):
            k_star = k
            break
    return _result(values, k_star, _closed_thresholds(alpha, K))


def closed_ebh_product(evalues, alpha) -> EbhResult:
    """Closed procedure under the product rule (independent e-values).

    For overlap r the worst null set multiplies the r smallest e-values
    inside the top k by every e-value outside it below 1. Any zero e-value
    anywhere forces some intersection e-value to 0 against a positive
    FDP, so no nonempty set can be a candidate and the scan returns empty.
    """
    values = as_evalues(evalues)
    alpha = check_alpha(alpha)
    K = values.shape[0]
    thresholds = _closed_thresholds(alpha, K)
    if np.any(values == 0.0):
        return _result(values, 0, thresholds)
    asc = np.sort(values)
    log_prefix = np.concatenate(([0.0], np.cumsum(np.log(asc))))
    n_below_one = int(np.searchsorted(asc, 1.0, side="left"))
    for k in range(K, 0, -1):
        base = K - k
        r = np.arange(1, k + 1)
        log_top = log_prefix[base + r] - log_prefix[base]
        log_out = log_prefix[min(n_below_one, base)]
        worst = np.exp(log_top + log_out)
        thr = (r / k) / alpha
        if not np.any(thr > worst):
            return _result(values, k, thresholds)
    return _result(values, 0, thresholds)


@dataclass(frozen=True)
class PostHocCertificate:
    """Largest realized FDP_A*(R)/beta over a level grid and all top-k
    candidate sets per level, next to the bound that caps it."""

    max_ratio: float
    null_evalue: float


def post_hoc_certificate(evalues, beta_grid, null_set) -> PostHocCertificate:
    """Sweep levels beta and every top-k candidate set at each beta,
    maximizing FDP_{A*}(R)/beta against the known null set.

    The returned ratio never exceeds the mean e-value over the null set
    (reported as null_evalue, inf for an empty null set): each candidate
    at level beta satisfies the null-set constraint by construction.
    Simulation diagnostics only; requires the ground truth.
    """
    values = as_evalues(evalues)
    K = values.shape[0]
    betas = [check_alpha(b) for b in beta_grid]
    if not betas:
        raise DomainError("beta grid must be nonempty")
    null = validate_subset(null_set, K)
    if null:
        null_evalue = float(np.sum(values[[i - 1 for i in sorted(null)]]) / len(null))
    else:
        null_evalue = math.inf
    order = descending_order(values)
    in_null = np.array([(int(i) + 1) in null for i in order])
    null_in_topk = np.concatenate(([0], np.cumsum(in_null)))
    asc, prefix = ascending_prefix(values)
    ks = np.arange(1, K + 1)
    realized_fdp = null_in_topk[1:] / ks
    best = 0.0
    for beta in betas:
        ok = kernels.accepted_topk_mask(asc, prefix, beta,
                                        metric_code=kernels.METRIC_FDP)[1:]
        if ok.any():
            best = max(best, float(np.max(realized_fdp[ok] / beta)))
    return PostHocCertificate(max_ratio=best, null_evalue=null_evalue)
