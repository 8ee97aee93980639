"""Closure over arbitrary error metrics.

A rejection set R is a candidate for error metric F at level alpha when
every nonempty null set A satisfies F_A(R)/alpha <= E_A. The closed
procedure picks a maximum-cardinality candidate. Mean-rule collections get
fast worst-case scans for all built-in metrics (FDP, k-FWER, PFER, FDX)
plus a direct per-index rule for FWER (the e-Holm procedure); everything
else falls back to exhaustive subset search under the explicit-size cap.

Because the candidate constraint quantifies over all metrics at once when
a family of them shares one e-collection, the error metric itself can be
chosen after seeing every metric's rejection set; post_hoc_metric_select
materializes that choice and post_hoc_audit checks the realized error
against its bound in simulations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bruteforce, kernels
from .core import (
    DiscoverySet,
    DomainError,
    ErrorMetric,
    InvariantViolation,
    as_evalues,
    check_alpha,
    top_k_indices,
    validate_subset,
)
from .ebh import closed_ebh_compound, closed_ebh_product
from .merging import (
    ArithmeticMeanCollection,
    CompoundCollection,
    ECollection,
    ExplicitCollection,
    ProductCollection,
    ascending_prefix,
)


@dataclass(frozen=True)
class ClosureProblem:
    coll: ECollection
    metric: ErrorMetric
    alpha: float

    def __post_init__(self):
        check_alpha(self.alpha)
        self.metric.validate_for(self.coll.K)


def _metric_code(metric: ErrorMetric) -> tuple:
    if metric.kind == "fdp":
        return kernels.METRIC_FDP, 0.0
    if metric.kind == "kfwer":
        return kernels.METRIC_KFWER, float(metric.k)
    if metric.kind == "pfer":
        return kernels.METRIC_PFER, 0.0
    if metric.kind == "fdx":
        return kernels.METRIC_FDX, float(metric.gamma)
    raise DomainError(f"unknown metric kind {metric.kind!r}")


def _mean_candidate_ok(values: np.ndarray, R, metric: ErrorMetric, alpha: float) -> bool:
    """Candidate check for an arbitrary rejection set under the mean rule.

    For overlap r the worst null set takes the r smallest e-values inside R
    and any count of the smallest e-values outside, so the check runs over
    an (r, m) table instead of 2^K subsets and works at any K.
    """
    K = values.shape[0]
    k = len(R)
    if k == 0:
        return True
    inside_idx = np.fromiter((i - 1 for i in sorted(R)), dtype=np.intp)
    mask = np.zeros(K, dtype=bool)
    mask[inside_idx] = True
    inside = np.sort(values[mask])
    outside = np.sort(values[~mask])
    pre_in = np.concatenate(([0.0], np.cumsum(inside)))
    pre_out = np.concatenate(([0.0], np.cumsum(outside)))
    r = np.arange(1, k + 1)
    code, param = _metric_code(metric)
    thr = kernels._row_threshold_numpy(r, k, alpha, code, param)
    j = np.arange(0, K - k + 1)
    m = r[:, None] + j[None, :]
    cells = (pre_in[r][:, None] + pre_out[j][None, :]) / m
    return not np.any(thr[:, None] > cells)


def is_candidate(problem: ClosureProblem, R) -> bool:
    """Does R satisfy F_A(R)/alpha <= E_A for every nonempty A?

    Mean collections use the worst-case table at any K; other collections
    enumerate subsets and are capped at the explicit limit.
    """
    R = validate_subset(R, problem.coll.K)
    if isinstance(problem.coll, ArithmeticMeanCollection):
        return _mean_candidate_ok(problem.coll.values, R, problem.metric, problem.alpha)
    return bruteforce.check_candidate(problem.coll, problem.metric, problem.alpha, R)


def closed_fwer(evalues, alpha) -> DiscoverySet:
    """e-Holm: reject index i when every subset containing i has mean
    e-value at least 1/alpha.

    The minimizing subset for i pads it with the t smallest other values
    for the best t, so each index needs one pass over the ascending order.
    """
    values = as_evalues(evalues)
    alpha = check_alpha(alpha)
    K = values.shape[0]
    asc, prefix = ascending_prefix(values)
    rank_of = np.empty(K, dtype=np.intp)
    rank_of[np.argsort(values, kind="stable")] = np.arange(K)
    inv_alpha = 1.0 / alpha
    t = np.arange(K)
    rejected = []
    for i in range(K):
        p = rank_of[i]
        others = np.where(t <= p, prefix[t], prefix[t + 1] - asc[p])
        worst = np.min((values[i] + others) / (t + 1))
        if worst >= inv_alpha:
            rejected.append(i + 1)
    return DiscoverySet.from_indices(rejected)


def closed_general(problem: ClosureProblem) -> DiscoverySet:
    """A maximum-cardinality candidate for the problem's metric.

    Ties go to the top-k-by-e-value set when the collection has base
    values, then to the lexicographically smallest index tuple. Mean
    collections scan top-k sets directly; compound and product collections
    have fast paths for FDP; anything else enumerates.
    """
    coll, metric, alpha = problem.coll, problem.metric, problem.alpha
    if isinstance(coll, ArithmeticMeanCollection):
        code, param = _metric_code(metric)
        k = kernels.scan_topk(coll.ascending, coll.prefix, alpha,
                              k_lo=0, metric_code=code, param=param)
        return DiscoverySet.from_indices(top_k_indices(coll.values, k))
    if isinstance(coll, CompoundCollection) and metric.kind == "fdp":
        return closed_ebh_compound(coll.values, alpha).discoveries
    if isinstance(coll, ProductCollection) and metric.kind == "fdp":
        return closed_ebh_product(coll.values, alpha).discoveries
    masks = bruteforce.candidate_masks(coll, metric, alpha)
    sizes = [bin(m).count("1") for m in masks]
    best = max(sizes)
    top_masks = {m for m, s in zip(masks, sizes) if s == best}
    if hasattr(coll, "values"):
        preferred = bruteforce.set_to_mask(top_k_indices(coll.values, best))
        if preferred in top_masks:
            return DiscoverySet.from_indices(bruteforce.mask_to_set(preferred))
    choice = min((tuple(sorted(bruteforce.mask_to_set(m))) for m in top_masks))
    return DiscoverySet.from_indices(choice)


def representation_roundtrip(R, K: int, alpha, metric: ErrorMetric | None = None,
                             exhaustive_limit: int = 8) -> ExplicitCollection:
    """Represent an arbitrary rejection set as a closed procedure.

    Builds the explicit collection E_A = F_A(R)/alpha and certifies that R
    is a candidate under it (always, by construction). For FDP with K up
    to exhaustive_limit it additionally certifies that R and the empty set
    are the *only* candidates, by full enumeration.
    """
    metric = metric if metric is not None else ErrorMetric.fdp()
    alpha = check_alpha(alpha)
    R = validate_subset(R, K)
    metric.validate_for(K)
    R_mask = bruteforce.set_to_mask(R)
    F_all = bruteforce.metric_values_all_subsets(metric, R_mask, K)
    coll = ExplicitCollection(K, F_all / alpha)
    if not bruteforce.check_candidate(coll, metric, alpha, R, e_all=coll.table):
        raise InvariantViolation("constructed collection does not certify its own set")
    if metric.kind == "fdp" and K <= exhaustive_limit:
        cands = set(bruteforce.candidate_masks(coll, metric, alpha))
        if cands != {0, R_mask}:
            raise InvariantViolation(
                f"representation for R={sorted(R)} admits extra candidates: "
                f"{sorted(cands - {0, R_mask})}"
            )
    return coll


@dataclass(frozen=True)
class PostHocSelection:
    """One closed rejection set per error metric, sharing one e-collection;
    `chosen` records which metric the caller settled on."""

    metrics: tuple
    rejection_sets: tuple
    chosen: int = 0

    def choose(self, index: int) -> "PostHocSelection":
        if not 0 <= index < len(self.metrics):
            raise DomainError(f"metric index {index} outside the family")
        return PostHocSelection(self.metrics, self.rejection_sets, index)


def post_hoc_metric_select(coll: ECollection, metrics, alpha) -> PostHocSelection:
    """Closed rejection set for each metric in the family; the caller may
    pick any of them after looking at all of them."""
    metrics = tuple(metrics)
    if not metrics:
        raise DomainError("metric family must be nonempty")
    sets = tuple(closed_general(ClosureProblem(coll, m, alpha)) for m in metrics)
    return PostHocSelection(metrics=metrics, rejection_sets=sets)


def post_hoc_audit(coll: ECollection, selection: PostHocSelection, null_set) -> tuple:
    """Simulation audit of the post-hoc guarantee for a known null set:
    returns (sup over metrics of the realized error of that metric's set,
    alpha-free bound E_{A*}). The realized sup stays below alpha * E_{A*};
    an empty null set gives (0, inf)."""
    from .core import metric_value

    K = coll.K
    null = validate_subset(null_set, K)
    sup_err = 0.0
    for metric, dset in zip(selection.metrics, selection.rejection_sets):
        sup_err = max(sup_err, metric_value(metric, null, dset, K))
    bound = coll.evaluate(null) if null else float("inf")
    return sup_err, bound


def simultaneous_fdp_demo(evalues, alpha, R) -> int:
    """Simultaneous true-discovery count d(R) = min |R \\ A| over null sets
    whose mean-rule intersection test fails to reject (E_A < 1/alpha);
    |R| when every intersection rejects. Exhaustive, demonstration-grade."""
    values = as_evalues(evalues)
    alpha = check_alpha(alpha)
    K = values.shape[0]
    R = validate_subset(R, K)
    coll = ArithmeticMeanCollection(values)
    e_all = coll.all_subset_values()
    masks, popcnt = bruteforce._mask_tables(K)
    phi = e_all >= 1.0 / alpha
    non_rejecting = masks[1:][~phi[1:]]
    if non_rejecting.size == 0:
        return len(R)
    R_mask = np.uint32(bruteforce.set_to_mask(R))
    kept = popcnt[np.bitwise_and(R_mask, np.bitwise_not(non_rejecting))]
    return int(np.min(kept))
