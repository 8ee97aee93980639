"""Benjamini-Yekutieli step-up, its p-to-e calibrator, and the closed BY.

The calibrator turns a p-value into a step-function e-value whose pieces
sit exactly on the eBH rejection ladder: p in the j-th slice of width
alpha/(K l_K) maps to K/(alpha j), and anything above alpha/l_K maps to 0
(l_K is the K-th harmonic number). Its integral over a uniform p is
exactly 1, so it is a valid calibrator, and running eBH on the calibrated
values reproduces BY decision for decision. Running the closed scan on
them instead gives the closed BY procedure, a superset of BY on every
input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import DiscoverySet, DomainError, as_pvalues, check_alpha
from .ebh import EbhResult, closed_ebh


def harmonic_number(K: int) -> float:
    """l_K = sum of 1/j for j = 1..K, accumulated exactly then rounded once."""
    if K < 1:
        raise DomainError(f"harmonic number needs K >= 1, got {K}")
    return math.fsum(1.0 / j for j in range(1, K + 1))


@dataclass(frozen=True)
class ByCalibratorParams:
    alpha: float
    K: int
    harmonic: float

    @classmethod
    def create(cls, alpha, K: int) -> "ByCalibratorParams":
        alpha = check_alpha(alpha)
        K = int(K)
        return cls(alpha=alpha, K=K, harmonic=harmonic_number(K))


def by_calibrate(p: float, params: ByCalibratorParams) -> float:
    """Calibrated e-value for a single p-value.

    Computes x = p K l_K / alpha and returns K / (alpha ceil(x or 1)) when
    x <= K (equivalently p <= alpha / l_K), else 0. The K/(alpha c) form
    keeps comparisons against the eBH thresholds K/(alpha k) exact: they
    reduce to the integer test c <= k.
    """
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p-value must lie in [0, 1], got {p}")
    x = p * params.K * params.harmonic / params.alpha
    if x > params.K:
        return 0.0
    c = max(int(math.ceil(x)), 1)
    return params.K / (params.alpha * c)


def by_calibrate_vector(pvalues, params: ByCalibratorParams) -> np.ndarray:
    """Vectorized calibrator; same breakpoint handling as by_calibrate."""
    P = as_pvalues(pvalues)
    x = P * params.K * params.harmonic / params.alpha
    c = np.maximum(np.ceil(x), 1.0)
    with np.errstate(divide="ignore"):
        out = params.K / (params.alpha * c)
    out[x > params.K] = 0.0
    return out


def calibrator_integral_exact(K: int, alpha=Fraction(1, 10)) -> Fraction:
    """Integral of the calibrator over p in [0, 1], in exact rational
    arithmetic: K equal slices of width alpha/(K l_K) at heights
    K/(alpha j) sum to exactly 1 for every K and alpha."""
    if K < 1:
        raise DomainError(f"K must be >= 1, got {K}")
    alpha = Fraction(alpha)
    ell = sum((Fraction(1, j) for j in range(1, K + 1)), Fraction(0))
    width = alpha / (K * ell)
    return sum((width * K / (alpha * j) for j in range(1, K + 1)), Fraction(0))


def by_procedure(pvalues, alpha) -> DiscoverySet:
    """BY step-up: reject the k* smallest p-values where k* is the largest
    k with P_(k) <= alpha k / (K l_K). Ties among equal p-values are broken
    by ascending index, matching the e-value procedures."""
    P = as_pvalues(pvalues)
    alpha = check_alpha(alpha)
    K = P.shape[0]
    ell = harmonic_number(K)
    order = np.argsort(P, kind="stable")
    sorted_p = P[order]
    ks = np.arange(1, K + 1)
    thresholds = alpha * ks / (K * ell)
    feasible = sorted_p <= thresholds
    k_star = int(ks[feasible][-1]) if feasible.any() else 0
    return DiscoverySet.from_indices(int(i) + 1 for i in order[:k_star])


def closed_by(pvalues, alpha) -> DiscoverySet:
    """Closed BY: the closed eBH scan on calibrated e-values. Contains the
    BY rejections on every input."""
    return closed_by_result(pvalues, alpha).discoveries


def closed_by_result(pvalues, alpha) -> EbhResult:
    """closed_by with the full step-up result (size, threshold ladder)."""
    P = as_pvalues(pvalues)
    alpha = check_alpha(alpha)
    params = ByCalibratorParams.create(alpha, P.shape[0])
    return closed_ebh(by_calibrate_vector(P, params), alpha)
