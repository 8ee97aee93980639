"""Shared domain types: e-value vectors, discovery sets, error metrics.

Hypothesis indices are 1-based everywhere in the public API (matching the
usual multiple-testing convention); arrays are 0-based internally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """Input violates a documented precondition."""


class CapacityError(RuntimeError):
    """Requested an exhaustive path beyond its subset-enumeration limit."""


class ConfigurationError(ValueError):
    """Inconsistent or incomplete configuration."""


class InvariantViolation(RuntimeError):
    """A hard internal guarantee failed; indicates a bug, never noise."""


def check_alpha(alpha) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    return alpha


def as_evalues(values) -> np.ndarray:
    """Validate and return a 1-d float64 vector of e-values (>= 0, finite)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise DomainError("e-value input must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(arr)):
        raise DomainError("e-values must be finite")
    if np.any(arr < 0.0):
        raise DomainError("e-values must be nonnegative")
    return arr


def as_pvalues(values) -> np.ndarray:
    """Validate and return a 1-d float64 vector of p-values in [0, 1]."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise DomainError("p-value input must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(arr)):
        raise DomainError("p-values must be finite")
    if np.any((arr < 0.0) | (arr > 1.0)):
        raise DomainError("p-values must lie in [0, 1]")
    return arr


def validate_subset(indices, K: int) -> frozenset:
    """Validate 1-based hypothesis indices against [1, K]."""
    subset = frozenset(int(i) for i in indices)
    for i in subset:
        if not 1 <= i <= K:
            raise DomainError(f"hypothesis index {i} outside [1, {K}]")
    return subset


@dataclass(frozen=True)
class DiscoverySet:
    """A rejection set R: sorted 1-based indices, its size, and an optional
    self-consistency diagnostic (max_A FDP_A(R) / E_A under the mean rule)."""

    rejected: tuple
    k: int
    fdr_hat: float | None = None

    @classmethod
    def from_indices(cls, indices, fdr_hat=None) -> "DiscoverySet":
        rej = tuple(sorted(int(i) for i in set(indices)))
        return cls(rejected=rej, k=len(rej), fdr_hat=fdr_hat)

    def as_set(self) -> frozenset:
        return frozenset(self.rejected)

    def __contains__(self, i) -> bool:
        return i in self.rejected


EMPTY_DISCOVERY = DiscoverySet(rejected=(), k=0, fdr_hat=None)


@dataclass(frozen=True)
class ErrorMetric:
    """One of the supported multiple-testing error metrics.

    kind is "fdp", "kfwer", "pfer", or "fdx"; k parametrizes k-FWER and
    gamma parametrizes FDX.
    """

    kind: str
    k: int | None = None
    gamma: float | None = None

    @classmethod
    def fdp(cls) -> "ErrorMetric":
        return cls(kind="fdp")

    @classmethod
    def kfwer(cls, k: int) -> "ErrorMetric":
        k = int(k)
        if k < 1:
            raise DomainError(f"k-FWER order must be >= 1, got {k}")
        return cls(kind="kfwer", k=k)

    @classmethod
    def pfer(cls) -> "ErrorMetric":
        return cls(kind="pfer")

    @classmethod
    def fdx(cls, gamma: float) -> "ErrorMetric":
        gamma = float(gamma)
        if not (0.0 < gamma < 1.0):
            raise DomainError(f"FDX threshold must lie in (0, 1), got {gamma}")
        return cls(kind="fdx", gamma=gamma)

    def validate_for(self, K: int) -> None:
        if self.kind == "kfwer" and not 1 <= self.k <= K:
            raise DomainError(f"k-FWER order {self.k} outside [1, {K}]")

    def label(self) -> str:
        if self.kind == "kfwer":
            return f"kfwer:{self.k}"
        if self.kind == "fdx":
            return f"fdx:{self.gamma:g}"
        return self.kind


def fdp(A, R, K: int) -> float:
    """False discovery proportion of R when A is the true null set:
    |R intersect A| / max(|R|, 1)."""
    A = validate_subset(A, K)
    R = R.as_set() if isinstance(R, DiscoverySet) else validate_subset(R, K)
    if not R:
        return 0.0
    return len(R & A) / len(R)


def metric_value(metric: ErrorMetric, A, R, K: int) -> float:
    """Realized value of an error metric for null set A and rejections R."""
    A = validate_subset(A, K)
    R = R.as_set() if isinstance(R, DiscoverySet) else validate_subset(R, K)
    metric.validate_for(K)
    n_false = len(R & A)
    if metric.kind == "fdp":
        return n_false / len(R) if R else 0.0
    if metric.kind == "kfwer":
        return 1.0 if n_false >= metric.k else 0.0
    if metric.kind == "pfer":
        return float(n_false)
    if metric.kind == "fdx":
        realized = n_false / len(R) if R else 0.0
        return 1.0 if realized > metric.gamma else 0.0
    raise DomainError(f"unknown metric kind {metric.kind!r}")


def fdp_tpr(null_set, R, K: int) -> tuple:
    """Realized (FDP, TPR) of R against a known null set.

    TPR counts rejected non-nulls over all non-nulls, with an empty
    non-null set giving 0 by the max(., 1) guard.
    """
    null_set = validate_subset(null_set, K)
    R = R.as_set() if isinstance(R, DiscoverySet) else validate_subset(R, K)
    realized_fdp = len(R & null_set) / max(len(R), 1)
    non_null = K - len(null_set)
    tpr = (len(R) - len(R & null_set)) / max(non_null, 1)
    return realized_fdp, tpr


def descending_order(values: np.ndarray) -> np.ndarray:
    """0-based index order by descending value, ties by ascending index.

    This is the single tie-break used by every procedure in the package,
    so discovery sets of nested sizes are literal set inclusions.
    """
    return np.argsort(-np.asarray(values, dtype=np.float64), kind="stable")


def top_k_indices(values: np.ndarray, k: int) -> tuple:
    """1-based indices of the k largest values under the shared tie-break."""
    if k == 0:
        return ()
    order = descending_order(values)
    return tuple(sorted(int(i) + 1 for i in order[:k]))
