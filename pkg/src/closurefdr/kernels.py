"""Hot inner loops for the closed step-up scans.

The closed procedures decide, for each candidate size k, whether the top-k
rejection set survives every worst-case null set. For the mean rule that
is a triple loop over (k, r, m) cells - O(K^3) worst case with O(1) work
per cell - and dominates runtime at large K, so it is compiled with numba
by default. Set CLOSURE_FDR_BACKEND=numpy to force the pure-numpy twin
(identical decisions cell for cell; see benchmarks/bench_scan.py for the
speed comparison), or CLOSURE_FDR_BACKEND=numba to fail loudly when numba
is unavailable.

Metric codes cover the error metrics whose per-cell thresholds depend on
the overlap r and candidate size k only: FDP uses (r/k)/alpha, k-FWER and
FDX use 1/alpha on their binding rows, PFER uses r/alpha.
"""

from __future__ import annotations

import os

import numpy as np

from .core import ConfigurationError

METRIC_FDP = 0
METRIC_KFWER = 1
METRIC_PFER = 2
METRIC_FDX = 3

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False


def active_backend() -> str:
    env = os.environ.get("CLOSURE_FDR_BACKEND", "").strip().lower()
    if env not in ("", "numba", "numpy"):
        raise ConfigurationError(
            f"CLOSURE_FDR_BACKEND must be 'numba' or 'numpy', got {env!r}"
        )
    if env == "numpy":
        return "numpy"
    if env == "numba" and not HAVE_NUMBA:
        raise ConfigurationError("CLOSURE_FDR_BACKEND=numba but numba is not importable")
    return "numba" if HAVE_NUMBA else "numpy"


def _row_threshold_numpy(r: np.ndarray, k: int, alpha: float,
                         metric_code: int, param: float) -> np.ndarray:
    if metric_code == METRIC_FDP:
        return (r / k) / alpha
    if metric_code == METRIC_KFWER:
        return np.where(r >= param, 1.0 / alpha, -np.inf)
    if metric_code == METRIC_PFER:
        return r / alpha
    if metric_code == METRIC_FDX:
        return np.where((r / k) > param, 1.0 / alpha, -np.inf)
    raise ConfigurationError(f"unknown metric code {metric_code}")


def _k_ok_numpy(e_asc, prefix, alpha, k, metric_code, param) -> bool:
    K = e_asc.shape[0]
    base = K - k
    r = np.arange(1, k + 1)
    thr = _row_threshold_numpy(r, k, alpha, metric_code, param)
    s_top = prefix[base + r] - prefix[base]
    j = np.arange(0, K - k + 1)
    m = r[:, None] + j[None, :]
    cells = (s_top[:, None] + prefix[j][None, :]) / m
    return not np.any(thr[:, None] > cells)


def _scan_numpy(e_asc, prefix, alpha, k_lo, metric_code, param) -> int:
    K = e_asc.shape[0]
    for k in range(K, k_lo, -1):
        if _k_ok_numpy(e_asc, prefix, alpha, k, metric_code, param):
            return k
    return k_lo


def _mask_numpy(e_asc, prefix, alpha, metric_code, param) -> np.ndarray:
    K = e_asc.shape[0]
    out = np.zeros(K + 1, dtype=np.bool_)
    out[0] = True
    for k in range(1, K + 1):
        out[k] = _k_ok_numpy(e_asc, prefix, alpha, k, metric_code, param)
    return out


if HAVE_NUMBA:

    @njit(cache=True)
    def _k_ok_numba(e_asc, prefix, alpha, k, metric_code, param):  # pragma: no cover
        K = e_asc.shape[0]
        base = K - k
        s_base = prefix[base]
        jmax = K - k
        for r in range(1, k + 1):
            if metric_code == METRIC_FDP:
                thr = (r / k) / alpha
            elif metric_code == METRIC_KFWER:
                if r < param:
                    continue
                thr = 1.0 / alpha
            elif metric_code == METRIC_PFER:
                thr = r / alpha
            else:
                if not (r / k) > param:
                    continue
                thr = 1.0 / alpha
            s_top = prefix[base + r] - s_base
            for j in range(jmax + 1):
                if thr > (s_top + prefix[j]) / (r + j):
                    return False
        return True

    @njit(cache=True)
    def _scan_numba(e_asc, prefix, alpha, k_lo, metric_code, param):  # pragma: no cover
        K = e_asc.shape[0]
        for k in range(K, k_lo, -1):
            if _k_ok_numba(e_asc, prefix, alpha, k, metric_code, param):
                return k
        return k_lo

    @njit(cache=True)
    def _mask_numba(e_asc, prefix, alpha, metric_code, param):  # pragma: no cover
        K = e_asc.shape[0]
        out = np.zeros(K + 1, dtype=np.bool_)
        out[0] = True
        for k in range(1, K + 1):
            out[k] = _k_ok_numba(e_asc, prefix, alpha, k, metric_code, param)
        return out


def scan_topk(e_asc: np.ndarray, prefix: np.ndarray, alpha: float, k_lo: int = 0,
              metric_code: int = METRIC_FDP, param: float = 0.0) -> int:
    """Largest k in (k_lo, K] whose top-k set passes every (r, m) cell;
    returns k_lo when none does."""
    if active_backend() == "numba":
        return int(_scan_numba(e_asc, prefix, alpha, k_lo, metric_code, param))
    return _scan_numpy(e_asc, prefix, alpha, k_lo, metric_code, param)


def accepted_topk_mask(e_asc: np.ndarray, prefix: np.ndarray, alpha: float,
                       metric_code: int = METRIC_FDP, param: float = 0.0) -> np.ndarray:
    """Boolean mask over k = 0..K: is the top-k set a candidate at this level."""
    if active_backend() == "numba":
        return np.asarray(_mask_numba(e_asc, prefix, alpha, metric_code, param))
    return _mask_numpy(e_asc, prefix, alpha, metric_code, param)


def worst_ratio_max(e_asc: np.ndarray, prefix: np.ndarray, k: int) -> float:
    """max over (r, m) of (r/k) / E_(k,r,m) for the top-k set; inf when a
    worst-case mean is exactly zero."""
    if k == 0:
        return 0.0
    K = e_asc.shape[0]
    base = K - k
    r = np.arange(1, k + 1)
    s_top = prefix[base + r] - prefix[base]
    j = np.arange(0, K - k + 1)
    m = r[:, None] + j[None, :]
    cells = (s_top[:, None] + prefix[j][None, :]) / m
    with np.errstate(divide="ignore"):
        ratios = (r / k)[:, None] / cells
    return float(np.max(ratios))


def warm_up() -> None:
    """Trigger jit compilation on a tiny instance (no-op on the numpy path)."""
    e = np.array([1.0, 2.0, 3.0])
    prefix = np.concatenate(([0.0], np.cumsum(e)))
    scan_topk(e, prefix, 0.5, 0, METRIC_FDP, 0.0)
    accepted_topk_mask(e, prefix, 0.5, METRIC_FDP, 0.0)
