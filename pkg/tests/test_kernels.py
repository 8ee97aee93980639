"""Backend equivalence: the numba scan and the numpy fallback must make
identical decisions cell for cell, since both consume the same prefix-sum
arrays and evaluate the same float expressions."""

import numpy as np
import pytest

from closurefdr import kernels
from closurefdr.core import ConfigurationError
from closurefdr.merging import ascending_prefix

pytestmark = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba unavailable")

METRICS = [
    (kernels.METRIC_FDP, 0.0),
    (kernels.METRIC_KFWER, 1.0),
    (kernels.METRIC_KFWER, 2.0),
    (kernels.METRIC_PFER, 0.0),
    (kernels.METRIC_FDX, 0.5),
]


def _random_instance(rng):
    K = int(rng.integers(2, 40))
    values = rng.exponential(1.0, K) * float(rng.choice([0.2, 1.0, 20.0]))
    alpha = float(rng.choice([0.05, 0.1, 0.2, 0.5]))
    return values, alpha


def test_scan_backends_agree():
    rng = np.random.default_rng(31)
    for _ in range(120):
        values, alpha = _random_instance(rng)
        asc, prefix = ascending_prefix(values)
        for code, param in METRICS:
            got_nb = kernels._scan_numba(asc, prefix, alpha, 0, code, param)
            got_np = kernels._scan_numpy(asc, prefix, alpha, 0, code, param)
            assert got_nb == got_np, (values, alpha, code, param)


def test_mask_backends_agree():
    rng = np.random.default_rng(32)
    for _ in range(60):
        values, alpha = _random_instance(rng)
        asc, prefix = ascending_prefix(values)
        for code, param in METRICS:
            mask_nb = np.asarray(kernels._mask_numba(asc, prefix, alpha, code, param))
            mask_np = kernels._mask_numpy(asc, prefix, alpha, code, param)
            np.testing.assert_array_equal(mask_nb, mask_np)


def test_env_flag_selects_backend(monkeypatch):
    monkeypatch.setenv("CLOSURE_FDR_BACKEND", "numpy")
    assert kernels.active_backend() == "numpy"
    monkeypatch.setenv("CLOSURE_FDR_BACKEND", "numba")
    assert kernels.active_backend() == "numba"
    monkeypatch.delenv("CLOSURE_FDR_BACKEND")
    assert kernels.active_backend() == "numba"
    monkeypatch.setenv("CLOSURE_FDR_BACKEND", "cuda")
    with pytest.raises(ConfigurationError):
        kernels.active_backend()


def test_scan_respects_lower_anchor():
    values = np.array([50.0, 40.0, 1.0, 1.0])
    asc, prefix = ascending_prefix(values)
    full = kernels.scan_topk(asc, prefix, 0.1, k_lo=0)
    anchored = kernels.scan_topk(asc, prefix, 0.1, k_lo=full)
    assert anchored == full  # nothing above the anchor, falls back to it


def test_worst_ratio_max_zero_evalues_is_inf():
    values = np.zeros(4)
    asc, prefix = ascending_prefix(values)
    assert kernels.worst_ratio_max(asc, prefix, 2) == np.inf


def test_worst_ratio_max_empty_set_is_zero():
    values = np.array([1.0, 2.0])
    asc, prefix = ascending_prefix(values)
    assert kernels.worst_ratio_max(asc, prefix, 0) == 0.0
