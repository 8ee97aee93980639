import numpy as np
import pytest

from closurefdr.core import ConfigurationError
from closurefdr.ebh import closed_ebh
from closurefdr import sim
from closurefdr.sim import (
    DominationError,
    SimConfig,
    gen_independent,
    gen_toeplitz,
    run_experiment,
    toeplitz_covariance,
    write_aggregate_csv,
    write_trials_csv,
)


def test_toeplitz_covariance_entries():
    cov = toeplitz_covariance(6)
    assert cov[0, 0] == 1.0
    assert cov[2, 3] == pytest.approx(-np.exp(-0.1) / 5.0, rel=1e-14)
    assert cov[1, 3] == pytest.approx(np.exp(-0.2) / 5.0, rel=1e-14)
    np.testing.assert_allclose(cov, cov.T)


def test_toeplitz_positive_definite_at_default_scale():
    smallest = float(np.min(np.linalg.eigvalsh(toeplitz_covariance(100))))
    assert smallest > 0.0


def test_toeplitz_build_error_reports_smallest_eigenvalue():
    cfg = SimConfig(K=5, trials=1, dependence="toeplitz-alt", scale=1.2,
                    procedures=("by",))
    with pytest.raises(ConfigurationError, match="smallest eigenvalue"):
        gen_toeplitz(cfg, 0)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        SimConfig(K=0)
    with pytest.raises(ConfigurationError):
        SimConfig(pi0=1.5)
    with pytest.raises(ConfigurationError):
        SimConfig(trials=0)
    with pytest.raises(ConfigurationError):
        SimConfig(dependence="clusters")
    with pytest.raises(ConfigurationError):
        SimConfig(procedures=("by",))  # p-value method under independence
    with pytest.raises(ConfigurationError):
        SimConfig(procedures=())


def test_gen_independent_layout_and_tilt():
    cfg = SimConfig(K=10, pi0=0.5, mu=3.0, trials=1, seed=7)
    evalues, null_set = gen_independent(cfg, 0)
    assert null_set == frozenset(range(1, 6))
    assert evalues.shape == (10,)
    assert np.all(evalues > 0)


def test_gen_independent_unit_mean_under_global_null():
    # E exp(lam X - lam^2/2) = 1 for standard normal X
    cfg = SimConfig(K=1_000_000, pi0=1.0, mu=3.0, trials=1, seed=8)
    evalues, _ = gen_independent(cfg, 0)
    se = float(np.std(evalues, ddof=1) / np.sqrt(evalues.size))
    assert abs(float(np.mean(evalues)) - 1.0) <= 3.0 * se


def test_gen_independent_bit_identical_given_seed():
    cfg = SimConfig(K=50, pi0=0.9, trials=3, seed=123)
    a, _ = gen_independent(cfg, 2)
    b, _ = gen_independent(cfg, 2)
    np.testing.assert_array_equal(a, b)
    c, _ = gen_independent(cfg, 1)
    assert not np.array_equal(a, c)


def test_gen_toeplitz_pvalue_of_zero_draw():
    from scipy.special import ndtr
    assert ndtr(-0.0) == 0.5  # X = 0 maps to p = 1/2


def test_run_experiment_single_trial_aggregates_equal_trial():
    cfg = SimConfig(K=30, pi0=0.8, mu=3.0, trials=1, seed=5)
    res = run_experiment(cfg)
    assert len(res.records) == 3
    for row in res.aggregates:
        rec = [r for r in res.records if r.method == row.method][0]
        assert row.mean_fdr == rec.fdp
        assert row.mean_tpr == rec.tpr
        assert row.se_fdr == 0.0 and row.se_tpr == 0.0
        assert row.n == 1


def test_run_experiment_reproducible():
    cfg = SimConfig(K=40, pi0=0.7, mu=3.0, trials=30, seed=11)
    assert run_experiment(cfg).records == run_experiment(cfg).records


def test_run_experiment_null_only_controls_fdr():
    # mu = 0 makes alternatives indistinguishable from nulls
    cfg = SimConfig(K=25, pi0=0.8, mu=0.0, lam=3.0, alpha=0.1, trials=300, seed=12)
    res = run_experiment(cfg)
    for row in res.aggregates:
        assert row.mean_fdr <= cfg.alpha + 3.0 * max(row.se_fdr, 1e-3)


def test_parallel_matches_sequential(monkeypatch):
    cfg = SimConfig(K=25, pi0=0.8, mu=3.0, trials=16, seed=13)
    sequential = run_experiment(cfg)
    monkeypatch.setenv("CLOSURE_FDR_THREADS", "2")
    parallel = run_experiment(cfg)
    assert sequential.records == parallel.records
    assert sequential.aggregates == parallel.aggregates


def test_thread_env_validation(monkeypatch):
    monkeypatch.setenv("CLOSURE_FDR_THREADS", "zero")
    with pytest.raises(ConfigurationError):
        run_experiment(SimConfig(K=5, trials=1))
    monkeypatch.setenv("CLOSURE_FDR_THREADS", "0")
    with pytest.raises(ConfigurationError):
        run_experiment(SimConfig(K=5, trials=1))


def test_domination_violation_aborts_with_payload(monkeypatch):
    cfg = SimConfig(K=10, pi0=0.5, mu=3.0, trials=2, seed=3)

    def broken_sets(cfg_, data):
        from closurefdr.core import DiscoverySet
        return {"ebh": DiscoverySet.from_indices([1, 2]),
                "ebhm": DiscoverySet.from_indices([2]),
                "cebh": DiscoverySet.from_indices([1, 2, 3])}

    monkeypatch.setattr(sim, "_procedure_sets", broken_sets)
    with pytest.raises(DominationError) as err:
        run_experiment(cfg)
    assert err.value.payload["pair"] == ["ebh", "ebhm"]
    assert err.value.payload["trial"] == 0


def test_trial_fdp_tpr_consistency():
    cfg = SimConfig(K=60, pi0=0.9, mu=3.0, trials=10, seed=21)
    res = run_experiment(cfg)
    for rec in res.records:
        assert 0.0 <= rec.fdp <= 1.0
        assert 0.0 <= rec.tpr <= 1.0
        evalues, null_set = gen_independent(cfg, rec.trial)
        if rec.method == "cebh":
            dset = closed_ebh(evalues, cfg.alpha).discoveries
            assert dset.k == rec.k


def test_csv_schema_and_determinism(tmp_path):
    cfg = SimConfig(K=20, pi0=0.5, mu=3.0, trials=4, seed=2)
    res = run_experiment(cfg)
    t1, a1 = tmp_path / "t1.csv", tmp_path / "a1.csv"
    t2, a2 = tmp_path / "t2.csv", tmp_path / "a2.csv"
    write_trials_csv(t1, [res])
    write_aggregate_csv(a1, [res])
    write_trials_csv(t2, [run_experiment(cfg)])
    write_aggregate_csv(a2, [run_experiment(cfg)])
    assert t1.read_bytes() == t2.read_bytes()
    assert a1.read_bytes() == a2.read_bytes()
    lines = t1.read_text().splitlines()
    assert lines[0] == "method,pi0,mu,alpha,dependence,trial,k,fdp,tpr"
    assert len(lines) == 1 + 4 * 3
    assert b"\r" not in t1.read_bytes()
    # shortest round-trip formatting: parsing back gives identical doubles
    for line in lines[1:]:
        cells = line.split(",")
        rec = [r for r in res.records
               if r.method == cells[0] and r.trial == int(cells[5])][0]
        assert float(cells[7]) == rec.fdp
        assert float(cells[8]) == rec.tpr
    agg_lines = a1.read_text().splitlines()
    assert agg_lines[0] == "method,pi0,mu,alpha,dependence,mean_fdr,se_fdr,mean_tpr,se_tpr,n"


def test_null_prefix_layout_is_immaterial_for_power():
    # procedures are permutation equivariant, so relabeling hypotheses
    # permutes the discovery set and leaves FDP/TPR untouched
    cfg = SimConfig(K=15, pi0=0.6, mu=3.0, trials=1, seed=30)
    evalues, null_set = gen_independent(cfg, 0)
    rng = np.random.default_rng(31)
    perm = rng.permutation(cfg.K)
    permuted = evalues[perm]
    base = set(closed_ebh(evalues, cfg.alpha).discoveries.rejected)
    moved = set(closed_ebh(permuted, cfg.alpha).discoveries.rejected)
    relabeled = {int(np.nonzero(perm == (i - 1))[0][0]) + 1 for i in base}
    assert moved == relabeled
