import itertools

import numpy as np
import pytest

from closurefdr.bruteforce import max_topk_candidate_size
from closurefdr.core import DomainError, ErrorMetric
from closurefdr.ebh import (
    closed_ebh,
    closed_ebh_compound,
    closed_ebh_product,
    ebh,
    ebh_minimally_adaptive,
    fdr_hat,
    post_hoc_certificate,
)
from closurefdr.merging import (
    ArithmeticMeanCollection,
    CompoundCollection,
    ProductCollection,
)


class TestWorkedExample:
    """E = (60, 39, 11) at alpha = 0.05.

    Direct evaluation of the step-up definition gives two eBH rejections
    here (the second-largest value 39 clears the k = 2 threshold 30); the
    minimally adaptive variant also rejects two, and the closed scan
    rejects all three (singletons clear 20/3, pair means clear 40/3, the
    grand mean clears 20).
    """

    E = [60.0, 39.0, 11.0]

    def test_ebh_two_rejections(self):
        res = ebh(self.E, 0.05)
        assert res.k_star == 2
        assert res.discoveries.rejected == (1, 2)

    def test_minimally_adaptive_two_rejections(self):
        res = ebh_minimally_adaptive(self.E, 0.05)
        assert res.k_star == 2
        assert res.discoveries.rejected == (1, 2)

    def test_closed_rejects_all_three(self):
        res = closed_ebh(self.E, 0.05)
        assert res.k_star == 3
        assert res.discoveries.rejected == (1, 2, 3)

    def test_minimally_adaptive_gate_blocks_at_tighter_level(self):
        # grand mean 110/3 < 1/0.01
        res = ebh_minimally_adaptive(self.E, 0.01)
        assert res.k_star == 0
        assert res.discoveries.rejected == ()


def test_ebh_all_zero_rejects_nothing():
    assert ebh([0.0, 0.0, 0.0], 0.2).discoveries.rejected == ()


def test_ebh_single_hypothesis_at_threshold():
    assert ebh([10.0], 0.1).discoveries.rejected == (1,)
    assert ebh([9.999], 0.1).discoveries.rejected == ()


def test_minimally_adaptive_k1_falls_back_to_ebh():
    assert ebh_minimally_adaptive([10.0], 0.1).discoveries.rejected == (1,)


def test_minimally_adaptive_k2_boundary_equalities():
    # both at exactly 1/alpha: gate met with equality, threshold met
    res = ebh_minimally_adaptive([10.0, 10.0], 0.1)
    assert res.discoveries.rejected == (1, 2)


def test_closed_all_zero_rejects_nothing():
    assert closed_ebh([0.0] * 5, 0.1).discoveries.rejected == ()


def _random_evalues(rng, K):
    return rng.exponential(1.0, K) * float(rng.choice([0.5, 5.0, 50.0]))


def test_closed_matches_oracle_on_random_instances():
    rng = np.random.default_rng(40)
    for _ in range(250):
        K = int(rng.integers(3, 11))
        values = _random_evalues(rng, K)
        alpha = float(rng.choice([0.05, 0.1, 0.2]))
        fast = closed_ebh(values, alpha).k_star
        slow = max_topk_candidate_size(
            ArithmeticMeanCollection(values), ErrorMetric.fdp(), alpha, values)
        assert fast == slow, (values, alpha)


def test_domination_chain_on_random_instances():
    rng = np.random.default_rng(41)
    for _ in range(600):
        K = int(rng.integers(2, 51))
        values = _random_evalues(rng, K)
        alpha = float(rng.choice([0.05, 0.1, 0.2]))
        r_plain = set(ebh(values, alpha).discoveries.rejected)
        r_adaptive = set(ebh_minimally_adaptive(values, alpha).discoveries.rejected)
        r_closed = set(closed_ebh(values, alpha).discoveries.rejected)
        assert r_plain <= r_adaptive <= r_closed


def test_scaling_up_never_shrinks_discoveries():
    rng = np.random.default_rng(42)
    for _ in range(120):
        K = int(rng.integers(2, 20))
        values = _random_evalues(rng, K)
        alpha = 0.1
        for c in (1.0, 1.5, 2.0, 10.0):
            for proc in (ebh, ebh_minimally_adaptive, closed_ebh):
                small = set(proc(values, alpha).discoveries.rejected)
                large = set(proc(values * c, alpha).discoveries.rejected)
                assert small <= large, (proc.__name__, c)


def test_closed_permutation_equivariance():
    rng = np.random.default_rng(43)
    for _ in range(60):
        K = int(rng.integers(2, 15))
        values = rng.exponential(1.0, K) * 10  # continuous, ties have measure zero
        perm = rng.permutation(K)
        alpha = 0.1
        base = set(closed_ebh(values, alpha).discoveries.rejected)
        permuted = set(closed_ebh(values[perm], alpha).discoveries.rejected)
        relabeled = {int(np.nonzero(perm == (i - 1))[0][0]) + 1 for i in base}
        assert permuted == relabeled


def test_every_rejection_clears_singleton_floor():
    rng = np.random.default_rng(44)
    for _ in range(120):
        K = int(rng.integers(2, 25))
        values = _random_evalues(rng, K)
        alpha = float(rng.choice([0.05, 0.1, 0.2]))
        res = closed_ebh(values, alpha)
        if res.k_star:
            floor = 1.0 / (alpha * res.k_star)
            assert all(values[i - 1] >= floor for i in res.discoveries.rejected)


def test_fdr_hat_of_closed_result_within_level_and_maximal():
    rng = np.random.default_rng(45)
    for _ in range(150):
        K = int(rng.integers(2, 11))
        values = _random_evalues(rng, K)
        alpha = float(rng.choice([0.05, 0.1, 0.2]))
        k = closed_ebh(values, alpha).k_star
        if k:
            assert fdr_hat(values, k) <= alpha
        if k < K:
            # maximality: one more rejection would break the level
            bigger = max_topk_candidate_size(
                ArithmeticMeanCollection(values), ErrorMetric.fdp(), alpha, values)
            assert bigger == k
            assert fdr_hat(values, k + 1) > alpha


def test_fdr_hat_matches_exhaustive_max():
    values = [60.0, 39.0, 11.0]
    coll = ArithmeticMeanCollection(values)
    best = 0.0
    for size in (1, 2, 3):
        for A in itertools.combinations((1, 2, 3), size):
            e_val = coll.evaluate(set(A))
            realized = len(set(A) & {1, 2, 3}) / 3
            best = max(best, realized / e_val)
    assert fdr_hat(values, 3) == pytest.approx(best, rel=1e-14)


def test_fdr_hat_conventions():
    assert fdr_hat([1.0, 2.0], 0) == 0.0
    c = 7.0
    assert fdr_hat([c] * 5, 5) == pytest.approx(1.0 / c, rel=1e-14)
    with pytest.raises(DomainError):
        fdr_hat([1.0], 2)


class TestCompound:
    def test_single_huge_value(self):
        res = closed_ebh_compound([30.0, 0.0, 0.0], 0.1)
        assert res.discoveries.rejected == (1,)

    def test_all_zero(self):
        assert closed_ebh_compound([0.0, 0.0, 0.0], 0.1).discoveries.rejected == ()

    def test_contains_ebh_on_compound_vector(self):
        rng = np.random.default_rng(46)
        for _ in range(300):
            K = int(rng.integers(2, 11))
            values = rng.exponential(1.0, K) * float(rng.choice([1.0, 5.0, 20.0]))
            alpha = float(rng.choice([0.05, 0.1, 0.2]))
            plain = set(ebh(values, alpha).discoveries.rejected)
            closed = set(closed_ebh_compound(values, alpha).discoveries.rejected)
            assert plain <= closed

    def test_matches_oracle(self):
        rng = np.random.default_rng(47)
        for _ in range(150):
            K = int(rng.integers(2, 11))
            values = rng.exponential(1.0, K) * float(rng.choice([1.0, 20.0]))
            alpha = float(rng.choice([0.05, 0.1, 0.2]))
            fast = closed_ebh_compound(values, alpha).k_star
            slow = max_topk_candidate_size(
                CompoundCollection(values), ErrorMetric.fdp(), alpha, values)
            assert fast == slow


class TestProduct:
    def test_pair_of_25s(self):
        res = closed_ebh_product([25.0, 25.0], 0.1)
        assert res.discoveries.rejected == (1, 2)

    def test_any_zero_kills_every_candidate(self):
        assert closed_ebh_product([5.0, 0.0, 9.0], 0.1).discoveries.rejected == ()
        assert closed_ebh_product([0.0, 0.0], 0.1).discoveries.rejected == ()

    def test_matches_oracle(self):
        rng = np.random.default_rng(48)
        for _ in range(150):
            K = int(rng.integers(2, 9))
            values = rng.exponential(1.0, K) * float(rng.choice([0.5, 2.0, 10.0]))
            alpha = float(rng.choice([0.05, 0.1, 0.2]))
            fast = closed_ebh_product(values, alpha).k_star
            slow = max_topk_candidate_size(
                ProductCollection(values), ErrorMetric.fdp(), alpha, values)
            assert fast == slow, (values, alpha)


class TestPostHocCertificate:
    def test_worked_example(self):
        cert = post_hoc_certificate([60.0, 39.0, 11.0], [0.05], {3})
        assert cert.null_evalue == 11.0
        assert cert.max_ratio == pytest.approx((1.0 / 3.0) / 0.05, rel=1e-14)
        assert cert.max_ratio <= cert.null_evalue

    def test_all_zero_evalues(self):
        cert = post_hoc_certificate([0.0, 0.0], [0.05, 0.5], {1})
        assert cert.max_ratio == 0.0  # only the empty set is a candidate

    def test_empty_null_set_is_vacuous(self):
        cert = post_hoc_certificate([60.0, 39.0, 11.0], [0.1], set())
        assert cert.max_ratio == 0.0
        assert cert.null_evalue == np.inf

    def test_empty_grid_rejected(self):
        with pytest.raises(DomainError):
            post_hoc_certificate([1.0], [], {1})

    def test_deterministic_bound_on_random_instances(self):
        rng = np.random.default_rng(49)
        grid = np.linspace(0.01, 1.0, 20)
        for _ in range(100):
            K = int(rng.integers(2, 15))
            values = rng.exponential(1.0, K) * float(rng.choice([1.0, 10.0]))
            n_null = int(rng.integers(1, K + 1))
            null = set(rng.choice(K, n_null, replace=False) + 1)
            cert = post_hoc_certificate(values, grid, null)
            assert cert.max_ratio <= cert.null_evalue
