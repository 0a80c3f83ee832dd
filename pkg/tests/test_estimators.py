import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mslik import estimators as est
from mslik.errors import InvalidArgument, InvalidConfig, ResourceLimit
from mslik.estimators import (
    PenaltyConfig,
    QuantizationGrid,
    brute_force_oracle,
    count_runs,
    estimate,
    estimate_rdp,
    estimate_rp,
    estimate_threshold,
    objective,
    quantized_candidates,
    quantized_penalized_mle,
    segmentation_dp,
)
from mslik.models import Gaussian, Multinomial, Poisson, loglik_direct
from mslik.partition import Interval, dyadic_crp, haar_coefficient, haar_vector
from mslik.verify import random_problem

MODELS = ["gaussian", "poisson", "multinomial"]
FAST = {"T": estimate_threshold, "RDP": estimate_rdp, "RP": estimate_rp}


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * (1 + abs(b))


def segmentation_objective(x, model, lam, bounds):
    """Penalized objective of the piecewise-constant fit on a segmentation, from scratch."""
    theta = np.empty(x.size)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        s = x[lo:hi].sum()
        theta[lo:hi] = s / ((hi - lo) * model.n_total) if isinstance(model, Multinomial) else s / (hi - lo)
    return -loglik_direct(x, theta, model) + 2 * lam * (len(bounds) - 2)


class TestPenalty:
    def test_natural_log(self):
        assert PenaltyConfig(1.5, 4).lam == pytest.approx(1.5 * math.log(4))

    @pytest.mark.parametrize("gamma,n,ok", [(1.5, 3, True), (1.49, 8, False), (2.0, 2, False)])
    def test_theory_flag(self, gamma, n, ok):
        assert PenaltyConfig(gamma, n).theory_ok is ok

    def test_negative_gamma(self):
        with pytest.raises(InvalidArgument):
            PenaltyConfig(-0.1, 4)

    def test_mismatched_size(self):
        with pytest.raises(InvalidArgument):
            estimate_rp([1.0, 2.0, 3.0], Poisson(), PenaltyConfig(1.0, 4))


class TestObjective:
    def test_no_penalty(self):
        x, th = np.array([1.0, 2, 0, 5]), np.array([1.0, 1.5, 0.5, 4])
        assert objective(x, th, dyadic_crp(4), Poisson(), 0.0) == pytest.approx(-loglik_direct(x, th, Poisson()))

    def test_constant_has_no_penalty(self):
        x, th = np.array([1.0, 2, 0, 5]), np.full(4, 2.0)
        assert objective(x, th, dyadic_crp(4), Poisson(), 5.0) == pytest.approx(-loglik_direct(x, th, Poisson()))

    def test_one_nontrivial(self):
        x = th = np.array([0.0, 0, 8, 8])
        want = -loglik_direct(x, th, Poisson()) + 2 * 1.5 * math.log(4)
        assert objective(x, th, dyadic_crp(4), Poisson(), 1.5) == pytest.approx(want)


class TestThreshold:
    @pytest.mark.parametrize("model", [Gaussian(1.0), Poisson()])
    def test_constant_kills_everything(self, model):
        r = estimate_threshold(np.full(8, 3.0), model, 1.5)
        assert r.kept == []
        np.testing.assert_allclose(r.theta_hat, 3.0)

    def test_gaussian_example(self):
        r = estimate_threshold(np.array([0.0, 0, 10, 10]), Gaussian(1.0), 1.5)
        assert [(iv, s) for iv, s, _ in r.kept] == [(Interval(0, 4), 2)]
        np.testing.assert_allclose(r.theta_hat, [0, 0, 10, 10])
        assert 2 * math.sqrt(1.5 * math.log(4)) == pytest.approx(2.88405, abs=1e-5)

    def test_poisson_example(self):
        x = np.array([0.0, 0, 8, 8])
        r = estimate_threshold(x, Poisson(), 1.5)
        assert [(iv, s) for iv, s, _ in r.kept] == [(Interval(0, 4), 2)]
        np.testing.assert_allclose(r.theta_hat, x)
        costs = {row["start"]: row for row in r.costs.rows() if row["end"] - row["start"] == 4}
        assert costs[0]["kill_cost"] - costs[0]["keep_data_cost"] == pytest.approx(16 * math.log(2))

    def test_strict_threshold(self):
        # gap exactly equal to 2 lambda is killed
        x = np.array([0.0, 2.0])
        model = Gaussian(1.0)
        gap = haar_coefficient(x, haar_vector((0, 2), 1)) ** 2 / 2
        gamma = gap / (2 * math.log(2))
        assert estimate_threshold(x, model, gamma).kept == []
        assert len(estimate_threshold(x, model, gamma * (1 - 1e-9)).kept) == 1

    def test_rejects_non_dyadic(self):
        with pytest.raises(InvalidArgument, match="pad"):
            estimate_threshold(np.ones(6), Poisson(), 1.0)

    @settings(max_examples=40)
    @given(st.integers(1, 7), st.floats(0.3, 3.0), st.floats(0.0, 3.0), st.integers(0, 2**32 - 1))
    def test_hard_threshold_equivalence(self, k, sigma, gamma, seed):
        n = 2**k
        x = np.random.default_rng(seed).normal(0, 3 * sigma, n)
        r = estimate_threshold(x, Gaussian(sigma), gamma)
        t = 2 * sigma * math.sqrt(gamma * math.log(n))
        want = {(a, b) for a, b, s in dyadic_crp(n).iter_nodes() if abs(haar_coefficient(x, haar_vector((a, b), s))) > t}
        assert {iv.key() for iv, _, _ in r.kept} == want


class TestRDP:
    def test_constant(self):
        r = estimate_rdp(np.full(8, 2.0), Poisson(), 1.5)
        assert r.partition == [Interval(0, 8)]

    def test_poisson_example(self):
        r = estimate_rdp(np.array([0.0, 0, 8, 8]), Poisson(), 1.5)
        assert r.partition == [Interval(0, 2), Interval(2, 4)]
        np.testing.assert_allclose(r.theta_hat, [0, 0, 8, 8])
        assert [iv for iv, _, _ in r.kept] == [Interval(0, 4)]

    def test_blocked_sweep_matches_single_pass(self, monkeypatch, rng):
        x = rng.poisson(rng.uniform(0, 6, 256)).astype(float)
        whole = [f(x, Poisson(), 0.7) for f in (estimate_rdp, estimate_threshold)]
        monkeypatch.setattr(est, "BLOCK_LEAVES", 16)
        blocked = [f(x, Poisson(), 0.7) for f in (estimate_rdp, estimate_threshold)]
        for a, b in zip(whole, blocked):
            assert a.objective == b.objective
            np.testing.assert_array_equal(a.theta_hat, b.theta_hat)
            np.testing.assert_array_equal(a.costs.kill_cost, b.costs.kill_cost)


class TestRP:
    def test_single_cell(self):
        r = estimate_rp(np.array([5.0]), Poisson(), 1.5)
        np.testing.assert_array_equal(r.theta_hat, [5.0])
        assert r.kept == []

    def test_non_dyadic_split(self):
        x = np.array([9.0, 9, 9, 0])
        rp, rdp = estimate_rp(x, Poisson(), 1.0), estimate_rdp(x, Poisson(), 1.0)
        assert rp.partition == [Interval(0, 3), Interval(3, 4)]
        assert rp.objective < rdp.objective
        assert close(rp.objective, segmentation_dp(x, Poisson(), 1.0).objective)

    def test_accompanying_crp(self, rng):
        x = rng.poisson(4, 11).astype(float)
        r = estimate_rp(x, Poisson(), 0.5)
        assert r.tree.is_complete
        nodes = set(r.tree.iter_nodes())
        assert all((iv.start, iv.end, s) in nodes for iv, s, _ in r.kept)
        assert sum(r.costs.kept) == len(r.kept)

    def test_exhaustive_segmentations(self):
        x = np.array([9.0, 9, 9, 0])
        lam = math.log(4)
        best = min(
            segmentation_objective(x, Poisson(), lam, [0, *cuts, 4])
            for k in range(4)
            for cuts in itertools.combinations(range(1, 4), k)
        )
        assert close(segmentation_dp(x, Poisson(), 1.0).objective, best)

    @settings(max_examples=60, deadline=None)
    @given(st.sampled_from(MODELS), st.integers(1, 30), st.floats(0, 3), st.integers(0, 2**32 - 1))
    def test_matches_segmentation_dp(self, name, n, gamma, seed):
        model, _, x = random_problem(name, n, np.random.default_rng(seed))
        assert close(estimate_rp(x, model, gamma).objective, segmentation_dp(x, model, gamma).objective)

    def test_ties_pick_smallest_split(self):
        # symmetric data: splits at 1 and 3 give equal objective
        x = np.array([0.0, 5, 5, 0])
        r = estimate_rp(x, Poisson(), 0.0)
        assert r.kept[0][1] == 1


class TestSegmentation:
    def test_single_cell(self):
        r = segmentation_dp(np.array([2.0]), Gaussian(1.0), 1.0)
        assert r.partition == [Interval(0, 1)]

    def test_huge_penalty(self):
        r = segmentation_dp(np.array([0.0, 40, 0, 40]), Poisson(), 1e6)
        assert r.partition == [Interval(0, 4)]
        np.testing.assert_allclose(r.theta_hat, 20.0)

    def test_non_dyadic_cut(self):
        r = segmentation_dp(np.array([9.0, 9, 9, 0]), Poisson(), 1.0)
        assert r.partition == [Interval(0, 3), Interval(3, 4)]


class TestBruteForce:
    def test_counts(self):
        assert len(dyadic_crp(4).all_prunings()) == 5
        assert sum(1 for k in range(4) for _ in itertools.combinations(range(1, 4), k)) == 8

    @pytest.mark.parametrize("family,n", [("T", 16), ("RP", 16), ("RDP", 32)])
    def test_caps(self, family, n):
        with pytest.raises(ResourceLimit):
            brute_force_oracle(np.ones(n), Poisson(), 1.0, family)

    def test_unknown_family(self):
        with pytest.raises(InvalidArgument):
            brute_force_oracle(np.ones(2), Poisson(), 1.0, "XYZ")

    @pytest.mark.parametrize("name", MODELS)
    @pytest.mark.parametrize("family", ["T", "RDP", "RP"])
    def test_equivalence(self, name, family, rng):
        for _ in range(15):
            model, _, x = random_problem(name, 8, rng)
            gamma = float(rng.uniform(0, 2.5))
            assert close(FAST[family](x, model, gamma).objective, brute_force_oracle(x, model, gamma, family).objective)

    def test_rdp_oracle_at_sixteen(self, rng):
        x = rng.poisson(rng.uniform(0, 5, 16)).astype(float)
        assert close(estimate_rdp(x, Poisson(), 1.0).objective, brute_force_oracle(x, Poisson(), 1.0, "RDP").objective)


class TestResultInvariants:
    @settings(max_examples=60, deadline=None)
    @given(st.sampled_from(MODELS), st.integers(0, 6), st.floats(0, 3), st.integers(0, 2**32 - 1))
    def test_objective_matches_fit(self, name, k, gamma, seed):
        model, _, x = random_problem(name, 2**k, np.random.default_rng(seed))
        for f in FAST.values():
            r = f(x, model, gamma)
            want = -loglik_direct(x, r.theta_hat, model) + 2 * r.lam * len(r.kept)
            assert close(r.objective, want)
            if isinstance(model, Multinomial):
                assert abs(r.theta_hat.sum() - 1) < 1e-9 and np.all(r.theta_hat >= 0)
            if isinstance(model, Poisson):
                assert np.all(r.theta_hat >= 0)

    @settings(max_examples=40, deadline=None)
    @given(st.sampled_from(MODELS), st.integers(1, 6), st.floats(0, 3), st.integers(0, 2**32 - 1))
    def test_hereditary(self, name, k, gamma, seed):
        model, _, x = random_problem(name, 2**k, np.random.default_rng(seed))
        n = x.size
        for f in (estimate_rdp, estimate_rp):
            r = f(x, model, gamma)
            kept = {(iv.start, iv.end) for iv, _, _ in r.kept}
            children = {}
            for iv, s, _ in r.kept:
                children[(iv.start, s)] = children[(s, iv.end)] = (iv.start, iv.end)
            for node in kept:
                assert node == (0, n) or children.get(node) in kept

    @settings(max_examples=60, deadline=None)
    @given(st.sampled_from(MODELS), st.integers(0, 6), st.floats(0, 4), st.integers(0, 2**32 - 1))
    def test_nesting(self, name, k, gamma, seed):
        model, _, x = random_problem(name, 2**k, np.random.default_rng(seed))
        t, d, r = (f(x, model, gamma).objective for f in FAST.values())
        assert t <= d + 1e-9 * (1 + abs(d))
        assert r <= d + 1e-9 * (1 + abs(d))

    @pytest.mark.parametrize("f", list(FAST.values()))
    def test_zero_penalty_is_mle(self, f, rng):
        x = rng.poisson(3, 16).astype(float)
        np.testing.assert_allclose(f(x, Poisson(), 0.0).theta_hat, x)
        g = rng.normal(0, 1, 16)
        np.testing.assert_allclose(f(g, Gaussian(1.0), 0.0).theta_hat, g)

    @pytest.mark.parametrize("f", list(FAST.values()))
    def test_large_penalty_is_constant(self, f, rng):
        x = rng.poisson(3, 16).astype(float)
        r = f(x, Poisson(), 1e4)
        assert r.kept == []
        np.testing.assert_allclose(r.theta_hat, x.mean())

    def test_deterministic(self, rng):
        x = rng.poisson(2, 32).astype(float)
        for f in FAST.values():
            a, b = f(x, Poisson(), 1.0), f(x, Poisson(), 1.0)
            assert a.to_dict() == b.to_dict()

    def test_serialized_form(self):
        d = estimate_rp(np.array([0.0, 0, 8, 8]), Poisson(), 1.5).to_dict()
        assert {"model", "gamma", "objective_nats", "kept", "partition", "theta_hat"} <= set(d)
        assert d["partition"] == [{"start": 0, "end": 2, "value": 0.0}, {"start": 2, "end": 4, "value": 8.0}]
        assert d["kept"] == [{"start": 0, "end": 4, "split": 2, "omega": 0.0}]

    def test_dispatch(self):
        x = np.array([0.0, 0, 8, 8])
        assert estimate(x, Poisson(), 1.5, "rdp").objective == estimate_rdp(x, Poisson(), 1.5).objective
        with pytest.raises(InvalidConfig):
            estimate(x, Poisson(), 1.5, "cart")


class TestQuantized:
    def test_one_level(self):
        grid = QuantizationGrid(2.0, 5.0, 1)
        r = quantized_penalized_mle(np.array([0.0, 9, 1, 4]), Poisson(), 1.5, grid)
        np.testing.assert_array_equal(r.theta_hat, [2.0] * 4)

    def test_run_census(self):
        thetas, runs = quantized_candidates(QuantizationGrid(1.0, 2.0, 2), 4)
        assert len(thetas) == 16
        assert np.bincount(runs).tolist() == [0, 2, 6, 6, 2]

    def test_levels_for_n(self):
        assert QuantizationGrid.for_n(0, 1, 4).levels == 2
        assert QuantizationGrid.for_n(0, 1, 5).levels == 3
        assert QuantizationGrid.for_n(0, 1, 9).levels == 3

    def test_bad_grid(self):
        with pytest.raises(InvalidArgument):
            QuantizationGrid(2.0, 1.0, 3)

    def test_cap(self):
        with pytest.raises(ResourceLimit):
            quantized_penalized_mle(np.ones(7), Poisson(), 1.5, QuantizationGrid(0, 1, 2))

    def test_multinomial_rejected(self):
        with pytest.raises(InvalidConfig):
            quantized_penalized_mle(np.array([1.0, 1.0]), Multinomial(2), 1.5, QuantizationGrid(0, 1, 2))

    @pytest.mark.parametrize("model", [Poisson(), Gaussian(1.0)])
    def test_beats_snapped_truth(self, model, rng):
        grid = QuantizationGrid(0.5, 3.0, 3)
        theta = np.array([0.7, 2.9, 1.6, 1.1])
        snapped = grid.values[np.abs(grid.values[None, :] - theta[:, None]).argmin(axis=1)]
        lam = 1.5 * math.log(4)
        for _ in range(10):
            x = model.sample(theta, rng)
            r = quantized_penalized_mle(x, model, 1.5, grid)
            assert r.objective <= -loglik_direct(x, snapped, model) + 2 * lam * count_runs(snapped)[0] + 1e-12
