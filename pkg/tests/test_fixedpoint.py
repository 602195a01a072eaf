import math

import numpy as np
import pytest

from fairbeam import channel
from fairbeam.channel import LN2
from fairbeam.fixedpoint import (
    interference_map,
    recover_assignment,
    solution_efficiency,
    solve,
    solve_many,
)
from fairbeam.scenario import NetworkConfig, enumerate_beam_configs, sample_scenario_c1

from conftest import random_channel


def make_instance(cfg, seed):
    """Random scenario, channel for a random config, and its solo-rate vector."""
    rng = np.random.default_rng(seed)
    s = sample_scenario_c1(cfg, rng)
    configs = list(enumerate_beam_configs(cfg))
    q = configs[rng.integers(len(configs))]
    h = channel.channel_matrix(cfg, s, q)
    r_bar = channel.interference_free_rates(cfg, s)
    return h, r_bar


def grid_search_best_fraction(h, r_bar, cfg, k_steps=50):
    """Brute-force oracle: best min_n R_n / r_bar_n over a power grid."""
    levels = cfg.max_power * np.arange(1, k_steps + 1) / k_steps
    n = h.shape[1]
    grids = np.meshgrid(*([levels] * n), indexing="ij")
    p_all = np.stack([g.reshape(-1) for g in grids], axis=1)   # (G, N)
    received = h[None, :, :] * p_all[:, None, :]
    interference = received.sum(axis=2, keepdims=True) - received + cfg.noise_power
    s = received / interference
    rates = cfg.bandwidth / LN2 * np.log1p(s.max(axis=1))
    return float((rates / r_bar).min(axis=1).max())


class TestInterferenceMap:
    def test_single_ue_full_power_maps_to_budget(self):
        cfg = NetworkConfig(n_ues=1, n_aps=1, beamwidth_set=(1.0,), direction_set=(1.5,))
        h = np.array([[3.7e-9]])
        r_bar = np.array([cfg.bandwidth / LN2 * math.log1p(cfg.max_power * (h[0, 0] / cfg.noise_power))])
        t = interference_map(np.array([cfg.max_power]), h, r_bar, cfg)
        assert t[0] == pytest.approx(cfg.max_power, rel=1e-12)

    def test_strictly_positive_even_at_zero_power(self, cfg):
        rng = np.random.default_rng(0)
        h = random_channel(rng, cfg.n_aps, cfg.n_ues)
        r_bar = cfg.bandwidth / LN2 * np.log1p(cfg.max_power * h.max(axis=0) / cfg.noise_power)
        p = rng.uniform(0, cfg.max_power, cfg.n_ues)
        p[[1, 4]] = 0.0
        t = interference_map(p, h, r_bar, cfg)
        assert np.all(t > 0.0)
        assert np.all(np.isfinite(t))

    def test_continuous_at_zero_power(self, cfg):
        rng = np.random.default_rng(1)
        h = random_channel(rng, cfg.n_aps, cfg.n_ues)
        r_bar = cfg.bandwidth / LN2 * np.log1p(cfg.max_power * h.max(axis=0) / cfg.noise_power)
        p = rng.uniform(0.1, 1.0, cfg.n_ues) * cfg.max_power
        p_lim = p.copy()
        p_lim[3] = 0.0
        p_eps = p.copy()
        p_eps[3] = 1e-12 * cfg.max_power
        t_lim = interference_map(p_lim, h, r_bar, cfg)
        t_eps = interference_map(p_eps, h, r_bar, cfg)
        np.testing.assert_allclose(t_eps, t_lim, rtol=1e-9)

    def test_scalability(self, cfg):
        rng = np.random.default_rng(2)
        for _ in range(200):
            h = random_channel(rng, cfg.n_aps, cfg.n_ues)
            r_bar = cfg.bandwidth / LN2 * np.log1p(cfg.max_power * h.max(axis=0) / cfg.noise_power)
            p = rng.uniform(0.01, 1.0, cfg.n_ues) * cfg.max_power
            t1 = interference_map(p, h, r_bar, cfg)
            t2 = interference_map(2.0 * p, h, r_bar, cfg)
            assert np.all(t2 < 2.0 * t1 * (1 + 1e-12))

    def test_monotonicity(self, cfg):
        rng = np.random.default_rng(3)
        for _ in range(200):
            h = random_channel(rng, cfg.n_aps, cfg.n_ues)
            r_bar = cfg.bandwidth / LN2 * np.log1p(cfg.max_power * h.max(axis=0) / cfg.noise_power)
            p = rng.uniform(0.0, 1.0, cfg.n_ues) * cfg.max_power
            q = p + rng.uniform(0.0, 0.5, cfg.n_ues) * cfg.max_power
            tp = interference_map(p, h, r_bar, cfg)
            tq = interference_map(q, h, r_bar, cfg)
            assert np.all(tp <= tq * (1 + 1e-12))

    def test_negative_power_rejected(self, cfg):
        h = random_channel(np.random.default_rng(4), cfg.n_aps, cfg.n_ues)
        r_bar = np.ones(cfg.n_ues)
        with pytest.raises(ValueError):
            interference_map(np.full(cfg.n_ues, -1.0), h, r_bar, cfg)


class TestSolve:
    def test_two_symmetric_ues_closed_form(self):
        # equal gains to one AP, budget*gain/noise = 10: both transmit at full
        # power, each sees SINR 10/11
        cfg = NetworkConfig(n_ues=2, n_aps=1, max_power=1.0, bandwidth=1.0,
                            noise_power=0.1, beamwidth_set=(1.0,), direction_set=(1.5,))
        h = np.array([[1.0, 1.0]])
        r_bar = np.full(2, cfg.bandwidth / LN2 * math.log1p(10.0))
        alloc = solve(h, r_bar, cfg, max_iters=100)
        expected = math.log2(1.0 + 10.0 / 11.0) / math.log2(11.0)
        assert alloc.fraction == pytest.approx(expected, rel=1e-9)
        assert expected == pytest.approx(0.2697, abs=5e-5)
        np.testing.assert_allclose(alloc.powers, [1.0, 1.0], rtol=1e-12)

    def test_single_ue_reaches_full_fraction(self):
        cfg = NetworkConfig(n_ues=1, n_aps=1, beamwidth_set=(1.0,), direction_set=(1.5,))
        s = sample_scenario_c1(cfg, np.random.default_rng(5))
        h = channel.channel_matrix(cfg, s, next(iter(enumerate_beam_configs(cfg))))
        r_bar = channel.interference_free_rates(cfg, s)
        alloc = solve(h, r_bar, cfg, max_iters=50)
        assert alloc.fraction == pytest.approx(1.0, abs=1e-12)
        assert alloc.powers[0] == cfg.max_power

    def test_beats_power_grid_oracle(self, small_cfg):
        for seed in range(6):
            h, r_bar = make_instance(small_cfg, seed)
            alloc = solve(h, r_bar, small_cfg, max_iters=100)
            oracle = grid_search_best_fraction(h, r_bar, small_cfg)
            assert alloc.fraction >= oracle - 1e-3

    def test_budget_binds_exactly(self, cfg):
        h, r_bar = make_instance(cfg, 7)
        alloc = solve(h, r_bar, cfg, max_iters=100)
        assert alloc.powers.max() == cfg.max_power
        assert np.all(alloc.powers > 0.0)
        assert np.all(alloc.powers <= cfg.max_power)

    def test_fraction_at_most_one(self, cfg):
        for seed in range(10):
            h, r_bar = make_instance(cfg, seed)
            alloc = solve(h, r_bar, cfg, max_iters=100)
            assert alloc.fraction <= 1.0 + 1e-9

    def test_fairness_residual_small_at_reference_budget(self, cfg):
        for seed in range(10):
            h, r_bar = make_instance(cfg, 100 + seed)
            alloc = solve(h, r_bar, cfg, max_iters=100)
            assert alloc.residual <= 1e-6

    def test_rates_match_fraction_within_residual(self, cfg):
        h, r_bar = make_instance(cfg, 11)
        alloc = solve(h, r_bar, cfg, max_iters=100)
        rates = channel.achievable_rates(alloc.powers, h, cfg)
        ratios = rates / r_bar
        assert np.all(np.abs(ratios - alloc.fraction)
                      <= alloc.fraction * alloc.residual + 1e-12)

    def test_tol_zero_runs_exactly_max_iters(self, cfg):
        h, r_bar = make_instance(cfg, 12)
        alloc = solve(h, r_bar, cfg, max_iters=37, tol=0.0)
        assert alloc.iterations_used == 37

    def test_early_stop_with_tolerance(self, cfg):
        h, r_bar = make_instance(cfg, 13)
        alloc = solve(h, r_bar, cfg, max_iters=100, tol=1e-7)
        assert alloc.iterations_used < 100
        full = solve(h, r_bar, cfg, max_iters=100, tol=0.0)
        assert alloc.fraction == pytest.approx(full.fraction, rel=1e-6)

    def test_deterministic(self, cfg):
        h, r_bar = make_instance(cfg, 14)
        a = solve(h, r_bar, cfg, max_iters=60)
        b = solve(h, r_bar, cfg, max_iters=60)
        assert a.fraction == b.fraction
        np.testing.assert_array_equal(a.powers, b.powers)
        np.testing.assert_array_equal(a.assignment, b.assignment)

    def test_invalid_arguments(self, cfg):
        h, r_bar = make_instance(cfg, 15)
        with pytest.raises(ValueError):
            solve(h, r_bar, cfg, max_iters=0)
        with pytest.raises(ValueError):
            solve(h, r_bar, cfg, max_iters=10, tol=-1.0)

    def test_step_sequence_vanishes(self, cfg):
        h, r_bar = make_instance(cfg, 16)
        p = np.full(cfg.n_ues, cfg.max_power)
        w_over_ln2 = cfg.bandwidth / LN2
        steps = []
        for _ in range(120):
            t = interference_map(p, h, r_bar, cfg)
            p_new = cfg.max_power * t / t.max()
            steps.append(np.abs(p_new - p).max())
            p = p_new
        assert steps[-1] < 1e-12 * cfg.max_power
        assert max(steps[80:]) < max(steps[:20])


class TestSolveMany:
    def test_matches_individual_solves(self, cfg):
        rng = np.random.default_rng(17)
        s = sample_scenario_c1(cfg, rng)
        r_bar = channel.interference_free_rates(cfg, s)
        configs = list(enumerate_beam_configs(cfg))
        picks = [configs[i] for i in rng.integers(0, len(configs), 5)]
        h_stack = np.stack([channel.channel_matrix(cfg, s, q) for q in picks])
        for tol in (0.0, 1e-7):
            batch = solve_many(h_stack, r_bar, cfg, max_iters=80, tol=tol)
            for k, q in enumerate(picks):
                single = solve(h_stack[k], r_bar, cfg, max_iters=80, tol=tol)
                assert batch.fractions[k] == single.fraction
                np.testing.assert_array_equal(batch.powers[k], single.powers)
                np.testing.assert_array_equal(batch.assignments[k], single.assignment)
                assert batch.iterations_used[k] == single.iterations_used
                assert batch.residuals[k] == single.residual

    def test_shape_validation(self, cfg):
        with pytest.raises(ValueError):
            solve_many(np.ones((3, 4)), np.ones(4), cfg)


class TestRecoverAssignment:
    def test_single_ap(self):
        cfg = NetworkConfig(n_ues=4, n_aps=1, ap_positions=[[0.0, 16.0]])
        h = random_channel(np.random.default_rng(18), 1, 4)
        r_bar = np.ones(4)
        a = recover_assignment(np.full(4, cfg.max_power), h, r_bar, cfg)
        assert a.tolist() == [0, 0, 0, 0]

    def test_dominant_ap_wins(self, small_cfg):
        h = np.array([[1e-9, 1e-9, 1e-9], [1e-7, 1e-12, 1e-12]])
        r_bar = np.ones(3)
        p = np.full(3, small_cfg.max_power)
        a = recover_assignment(p, h, r_bar, small_cfg)
        assert a[0] == 1  # UE 0 has a hundredfold better link at AP 1

    def test_agrees_with_sinr_argmax(self, cfg):
        rng = np.random.default_rng(19)
        for _ in range(50):
            h = random_channel(rng, cfg.n_aps, cfg.n_ues)
            r_bar = cfg.bandwidth / LN2 * np.log1p(cfg.max_power * h.max(axis=0) / cfg.noise_power)
            p = rng.uniform(0.01, 1.0, cfg.n_ues) * cfg.max_power
            a = recover_assignment(p, h, r_bar, cfg)
            s = channel.sinr_matrix(p, h, cfg.noise_power)
            np.testing.assert_array_equal(a, s.argmax(axis=0))

    def test_requires_positive_power(self, cfg):
        h = random_channel(np.random.default_rng(20), cfg.n_aps, cfg.n_ues)
        p = np.full(cfg.n_ues, cfg.max_power)
        p[0] = 0.0
        with pytest.raises(ValueError):
            recover_assignment(p, h, np.ones(cfg.n_ues), cfg)

    def test_depends_on_h_only_through_sinr(self, cfg):
        # scaling one AP's row rescales its SINRs uniformly across UEs, which
        # can change that AP's competitiveness but the assignment must equal
        # the SINR argmax recomputed on the scaled matrix
        rng = np.random.default_rng(21)
        h = random_channel(rng, cfg.n_aps, cfg.n_ues)
        h2 = h.copy()
        h2[1] *= 3.0
        p = rng.uniform(0.1, 1.0, cfg.n_ues) * cfg.max_power
        r_bar = np.ones(cfg.n_ues)
        a = recover_assignment(p, h2, r_bar, cfg)
        s = channel.sinr_matrix(p, h2, cfg.noise_power)
        np.testing.assert_array_equal(a, s.argmax(axis=0))


class TestSolutionEfficiency:
    def test_identity(self):
        assert solution_efficiency(0.4, 0.4) == 1.0

    def test_ratio(self):
        assert solution_efficiency(0.32, 0.4) == pytest.approx(0.8)

    def test_invalid_reference(self):
        with pytest.raises(ValueError):
            solution_efficiency(0.4, 0.0)
        with pytest.raises(ValueError):
            solution_efficiency(0.4, -1.0)
