import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairbeam.channel import (
    LN2,
    achievable_rate,
    achievable_rates,
    antenna_gain,
    beam_independent_gains,
    channel_gain,
    channel_matrix,
    channel_tensor,
    interference_free_rates,
    path_gain,
    path_loss_db,
    sinr,
    sinr_matrix,
    wrap_angle,
)
from fairbeam.scenario import (
    TWO_PI,
    BeamConfig,
    ConfigError,
    NetworkConfig,
    Scenario,
    beam_config_digit_grids,
    enumerate_beam_configs,
    sample_scenario_c1,
)


class TestAntennaGain:
    def test_full_circle_beam_is_unit_gain(self):
        for angle in (0.0, 1.0, -2.5, 3.0):
            assert antenna_gain(TWO_PI, 0.3, angle, 0.1) == pytest.approx(1.0)

    def test_half_circle_main_gain(self):
        # conservation formula: (2*pi - pi*0.1) / pi = 1.9 on boresight
        assert antenna_gain(math.pi, 0.0, 0.0, 0.1) == pytest.approx(1.9, abs=1e-12)

    def test_just_outside_cone_gives_sidelobe(self):
        theta = math.radians(40.0)
        g = antenna_gain(theta, 0.0, theta / 2 + 1e-9, 0.25)
        assert g == pytest.approx(0.25)

    def test_wraparound_alignment(self):
        theta = math.radians(30.0)
        main = antenna_gain(theta, 0.0, 0.0, 0.1)
        assert antenna_gain(theta, math.pi - 0.01, -math.pi + 0.01, 0.1) == pytest.approx(main)

    @pytest.mark.parametrize("bad", [0.0, -1.0, TWO_PI + 0.1])
    def test_invalid_beamwidth(self, bad):
        with pytest.raises(ConfigError):
            antenna_gain(bad, 0.0, 0.0, 0.1)

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.2])
    def test_invalid_sidelobe(self, bad):
        with pytest.raises(ConfigError):
            antenna_gain(1.0, 0.0, 0.0, bad)

    @given(
        beamwidth=st.floats(1e-3, TWO_PI),
        sidelobe=st.floats(1e-6, 1.0, exclude_max=True),
    )
    @settings(max_examples=200, deadline=None)
    def test_power_conservation(self, beamwidth, sidelobe):
        main = antenna_gain(beamwidth, 0.0, 0.0, sidelobe)
        total = beamwidth * main + (TWO_PI - beamwidth) * sidelobe
        assert total == pytest.approx(TWO_PI, abs=1e-12)


class TestPathLoss:
    def test_reference_distance_value(self):
        # 32.4 + 20 log10(28) at 1 m
        expected = 32.4 + 20.0 * math.log10(28.0)
        assert path_loss_db(1.0, 28e9) == pytest.approx(expected, abs=1e-12)

    def test_doubling_distance_costs_21_log10_2_db(self):
        rng = np.random.default_rng(0)
        for d in rng.uniform(1.0, 40.0, 20):
            drop = path_loss_db(2 * d, 28e9) - path_loss_db(d, 28e9)
            assert drop == pytest.approx(21.0 * math.log10(2.0), abs=1e-9)
        assert 21.0 * math.log10(2.0) == pytest.approx(6.3216, abs=5e-5)

    def test_gain_is_inverse_loss(self):
        assert path_gain(7.3, 28e9) == pytest.approx(10 ** (-path_loss_db(7.3, 28e9) / 10))


def _scenario_below_ap(cfg, offsets, tx_toward_ap=True):
    """UEs straight below the first AP at the given vertical offsets."""
    ap = cfg.ap_positions[0]
    rows = []
    for off in offsets:
        direction = math.pi / 2 if tx_toward_ap else -math.pi / 2 + 0.2
        rows.append([ap[0], ap[1] - off, direction % TWO_PI])
    return Scenario(np.asarray(sorted(map(tuple, rows))))


class TestChannelGain:
    def test_factorizes_into_known_terms(self, cfg):
        s = _scenario_below_ap(cfg, [5.0])
        q = next(iter(enumerate_beam_configs(cfg)))
        got = channel_gain(cfg, s, q, 0, 0)
        d = 5.0
        g_tx = antenna_gain(cfg.ue_tx_beamwidth, s.tx_directions[0], math.pi / 2,
                            cfg.sidelobe_gain)
        bore = cfg.ap_boresight_reference[0] + q.rx_directions[0]
        g_rx = antenna_gain(q.rx_beamwidths[0], bore, -math.pi / 2, cfg.sidelobe_gain)
        assert got == pytest.approx(float(g_tx) * float(g_rx) * path_gain(d, cfg.carrier_freq),
                                    rel=1e-12)

    def test_misaligned_ue_beam_scales_by_sidelobe_over_main(self, cfg):
        aligned = _scenario_below_ap(cfg, [5.0], tx_toward_ap=True)
        misaligned = _scenario_below_ap(cfg, [5.0], tx_toward_ap=False)
        q = next(iter(enumerate_beam_configs(cfg)))
        g_main = antenna_gain(cfg.ue_tx_beamwidth, 0.0, 0.0, cfg.sidelobe_gain)
        ratio = channel_gain(cfg, misaligned, q, 0, 0) / channel_gain(cfg, aligned, q, 0, 0)
        assert ratio == pytest.approx(cfg.sidelobe_gain / float(g_main), rel=1e-12)

    def test_distance_below_minimum_rejected(self, cfg):
        s = _scenario_below_ap(cfg, [0.2])
        q = next(iter(enumerate_beam_configs(cfg)))
        with pytest.raises(ConfigError):
            channel_gain(cfg, s, q, 0, 0)

    def test_index_out_of_range(self, cfg):
        s = sample_scenario_c1(cfg, np.random.default_rng(0))
        q = next(iter(enumerate_beam_configs(cfg)))
        with pytest.raises(IndexError):
            channel_gain(cfg, s, q, cfg.n_aps, 0)
        with pytest.raises(IndexError):
            channel_gain(cfg, s, q, 0, cfg.n_ues)

    def test_all_gains_strictly_positive_and_finite(self, cfg):
        s = sample_scenario_c1(cfg, np.random.default_rng(1))
        q = list(enumerate_beam_configs(cfg))[400]
        h = channel_matrix(cfg, s, q)
        assert h.shape == (cfg.n_aps, cfg.n_ues)
        assert np.all(h > 0.0)
        assert np.all(np.isfinite(h))

    def test_separability(self, cfg):
        # gains at AP m depend on q only through q's entries for m
        from fairbeam.scenario import beam_config_from_indices
        s = sample_scenario_c1(cfg, np.random.default_rng(2))
        qa = beam_config_from_indices(cfg, [0, 1, 2], [1, 2, 0])
        qb = beam_config_from_indices(cfg, [0, 1, 0], [1, 2, 2])  # AP 2 changed
        ha = channel_matrix(cfg, s, qa)
        hb = channel_matrix(cfg, s, qb)
        np.testing.assert_array_equal(ha[:2], hb[:2])
        assert not np.array_equal(ha[2], hb[2])

    def test_channel_tensor_matches_matrix(self, cfg):
        s = sample_scenario_c1(cfg, np.random.default_rng(3))
        wi, di = beam_config_digit_grids(cfg)
        h_all = channel_tensor(cfg, s, wi, di)
        for k in (0, 100, 728):
            q = BeamConfig(tuple(cfg.beamwidth_set[wi[k]]), tuple(cfg.direction_set[di[k]]))
            np.testing.assert_array_equal(h_all[k], channel_matrix(cfg, s, q))


class TestSinrAndRates:
    def test_single_ue_unit_values(self):
        assert sinr(np.array([1.0]), np.array([[1.0]]), 1.0, 0, 0) == 1.0

    def test_two_symmetric_ues(self):
        p = np.array([1.0, 1.0])
        h = np.ones((1, 2))
        assert sinr(p, h, 1.0, 0, 0) == pytest.approx(0.5)
        assert sinr(p, h, 1.0, 1, 0) == pytest.approx(0.5)

    def test_zero_power_zero_sinr(self):
        assert sinr(np.array([0.0, 2.0]), np.ones((1, 2)), 1.0, 0, 0) == 0.0

    def test_matrix_agrees_with_scalar(self):
        rng = np.random.default_rng(4)
        h = np.exp(rng.normal(size=(3, 5)))
        p = rng.uniform(0.1, 1.0, 5)
        mat = sinr_matrix(p, h, 0.7)
        for m in range(3):
            for n in range(5):
                assert mat[m, n] == pytest.approx(sinr(p, h, 0.7, n, m), rel=1e-12)

    def test_unit_rate_at_unit_sinr(self):
        cfg = NetworkConfig(bandwidth=1.0, noise_power=1.0)
        rate = achievable_rate(np.array([1.0]), np.array([[1.0]]), cfg, 0)
        assert rate == pytest.approx(1.0, rel=1e-12)

    def test_single_ap_is_plain_rate(self):
        cfg = NetworkConfig(bandwidth=5.0, noise_power=1.0)
        rng = np.random.default_rng(5)
        h = np.exp(rng.normal(size=(1, 4)))
        p = rng.uniform(0.1, 1.0, 4)
        rates = achievable_rates(p, h, cfg)
        s = sinr_matrix(p, h, 1.0)[0]
        np.testing.assert_allclose(rates, 5.0 * np.log2(1.0 + s), rtol=1e-12)

    def test_adding_weaker_ap_leaves_rate_unchanged(self):
        cfg = NetworkConfig(bandwidth=1.0, noise_power=1.0)
        h1 = np.array([[2.0, 1.0]])
        h2 = np.vstack([h1, 1e-6 * h1])
        p = np.array([0.5, 0.5])
        assert achievable_rate(p, h2, cfg, 0) == achievable_rate(p, h1, cfg, 0)

    def test_sinr_monotonic_in_own_and_other_power(self):
        rng = np.random.default_rng(6)
        h = np.exp(rng.normal(size=(2, 4)))
        p = rng.uniform(0.1, 1.0, 4)
        base = sinr(p, h, 0.3, 1, 0)
        bumped_own = p.copy(); bumped_own[1] += 0.05
        bumped_other = p.copy(); bumped_other[2] += 0.05
        assert sinr(bumped_own, h, 0.3, 1, 0) > base
        assert sinr(bumped_other, h, 0.3, 1, 0) < base


class TestInterferenceFreeRates:
    def test_reduction_equals_full_search(self, tiny_cfg):
        # brute force over every configuration in Q must match the per-link
        # reduction exactly
        s = sample_scenario_c1(tiny_cfg, np.random.default_rng(7))
        r_bar = interference_free_rates(tiny_cfg, s)
        w_over_ln2 = tiny_cfg.bandwidth / LN2
        brute = np.full(tiny_cfg.n_ues, -np.inf)
        for q in enumerate_beam_configs(tiny_cfg):
            h = channel_matrix(tiny_cfg, s, q)
            z = tiny_cfg.max_power * (h / tiny_cfg.noise_power)
            brute = np.maximum(brute, w_over_ln2 * np.log1p(z).max(axis=0))
        np.testing.assert_array_equal(r_bar, brute)

    def test_singleton_sets_single_ap_closed_form(self):
        cfg = NetworkConfig(n_ues=2, n_aps=1, beamwidth_set=(1.0,), direction_set=(1.5,))
        s = sample_scenario_c1(cfg, np.random.default_rng(8))
        q = next(iter(enumerate_beam_configs(cfg)))
        h = channel_matrix(cfg, s, q)
        expected = cfg.bandwidth / LN2 * np.log1p(cfg.max_power * (h[0] / cfg.noise_power))
        np.testing.assert_array_equal(interference_free_rates(cfg, s), expected)

    def test_row_permutation_equivariance(self, cfg):
        s = sample_scenario_c1(cfg, np.random.default_rng(9))
        perm = np.random.default_rng(0).permutation(cfg.n_ues)
        s_perm = Scenario(s.d_matrix[perm])
        np.testing.assert_array_equal(interference_free_rates(cfg, s_perm),
                                      interference_free_rates(cfg, s)[perm])

    def test_rates_upper_bound_achievable_rates(self, cfg):
        # any power profile below budget and any config stays below r_bar
        rng = np.random.default_rng(10)
        s = sample_scenario_c1(cfg, rng)
        r_bar = interference_free_rates(cfg, s)
        configs = list(enumerate_beam_configs(cfg))
        for _ in range(25):
            q = configs[rng.integers(len(configs))]
            h = channel_matrix(cfg, s, q)
            p = rng.uniform(0.0, cfg.max_power, cfg.n_ues)
            rates = achievable_rates(p, h, cfg)
            assert np.all(rates <= r_bar * (1 + 1e-12))
