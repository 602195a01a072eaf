"""Sectored-antenna channel gains, SINR and rates.

Gain model: a cone of constant main-lobe gain around the boresight, a
constant side-lobe floor elsewhere, normalized so total radiated power is
conserved.  Propagation follows a log-distance urban-microcell LoS law.
All gains are linear power gains, all rates are bits/s.
"""

from __future__ import annotations

import math

import numpy as np

from .scenario import TWO_PI, BeamConfig, ConfigError, NetworkConfig, Scenario, beam_config_indices

LN2 = math.log(2.0)


def wrap_angle(angle):
    """Wrap to [-pi, pi)."""
    return (angle + math.pi) % TWO_PI - math.pi


def antenna_gain(beamwidth, boresight, angle_to_peer, sidelobe_gain):
    """Cone antenna gain toward a peer at the given absolute angle.

    Main-lobe gain is (2*pi - (2*pi - beamwidth) * sidelobe_gain) / beamwidth
    inside the cone, sidelobe_gain outside, which conserves radiated power:
    beamwidth * G_main + (2*pi - beamwidth) * sidelobe_gain = 2*pi.
    A full-circle beamwidth of 2*pi therefore gives unit gain everywhere.
    """
    beamwidth = np.asarray(beamwidth, dtype=float)
    if np.any(beamwidth <= 0.0) or np.any(beamwidth > TWO_PI):
        raise ConfigError("beamwidth must lie in (0, 2*pi]")
    sidelobe_gain = np.asarray(sidelobe_gain, dtype=float)
    if np.any(sidelobe_gain <= 0.0) or np.any(sidelobe_gain >= 1.0):
        raise ConfigError("sidelobe_gain must lie in (0, 1)")
    main = (TWO_PI - (TWO_PI - beamwidth) * sidelobe_gain) / beamwidth
    inside = np.abs(wrap_angle(np.asarray(angle_to_peer, dtype=float) - boresight)) <= beamwidth / 2.0
    return np.where(inside, main, sidelobe_gain)[()]


def path_loss_db(distance, carrier_freq):
    """Log-distance UMi street-canyon LoS path loss in dB (d in m, f in Hz)."""
    d = np.asarray(distance, dtype=float)
    return 32.4 + 21.0 * np.log10(d) + 20.0 * math.log10(carrier_freq / 1e9)


def path_gain(distance, carrier_freq):
    return 10.0 ** (-path_loss_db(distance, carrier_freq) / 10.0)


def _geometry(cfg: NetworkConfig, scenario: Scenario):
    """Distances and bearing angles for every AP-UE pair, shape (M, N)."""
    ap = cfg.ap_positions[:, :, None]            # (M, 2, 1)
    ue = scenario.positions.T[None, :, :]        # (1, 2, N)
    delta = ue - ap                              # AP -> UE
    dist = np.hypot(delta[:, 0, :], delta[:, 1, :])
    angle_ap_to_ue = np.arctan2(delta[:, 1, :], delta[:, 0, :])
    angle_ue_to_ap = np.arctan2(-delta[:, 1, :], -delta[:, 0, :])
    return dist, angle_ap_to_ue, angle_ue_to_ap


def beam_independent_gains(cfg: NetworkConfig, scenario: Scenario) -> np.ndarray:
    """UE transmit gain times path gain for every AP-UE pair, shape (M, N).

    This is the part of the channel that does not depend on the receive
    beam configuration.
    """
    dist, _, angle_ue_to_ap = _geometry(cfg, scenario)
    if np.any(dist <= cfg.min_distance):
        raise ConfigError(f"UE-AP distance at or below min_distance={cfg.min_distance} m")
    tx_gain = antenna_gain(cfg.ue_tx_beamwidth, scenario.tx_directions[None, :],
                           angle_ue_to_ap, cfg.sidelobe_gain)
    return tx_gain * path_gain(dist, cfg.carrier_freq)


def rx_gain_table(cfg: NetworkConfig, scenario: Scenario) -> np.ndarray:
    """AP receive gain for every candidate beam, shape (M, |D_theta|, |D_beta|, N)."""
    _, angle_ap_to_ue, _ = _geometry(cfg, scenario)
    widths = cfg.beamwidth_set[None, :, None, None]
    boresights = cfg.ap_boresight_reference[:, None, None, None] + cfg.direction_set[None, None, :, None]
    return antenna_gain(widths, boresights, angle_ap_to_ue[:, None, None, :], cfg.sidelobe_gain)


def channel_matrix(cfg: NetworkConfig, scenario: Scenario, q: BeamConfig) -> np.ndarray:
    """Channel power gains h[m, n] for one beam configuration, shape (M, N)."""
    wi, di = beam_config_indices(cfg, q)
    base = beam_independent_gains(cfg, scenario)
    table = rx_gain_table(cfg, scenario)
    m_idx = np.arange(cfg.n_aps)
    return base * table[m_idx, wi, di, :]


def channel_gain(cfg: NetworkConfig, scenario: Scenario, q: BeamConfig, m: int, n: int) -> float:
    """Channel power gain between UE n and AP m under beam configuration q."""
    if not 0 <= m < cfg.n_aps:
        raise IndexError(f"AP index {m} out of range")
    if not 0 <= n < scenario.n_ues:
        raise IndexError(f"UE index {n} out of range")
    return float(channel_matrix(cfg, scenario, q)[m, n])


def channel_tensor(cfg: NetworkConfig, scenario: Scenario,
                   width_idx: np.ndarray, dir_idx: np.ndarray) -> np.ndarray:
    """Channel matrices for a batch of beam configs given as index digits.

    width_idx and dir_idx have shape (K, M); the result has shape (K, M, N).
    Gains depend on each AP's own beam only, so the K matrices are gathered
    from one (M, |D_theta|, |D_beta|, N) table.
    """
    base = beam_independent_gains(cfg, scenario)
    table = rx_gain_table(cfg, scenario)
    k, m = width_idx.shape
    out = np.empty((k, m, scenario.n_ues))
    for j in range(m):
        out[:, j, :] = base[j] * table[j, width_idx[:, j], dir_idx[:, j], :]
    return out


def sinr(p: np.ndarray, h: np.ndarray, noise_power: float, n: int, m: int) -> float:
    """SINR of UE n at AP m: p_n h_mn / (sum_{n' != n} p_n' h_mn' + noise)."""
    p = np.asarray(p, dtype=float)
    received = p * h[m]
    interference = received.sum() - received[n]
    return float(received[n] / (interference + noise_power))


def sinr_matrix(p: np.ndarray, h: np.ndarray, noise_power: float) -> np.ndarray:
    """SINR of every UE at every AP, shape (M, N)."""
    received = h * np.asarray(p, dtype=float)[None, :]
    interference = received.sum(axis=1, keepdims=True) - received + noise_power
    return received / interference


def achievable_rate(p: np.ndarray, h: np.ndarray, cfg: NetworkConfig, n: int) -> float:
    """Best-AP rate of UE n in bits/s."""
    s = sinr_matrix(p, h, cfg.noise_power)[:, n]
    return float(cfg.bandwidth / LN2 * np.log1p(s.max()))


def achievable_rates(p: np.ndarray, h: np.ndarray, cfg: NetworkConfig) -> np.ndarray:
    s = sinr_matrix(p, h, cfg.noise_power)
    return cfg.bandwidth / LN2 * np.log1p(s.max(axis=0))


def interference_free_rates(cfg: NetworkConfig, scenario: Scenario) -> np.ndarray:
    """Best-case solo rate of every UE, maximized over APs and candidate beams.

    Because a gain h[m, n] depends only on AP m's own beam entries, the
    search runs over M * |D_theta| * |D_beta| links per UE rather than over
    the full configuration product.
    """
    base = beam_independent_gains(cfg, scenario)
    table = rx_gain_table(cfg, scenario)
    gains = base[:, None, None, :] * table         # (M, T, B, N)
    slopes = gains / cfg.noise_power
    best = cfg.max_power * slopes.max(axis=(0, 1, 2))
    return cfg.bandwidth / LN2 * np.log1p(best)
