"""Max-min fair power allocation for a fixed beam configuration.

The solver iterates a positive concave interference mapping T under sup-norm
normalization, p <- P_max * T(p) / ||T(p)||_inf, which converges to the
unique pair (c, p) with T(p) = p / c and ||p||_inf = P_max.  At that point
every UE achieves the same fraction c of its interference-free rate, and the
serving AP of each UE falls out of the per-AP terms of T.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import LN2
from .scenario import NetworkConfig


@dataclass(frozen=True)
class Allocation:
    """Solver output for one beam configuration.

    fraction is the common rate fraction c, powers the transmit powers in
    watts (sup-norm equal to the power budget), assignment the serving AP
    index per UE, and residual the largest relative deviation of any UE's
    rate fraction from c at the final iterate.
    """

    fraction: float
    powers: np.ndarray
    assignment: np.ndarray
    iterations_used: int
    residual: float


@dataclass(frozen=True)
class BatchSolution:
    """Vectorized solver output for a stack of beam configurations."""

    fractions: np.ndarray      # (K,)
    powers: np.ndarray         # (K, N)
    assignments: np.ndarray    # (K, N) int
    iterations_used: np.ndarray
    residuals: np.ndarray

    def __len__(self) -> int:
        return self.fractions.shape[0]

    def allocation(self, k: int) -> Allocation:
        return Allocation(
            fraction=float(self.fractions[k]),
            powers=self.powers[k].copy(),
            assignment=self.assignments[k].copy(),
            iterations_used=int(self.iterations_used[k]),
            residual=float(self.residuals[k]),
        )


def _sinr_slopes(h: np.ndarray, p: np.ndarray, noise_power: float) -> np.ndarray:
    """d SINR / d p_n at fixed interference: h_mn / (interference + noise).

    SINR factorizes as s_n(p, m) = p_n * slope_mn, so per-UE maxima over APs
    can be taken on the slopes before any logarithm is evaluated.
    """
    received = h * p[..., None, :]
    total = received.sum(axis=-1, keepdims=True)
    return h / (total - received + noise_power)


def _map_values(p: np.ndarray, best_slope: np.ndarray, r_bar: np.ndarray,
                w_over_ln2: float) -> np.ndarray:
    """T(p) given the per-UE best SINR slope; continuous extension at p_n = 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = w_over_ln2 * np.log1p(p * best_slope)
        t_pos = r_bar * p / rate
    t_zero = r_bar / (w_over_ln2 * best_slope)
    return np.where(p > 0.0, t_pos, t_zero)


def interference_map(p: np.ndarray, h: np.ndarray, r_bar: np.ndarray,
                     cfg: NetworkConfig) -> np.ndarray:
    """T_n(p) = min_m r_bar_n p_n / rate_n(p, m); strictly positive.

    Zero-power components use the limit value
    r_bar_n * ln2 * (interference + noise) / (W * h_mn), minimized over m.
    """
    p = np.asarray(p, dtype=float)
    if np.any(p < 0.0):
        raise ValueError("powers must be nonnegative")
    slopes = _sinr_slopes(np.asarray(h, dtype=float), p, cfg.noise_power)
    return _map_values(p, slopes.max(axis=-2), np.asarray(r_bar, dtype=float),
                       cfg.bandwidth / LN2)


def _assignment_from_slopes(p: np.ndarray, slopes: np.ndarray, r_bar: np.ndarray,
                            w_over_ln2: float) -> np.ndarray:
    """argmin over APs of r_bar_n p_n / rate_{n,m}, first index on ties."""
    with np.errstate(divide="ignore", invalid="ignore"):
        per_ap_rate = w_over_ln2 * np.log1p(p[..., None, :] * slopes)
        ratio = r_bar * p[..., None, :] / per_ap_rate
    return ratio.argmin(axis=-2)


def solve_many(h_stack: np.ndarray, r_bar: np.ndarray, cfg: NetworkConfig,
               max_iters: int = 100, tol: float = 0.0) -> BatchSolution:
    """Run the normalized fixed-point iteration on a (K, M, N) stack of channels.

    Each configuration is iterated independently from full power; with
    tol > 0 a configuration freezes once its sup-norm power update falls to
    tol * P_max, with tol = 0 all run exactly max_iters steps.  Results are
    identical to K separate solve() calls.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if tol < 0.0:
        raise ValueError("tol must be >= 0")
    h = np.asarray(h_stack, dtype=float)
    if h.ndim != 3:
        raise ValueError("h_stack must have shape (K, M, N)")
    r_bar = np.asarray(r_bar, dtype=float)
    k, _, n = h.shape
    p_max = cfg.max_power
    noise = cfg.noise_power
    w_over_ln2 = cfg.bandwidth / LN2

    p = np.full((k, n), p_max)
    iters = np.zeros(k, dtype=int)

    if tol > 0.0:
        active = np.arange(k)
        for _ in range(max_iters):
            if active.size == 0:
                break
            pa = p[active]
            slopes = _sinr_slopes(h[active], pa, noise)
            t = _map_values(pa, slopes.max(axis=-2), r_bar, w_over_ln2)
            p_new = p_max * (t / t.max(axis=-1, keepdims=True))
            step = np.abs(p_new - pa).max(axis=-1)
            p[active] = p_new
            iters[active] += 1
            active = active[step > tol * p_max]
    else:
        for _ in range(max_iters):
            slopes = _sinr_slopes(h, p, noise)
            t = _map_values(p, slopes.max(axis=-2), r_bar, w_over_ln2)
            p = p_max * (t / t.max(axis=-1, keepdims=True))
        iters[:] = max_iters

    # diagnostics at the final iterate
    slopes = _sinr_slopes(h, p, noise)
    best_slope = slopes.max(axis=-2)
    t = _map_values(p, best_slope, r_bar, w_over_ln2)
    fractions = p_max / t.max(axis=-1)
    rates = w_over_ln2 * np.log1p(p * best_slope)
    residuals = np.abs(rates / r_bar - fractions[:, None]).max(axis=-1) / fractions
    assignments = _assignment_from_slopes(p, slopes, r_bar, w_over_ln2)
    return BatchSolution(fractions, p, assignments, iters, residuals)


def solve(h: np.ndarray, r_bar: np.ndarray, cfg: NetworkConfig,
          max_iters: int = 100, tol: float = 0.0) -> Allocation:
    """Optimal common rate fraction and powers for one channel matrix (M, N)."""
    h = np.asarray(h, dtype=float)
    if h.ndim != 2:
        raise ValueError("h must have shape (M, N)")
    return solve_many(h[None, :, :], r_bar, cfg, max_iters=max_iters, tol=tol).allocation(0)


def recover_assignment(p: np.ndarray, h: np.ndarray, r_bar: np.ndarray,
                       cfg: NetworkConfig) -> np.ndarray:
    """Serving AP per UE at powers p; ties go to the smallest AP index.

    Because the numerator r_bar_n p_n is constant across APs, the argmin
    coincides with the AP of largest SINR.
    """
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0.0):
        raise ValueError("assignment recovery requires strictly positive powers")
    slopes = _sinr_slopes(np.asarray(h, dtype=float), p, cfg.noise_power)
    return _assignment_from_slopes(p, slopes, np.asarray(r_bar, dtype=float),
                                   cfg.bandwidth / LN2)


def solution_efficiency(c: float, c_opt: float) -> float:
    """Fraction of the exhaustive-search optimum achieved by a method."""
    if not c_opt > 0.0:
        raise ValueError("c_opt must be > 0")
    return c / c_opt
