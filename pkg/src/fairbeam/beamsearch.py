"""Beam configuration search: exhaustive oracle, simulated annealing, naive mode.

All searches charge one fixed-point solve per probed configuration; the
cumulative number of fixed-point iterations is the complexity currency used
by the evaluation harness.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import channel, fixedpoint
from .scenario import (
    BeamConfig,
    ConfigError,
    NetworkConfig,
    Scenario,
    beam_config_digit_grids,
    beam_config_from_indices,
)


@dataclass(frozen=True)
class SearchResult:
    """Best configuration found by a search plus its cost accounting.

    trace holds (cumulative_fp_iterations, best_c_so_far) pairs, one per
    probed configuration, for searches that probe sequentially.
    """

    config: BeamConfig
    allocation: fixedpoint.Allocation
    fp_iterations_total: int
    configs_probed: int
    trace: tuple[tuple[int, float], ...] = ()


@dataclass(frozen=True)
class AnnealingSchedule:
    initial_temperature: float = 0.1
    cooling_factor: float = 0.98
    steps: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.steps < 0:
            raise ConfigError("steps must be >= 0")
        if not 0.0 < self.cooling_factor < 1.0:
            raise ConfigError("cooling_factor must lie in (0, 1)")
        if self.initial_temperature < 0.0:
            raise ConfigError("initial_temperature must be >= 0")


def exhaustive_search(scenario: Scenario, cfg: NetworkConfig, fp_iters: int,
                      tol: float = 0.0, r_bar: np.ndarray | None = None) -> SearchResult:
    """Solve the power problem for every beam configuration, keep the best c.

    Ties go to the earlier configuration in canonical enumeration order.
    """
    if fp_iters < 1:
        raise ValueError("fp_iters must be >= 1")
    if r_bar is None:
        r_bar = channel.interference_free_rates(cfg, scenario)
    width_idx, dir_idx = beam_config_digit_grids(cfg)
    h_all = channel.channel_tensor(cfg, scenario, width_idx, dir_idx)
    batch = fixedpoint.solve_many(h_all, r_bar, cfg, max_iters=fp_iters, tol=tol)
    best = int(batch.fractions.argmax())
    return SearchResult(
        config=beam_config_from_indices(cfg, width_idx[best], dir_idx[best]),
        allocation=batch.allocation(best),
        fp_iterations_total=int(batch.iterations_used.sum()),
        configs_probed=len(batch),
    )


def _neighbor_index(idx: int, size: int, rng: np.random.Generator) -> int:
    """Adjacent index in an ordered set, reflecting at the boundaries."""
    if size == 1:
        return idx
    if idx == 0:
        return 1
    if idx == size - 1:
        return size - 2
    return idx + (1 if rng.integers(2) else -1)


def simulated_annealing(scenario: Scenario, cfg: NetworkConfig,
                        schedule: AnnealingSchedule, fp_iters: int,
                        tol: float = 0.0, r_bar: np.ndarray | None = None) -> SearchResult:
    """Metropolis search over the discrete beam sets.

    Starts from a uniformly random configuration; each step re-draws one
    parameter (beam width or direction) of one AP to an adjacent set value,
    accepts improvements always and deteriorations with probability
    exp(delta_c / T), then cools T geometrically.
    """
    if fp_iters < 1:
        raise ValueError("fp_iters must be >= 1")
    if r_bar is None:
        r_bar = channel.interference_free_rates(cfg, scenario)
    rng = np.random.default_rng(schedule.seed)
    base = channel.beam_independent_gains(cfg, scenario)
    table = channel.rx_gain_table(cfg, scenario)
    m_idx = np.arange(cfg.n_aps)

    def solve_digits(wi, di):
        h = base * table[m_idx, wi, di, :]
        return fixedpoint.solve(h, r_bar, cfg, max_iters=fp_iters, tol=tol)

    wi = rng.integers(0, cfg.n_beamwidths, cfg.n_aps)
    di = rng.integers(0, cfg.n_directions, cfg.n_aps)
    alloc = solve_digits(wi, di)
    current_c = alloc.fraction
    best = (wi.copy(), di.copy(), alloc)
    fp_total = alloc.iterations_used
    trace = [(fp_total, alloc.fraction)]

    temperature = schedule.initial_temperature
    for _ in range(schedule.steps):
        cand_wi, cand_di = wi.copy(), di.copy()
        ap = int(rng.integers(cfg.n_aps))
        if rng.integers(2):
            cand_di[ap] = _neighbor_index(int(cand_di[ap]), cfg.n_directions, rng)
        else:
            cand_wi[ap] = _neighbor_index(int(cand_wi[ap]), cfg.n_beamwidths, rng)
        cand_alloc = solve_digits(cand_wi, cand_di)
        fp_total += cand_alloc.iterations_used
        delta = cand_alloc.fraction - current_c
        if delta >= 0.0 or (temperature > 0.0 and rng.uniform() < np.exp(delta / temperature)):
            wi, di, current_c = cand_wi, cand_di, cand_alloc.fraction
        if cand_alloc.fraction > best[2].fraction:
            best = (cand_wi, cand_di, cand_alloc)
        trace.append((fp_total, best[2].fraction))
        temperature *= schedule.cooling_factor

    return SearchResult(
        config=beam_config_from_indices(cfg, best[0], best[1]),
        allocation=best[2],
        fp_iterations_total=fp_total,
        configs_probed=schedule.steps + 1,
        trace=tuple(trace),
    )


def naive_baseline(training_labels, mode: str = "joint") -> BeamConfig:
    """Most frequent beam configuration in a label collection.

    mode "joint" takes the mode of full tuples; "per_ap" takes per-AP
    marginal modes of widths and directions independently.  Ties resolve to
    the smallest tuple, which coincides with canonical enumeration order
    because the discrete sets are strictly increasing.
    """
    labels = list(training_labels)
    if not labels:
        raise ValueError("training_labels must be non-empty")
    if mode == "joint":
        counts = Counter((q.rx_beamwidths, q.rx_directions) for q in labels)
        (widths, directions), _ = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return BeamConfig(widths, directions)
    if mode == "per_ap":
        m = labels[0].n_aps
        widths = []
        directions = []
        for ap in range(m):
            wc = Counter(q.rx_beamwidths[ap] for q in labels)
            dc = Counter(q.rx_directions[ap] for q in labels)
            widths.append(min(wc.items(), key=lambda kv: (-kv[1], kv[0]))[0])
            directions.append(min(dc.items(), key=lambda kv: (-kv[1], kv[0]))[0])
        return BeamConfig(tuple(widths), tuple(directions))
    raise ValueError(f"unknown mode {mode!r}")
