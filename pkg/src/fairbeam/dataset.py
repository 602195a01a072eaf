"""Labeled data generation, splitting and line-delimited persistence.

Every record stores the sampled scenario together with the search oracle's
best beam configuration and its rate fraction.  Records derive their own
seed from the master seed by index, so any record can be regenerated in
isolation and generation parallelizes over records without changing output.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import beamsearch
from .scenario import (
    BeamConfig,
    DimensionMismatchError,
    NetworkConfig,
    Scenario,
    angle_to_degrees,
    beam_config_from_indices,
    beam_config_indices,
    sample_scenario_c1,
    sample_scenario_c2,
)

SCHEMA_VERSION = 1

# fixed-point early-stop tolerance used for offline label construction
LABEL_SOLVE_TOL = 1e-7

# Default shifted test distribution: a distant-center disk whose accepted
# points tilt toward the bottom of the area while staying fully dispersed,
# so the shift probes robustness rather than a change in problem hardness.
DEFAULT_C2_CENTER = (0.0, -25.0)
DEFAULT_C2_RADIUS = 40.0


class DatasetFormatError(ValueError):
    """Malformed or incompatible dataset file."""


@dataclass(frozen=True)
class LabeledRecord:
    scenario: Scenario
    label: BeamConfig
    oracle_fraction: float
    oracle: str
    seed: int


def record_seeds(master_seed: int, n_samples: int) -> np.ndarray:
    """Per-record seeds; element i depends only on (master_seed, i)."""
    return np.random.default_rng(master_seed).integers(0, 2**63 - 1, size=n_samples)


def _sample(cfg: NetworkConfig, mode: str, seed: int,
            c2_center: tuple[float, float], c2_radius: float) -> Scenario:
    rng = np.random.default_rng(int(seed))
    if mode == "c1":
        return sample_scenario_c1(cfg, rng)
    if mode == "c2":
        return sample_scenario_c2(cfg, rng, center=c2_center, radius=c2_radius)
    raise ValueError(f"unknown mode {mode!r}")


def _generate_one(args) -> LabeledRecord:
    (cfg, mode, oracle, fp_iters, seed, c2_center, c2_radius, sa_schedule) = args
    scenario = _sample(cfg, mode, seed, c2_center, c2_radius)
    if oracle == "exhaustive":
        result = beamsearch.exhaustive_search(scenario, cfg, fp_iters, tol=LABEL_SOLVE_TOL)
    elif oracle == "annealing":
        schedule = sa_schedule or beamsearch.AnnealingSchedule()
        schedule = beamsearch.AnnealingSchedule(
            initial_temperature=schedule.initial_temperature,
            cooling_factor=schedule.cooling_factor,
            steps=schedule.steps,
            seed=int(seed),
        )
        result = beamsearch.simulated_annealing(scenario, cfg, schedule, fp_iters,
                                                tol=LABEL_SOLVE_TOL)
    else:
        raise ValueError(f"unknown oracle {oracle!r}")
    return LabeledRecord(
        scenario=scenario,
        label=result.config,
        oracle_fraction=result.allocation.fraction,
        oracle=oracle,
        seed=int(seed),
    )


def generate(n_samples: int, cfg: NetworkConfig, mode: str = "c1",
             oracle: str = "exhaustive", fp_iters: int = 100, seed: int = 0,
             c2_center: tuple[float, float] = DEFAULT_C2_CENTER,
             c2_radius: float = DEFAULT_C2_RADIUS,
             sa_schedule: beamsearch.AnnealingSchedule | None = None,
             n_workers: int = 1) -> list[LabeledRecord]:
    """Sample n_samples scenarios and label each with the oracle's best config."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    seeds = record_seeds(seed, n_samples)
    jobs = [(cfg, mode, oracle, fp_iters, int(s), c2_center, c2_radius, sa_schedule)
            for s in seeds]
    if n_workers <= 1:
        return [_generate_one(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        chunk = max(1, n_samples // (8 * n_workers))
        return list(pool.map(_generate_one, jobs, chunksize=chunk))


def split(records, train_fraction: float, seed: int = 0):
    """Seeded shuffle then partition into (train, test); both sides non-empty."""
    records = list(records)
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    n_train = int(round(train_fraction * len(records)))
    if n_train == 0 or n_train == len(records):
        raise ValueError("split would leave an empty train or test side")
    order = np.random.default_rng(seed).permutation(len(records))
    train = [records[i] for i in order[:n_train]]
    test = [records[i] for i in order[n_train:]]
    return train, test


def _record_to_json(record: LabeledRecord, cfg: NetworkConfig) -> str:
    wi, di = beam_config_indices(cfg, record.label)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "oracle": record.oracle,
        "seed": record.seed,
        "oracle_fraction": record.oracle_fraction,
        "positions": [[float(x), float(y)] for x, y in record.scenario.positions],
        "tx_directions_deg": [angle_to_degrees(v) for v in record.scenario.tx_directions],
        "label_width_indices": [int(v) for v in wi],
        "label_direction_indices": [int(v) for v in di],
    }
    return json.dumps(payload, separators=(",", ":"))


def save(records, cfg: NetworkConfig, path) -> None:
    """Write one JSON object per line; floats use shortest round-trip decimals."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(_record_to_json(record, cfg))
            fh.write("\n")


_REQUIRED_FIELDS = ("schema_version", "oracle", "seed", "oracle_fraction",
                    "positions", "tx_directions_deg", "label_width_indices",
                    "label_direction_indices")


def _record_from_json(line: str, cfg: NetworkConfig, lineno: int) -> LabeledRecord:
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
    if not isinstance(payload, dict):
        raise DatasetFormatError(f"line {lineno}: expected a JSON object")
    for name in _REQUIRED_FIELDS:
        if name not in payload:
            raise DatasetFormatError(f"line {lineno}: missing field {name!r}")
    if payload["schema_version"] != SCHEMA_VERSION:
        raise DatasetFormatError(
            f"line {lineno}: schema version {payload['schema_version']!r} "
            f"is not supported (expected {SCHEMA_VERSION})")
    wi, di = payload["label_width_indices"], payload["label_direction_indices"]
    if (len(wi) != cfg.n_aps or len(di) != cfg.n_aps
            or any(not 0 <= int(v) < cfg.n_beamwidths for v in wi)
            or any(not 0 <= int(v) < cfg.n_directions for v in di)):
        raise DimensionMismatchError(
            f"line {lineno}: label indices do not fit the configuration "
            f"({cfg.n_aps} APs, {cfg.n_beamwidths}x{cfg.n_directions} beam sets)")
    try:
        positions = np.asarray(payload["positions"], dtype=float)
        tx = np.asarray([math.radians(v) for v in payload["tx_directions_deg"]])
        label = beam_config_from_indices(cfg, wi, di)
        if positions.ndim != 2 or positions.shape[1] != 2 or positions.shape[0] != tx.size:
            raise ValueError("positions and directions are inconsistent")
        scenario = Scenario(np.column_stack([positions, tx]))
        return LabeledRecord(
            scenario=scenario,
            label=label,
            oracle_fraction=float(payload["oracle_fraction"]),
            oracle=str(payload["oracle"]),
            seed=int(payload["seed"]),
        )
    except (ValueError, TypeError) as exc:
        raise DatasetFormatError(f"line {lineno}: {exc}") from exc


def load(path, cfg: NetworkConfig) -> list[LabeledRecord]:
    """Read a line-delimited record file; empty files yield an empty list."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            records.append(_record_from_json(line, cfg, lineno))
    return records
