"""Solution-efficiency evaluation and the efficiency-vs-iterations sweep.

Every method is scored per test sample as (its rate fraction) / (the
exhaustive-search fraction at the same fixed-point budget); the exhaustive
pass is computed once per sample and shared by all methods so denominators
are identical.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import beamsearch, channel, fixedpoint, mlp
from .scenario import NetworkConfig

ONE_SHOT_METHODS = ("neural", "naive")
KNOWN_METHODS = ("exhaustive", "neural", "naive", "sa")


@dataclass(frozen=True)
class EvaluationReport:
    method: str
    distribution: str
    mean_efficiency: float
    per_sample_efficiencies: np.ndarray
    fp_iteration_budget: int
    cumulative_fp_iterations: int
    sample_count: int


def _oracle_one(args):
    scenario, cfg, fp_iters = args
    result = beamsearch.exhaustive_search(scenario, cfg, fp_iters)
    return result.allocation.fraction


def oracle_fractions(records, cfg: NetworkConfig, fp_iters: int,
                     n_workers: int = 1) -> np.ndarray:
    """Exhaustive-search optimum per record at the evaluation budget."""
    jobs = [(r.scenario, cfg, fp_iters) for r in records]
    if n_workers <= 1:
        return np.array([_oracle_one(job) for job in jobs])
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        chunk = max(1, len(jobs) // (8 * n_workers))
        return np.array(list(pool.map(_oracle_one, jobs, chunksize=chunk)))


def _solve_config(scenario, cfg, q, fp_iters):
    r_bar = channel.interference_free_rates(cfg, scenario)
    h = channel.channel_matrix(cfg, scenario, q)
    return fixedpoint.solve(h, r_bar, cfg, max_iters=fp_iters)


def _score_one(args):
    scenario, cfg, q, fp_iters = args
    return _solve_config(scenario, cfg, q, fp_iters).fraction


def _method_fractions(method, records, cfg, fp_iters, model, train_records,
                      sa_schedule, n_workers):
    """Per-sample rate fraction achieved by a method's chosen configuration."""
    if method == "neural":
        if model is None:
            raise ValueError("method 'neural' requires a trained model")
        configs = [mlp.predict(model, r.scenario, cfg) for r in records]
    elif method == "naive":
        if not train_records:
            raise ValueError("method 'naive' requires training records")
        q = beamsearch.naive_baseline([r.label for r in train_records])
        configs = [q] * len(records)
    else:
        raise ValueError(f"unknown one-shot method {method!r}")
    jobs = [(r.scenario, cfg, q, fp_iters) for r, q in zip(records, configs)]
    if n_workers <= 1:
        return np.array([_score_one(job) for job in jobs])
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        chunk = max(1, len(jobs) // (8 * n_workers))
        return np.array(list(pool.map(_score_one, jobs, chunksize=chunk)))


def _sa_search_one(args):
    scenario, cfg, schedule, fp_iters, seed = args
    per_record = beamsearch.AnnealingSchedule(
        initial_temperature=schedule.initial_temperature,
        cooling_factor=schedule.cooling_factor,
        steps=schedule.steps,
        seed=seed,
    )
    result = beamsearch.simulated_annealing(scenario, cfg, per_record, fp_iters)
    return result.allocation.fraction, result.trace


def _sa_results(records, cfg, schedule, fp_iters, n_workers):
    jobs = [(r.scenario, cfg, schedule, fp_iters, schedule.seed + i)
            for i, r in enumerate(records)]
    if n_workers <= 1:
        return [_sa_search_one(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        chunk = max(1, len(jobs) // (4 * n_workers))
        return list(pool.map(_sa_search_one, jobs, chunksize=chunk))


def evaluate(method: str, records, cfg: NetworkConfig, fp_iters: int = 100,
             oracle: np.ndarray | None = None, model: mlp.MlpModel | None = None,
             train_records=None, sa_schedule: beamsearch.AnnealingSchedule | None = None,
             distribution: str = "c1", n_workers: int = 1) -> EvaluationReport:
    """Mean solution efficiency of one method over a test set."""
    records = list(records)
    if not records:
        raise ValueError("test set must be non-empty")
    if method not in KNOWN_METHODS:
        raise ValueError(f"unknown method {method!r}")
    if oracle is None:
        oracle = oracle_fractions(records, cfg, fp_iters, n_workers=n_workers)
    oracle = np.asarray(oracle, dtype=float)

    n_configs = cfg.n_beam_configs
    if method == "exhaustive":
        fractions = oracle.copy()
        cumulative = n_configs * fp_iters
    elif method == "sa":
        schedule = sa_schedule or beamsearch.AnnealingSchedule()
        fractions = np.array([c for c, _ in _sa_results(records, cfg, schedule,
                                                        fp_iters, n_workers)])
        cumulative = (schedule.steps + 1) * fp_iters
    else:
        fractions = _method_fractions(method, records, cfg, fp_iters, model,
                                      train_records, sa_schedule, n_workers)
        cumulative = fp_iters

    eff = fractions / oracle
    return EvaluationReport(
        method=method,
        distribution=distribution,
        mean_efficiency=float(eff.mean()),
        per_sample_efficiencies=eff,
        fp_iteration_budget=fp_iters,
        cumulative_fp_iterations=cumulative,
        sample_count=len(records),
    )


def sweep(sa_schedules, one_shot_methods, records, cfg: NetworkConfig,
          fp_iters_per_solve: int = 100, oracle: np.ndarray | None = None,
          model: mlp.MlpModel | None = None, train_records=None,
          distribution: str = "c1", n_workers: int = 1):
    """Efficiency as a function of cumulative fixed-point iterations.

    Simulated annealing produces one row per probe (mean best-so-far
    efficiency across samples); one-shot methods and the exhaustive oracle
    produce a single point plus a flat extension row at the largest
    cumulative budget in the table, mirroring a dashed-line marker.
    """
    records = list(records)
    if not records:
        raise ValueError("test set must be non-empty")
    if oracle is None:
        oracle = oracle_fractions(records, cfg, fp_iters_per_solve, n_workers=n_workers)
    oracle = np.asarray(oracle, dtype=float)

    sa_schedules = list(sa_schedules)
    curves = {}
    for i, schedule in enumerate(sa_schedules):
        name = "sa" if len(sa_schedules) == 1 else f"sa{i}"
        results = _sa_results(records, cfg, schedule, fp_iters_per_solve, n_workers)
        # with a fixed per-solve budget all traces share the same grid
        n_points = schedule.steps + 1
        grid = fp_iters_per_solve * np.arange(1, n_points + 1)
        best = np.stack([[c for _, c in trace] for _, trace in results])
        curves[name] = (grid, (best / oracle[:, None]).mean(axis=0))

    max_budget = cfg.n_beam_configs * fp_iters_per_solve
    for _, (grid, _) in curves.items():
        max_budget = max(max_budget, int(grid[-1]))

    rows = []
    for name, (grid, effs) in curves.items():
        for budget, eff in zip(grid, effs):
            rows.append((name, distribution, int(budget), float(eff), len(records)))

    for method in one_shot_methods:
        report = evaluate(method, records, cfg, fp_iters_per_solve, oracle=oracle,
                          model=model, train_records=train_records,
                          distribution=distribution, n_workers=n_workers)
        rows.append((method, distribution, report.cumulative_fp_iterations,
                     report.mean_efficiency, len(records)))
        if report.cumulative_fp_iterations < max_budget:
            rows.append((method, distribution, max_budget,
                         report.mean_efficiency, len(records)))
    return rows


CSV_HEADER = "method,distribution,cumulative_fp_iterations,mean_efficiency,sample_count"


def _format_row(row) -> str:
    method, distribution, cumulative, eff, count = row
    return f"{method},{distribution},{int(cumulative)},{float(eff)!r},{int(count)}"


def export_report(report_or_rows, path) -> None:
    """Write the evaluation CSV; identical inputs produce identical bytes."""
    if isinstance(report_or_rows, EvaluationReport):
        rows = [(report_or_rows.method, report_or_rows.distribution,
                 report_or_rows.cumulative_fp_iterations,
                 report_or_rows.mean_efficiency, report_or_rows.sample_count)]
    else:
        rows = list(report_or_rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in rows:
            fh.write(_format_row(row) + "\n")


def load_report(path):
    """Parse an exported CSV back into row tuples."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected report header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            method, distribution, cumulative, eff, count = line.split(",")
            rows.append((method, distribution, int(cumulative), float(eff), int(count)))
    return rows


def plot_sweep(rows, path) -> None:
    """Single-file SVG of the sweep; curves solid, one-shot points dashed flat."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    by_method: dict[str, list] = {}
    for method, _, cumulative, eff, _ in rows:
        by_method.setdefault(method, []).append((cumulative, eff))

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for method, points in sorted(by_method.items()):
        points.sort()
        x = [p[0] for p in points]
        y = [p[1] for p in points]
        if method.startswith("sa"):
            ax.plot(x, y, label=method)
        else:
            ax.plot(x[:1], y[:1], marker="o", linestyle="none", label=method)
            if len(points) > 1:
                ax.plot(x, y, linestyle="--", color=ax.get_lines()[-1].get_color())
    ax.set_xscale("log")
    ax.set_xlabel("cumulative fixed-point iterations")
    ax.set_ylabel("mean solution efficiency")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
