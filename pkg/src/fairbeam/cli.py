"""Command line entry point: dataset generation, training, evaluation, solving.

All randomness flows from one master seed per command; with --threads 1 the
primary outputs are byte-identical across reruns.  Exit codes: 0 success,
2 configuration or data-format errors, 3 I/O errors, 4 dimension mismatches.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import sys

import numpy as np

from . import __version__, beamsearch, channel, dataset, evaluation, fixedpoint, mlp
from .scenario import (
    ConfigError,
    NetworkConfig,
    Scenario,
    load_network_config,
    network_config_to_text,
    sort_rows,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DIMENSION = 4


def _default_threads() -> int:
    env = os.environ.get("FAIRBEAM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"FAIRBEAM_THREADS must be an integer, got {env!r}")
    return 1


def _load_config(path: str | None) -> NetworkConfig:
    if path is None:
        return NetworkConfig()
    return load_network_config(path)


def _write_manifest(out_path: str, command: str, args: argparse.Namespace,
                    cfg: NetworkConfig, outputs: list[str]) -> str:
    manifest = {
        "command": command,
        "arguments": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
        "config": network_config_to_text(cfg).splitlines(),
        "master_seed": getattr(args, "seed", None),
        "tool_version": __version__,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": outputs,
    }
    path = out_path + ".manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _sa_schedule(args) -> beamsearch.AnnealingSchedule:
    return beamsearch.AnnealingSchedule(
        initial_temperature=args.sa_t0,
        cooling_factor=args.sa_cooling,
        steps=args.sa_steps,
        seed=getattr(args, "seed", 0) or 0,
    )


def cmd_gen(args) -> int:
    cfg = _load_config(args.config)
    records = dataset.generate(
        n_samples=args.samples,
        cfg=cfg,
        mode=args.mode,
        oracle={"exhaustive": "exhaustive", "sa": "annealing"}[args.oracle],
        fp_iters=args.fp_iters,
        seed=args.seed,
        c2_center=(args.c2_center_x, args.c2_center_y),
        c2_radius=args.c2_radius,
        sa_schedule=_sa_schedule(args),
        n_workers=args.threads,
    )
    dataset.save(records, cfg, args.out)
    _write_manifest(args.out, "gen", args, cfg, [args.out])
    print(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    records = dataset.load(args.data, cfg)
    if not records:
        raise ConfigError(f"dataset {args.data} is empty")
    n_features = 3 * cfg.n_ues
    for r in records[:1]:
        if r.scenario.n_ues != cfg.n_ues:
            raise mlp.DimensionMismatchError(
                f"dataset has {r.scenario.n_ues} UEs per scenario, config expects {cfg.n_ues}")
    hidden = tuple(int(tok) for tok in args.hidden.split(",") if tok.strip())
    model, log = mlp.train(records, cfg, epochs=args.epochs, batch_size=args.batch,
                           seed=args.seed, decay_rho=args.rho, epsilon=args.eps,
                           hidden=hidden, jitter=args.jitter,
                           weight_decay=args.weight_decay,
                           average_tail=args.average_tail)
    mlp.save_model(model, args.out_model)
    log_path = args.out_model + ".train_log.csv"
    with open(log_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,loss,head_accuracy\n")
        for row in log:
            fh.write(f"{row['epoch']},{row['loss']!r},{row['head_accuracy']!r}\n")
    _write_manifest(args.out_model, "train", args, cfg, [args.out_model, log_path])
    print(f"trained {args.epochs} epochs on {len(records)} records "
          f"({n_features} features); final loss {log[-1]['loss']:.6f}, "
          f"head accuracy {log[-1]['head_accuracy']:.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_config(args.config)
    records = dataset.load(args.data, cfg)
    if not records:
        raise ConfigError(f"dataset {args.data} is empty")
    methods = [tok.strip() for tok in args.methods.split(",") if tok.strip()]
    for method in methods:
        if method not in evaluation.KNOWN_METHODS:
            raise ConfigError(f"unknown method {method!r}; choose from {evaluation.KNOWN_METHODS}")
    model = None
    if "neural" in methods:
        if args.model is None:
            raise ConfigError("--model is required when evaluating the neural method")
        model = mlp.load_model(args.model, cfg)
    train_records = None
    if "naive" in methods:
        if args.train_data is None:
            raise ConfigError("--train-data is required when evaluating the naive method")
        train_records = dataset.load(args.train_data, cfg)

    oracle = evaluation.oracle_fractions(records, cfg, args.fp_iters,
                                         n_workers=args.threads)
    schedule = _sa_schedule(args)
    if args.sweep:
        rows = evaluation.sweep(
            sa_schedules=[schedule] if "sa" in methods else [],
            one_shot_methods=[m for m in methods if m in ("neural", "naive", "exhaustive")],
            records=records, cfg=cfg, fp_iters_per_solve=args.fp_iters,
            oracle=oracle, model=model, train_records=train_records,
            distribution=args.distribution, n_workers=args.threads,
        )
    else:
        rows = []
        for method in methods:
            report = evaluation.evaluate(
                method, records, cfg, args.fp_iters, oracle=oracle, model=model,
                train_records=train_records, sa_schedule=schedule,
                distribution=args.distribution, n_workers=args.threads,
            )
            rows.append((report.method, report.distribution,
                         report.cumulative_fp_iterations, report.mean_efficiency,
                         report.sample_count))
    evaluation.export_report(rows, args.out)
    outputs = [args.out]
    if args.plot:
        evaluation.plot_sweep(rows, args.plot)
        outputs.append(args.plot)
    _write_manifest(args.out, "eval", args, cfg, outputs)
    for row in rows if len(rows) <= 12 else rows[-len(methods):]:
        print(f"{row[0]:12s} {row[1]:3s} budget={row[2]:>9d} efficiency={row[3]:.4f}")
    return EXIT_OK


def _read_scenario_file(path: str, cfg: NetworkConfig) -> Scenario:
    """Plain text scenario: one 'x_m y_m tx_direction_deg' row per UE."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ConfigError(f"{path}:{lineno}: expected 'x y direction_deg'")
            x, y, deg = (float(p) for p in parts)
            rows.append([x, y, math.radians(deg)])
    if not rows:
        raise ConfigError(f"{path}: no UE rows found")
    return Scenario(sort_rows(np.asarray(rows)))


def cmd_solve(args) -> int:
    cfg = _load_config(args.config)
    if (args.scenario_file is None) == (args.seed is None):
        raise ConfigError("provide exactly one of --scenario-file or --seed")
    if args.scenario_file is not None:
        scenario = _read_scenario_file(args.scenario_file, cfg)
    else:
        from .scenario import sample_scenario_c1
        scenario = sample_scenario_c1(cfg, np.random.default_rng(args.seed))

    if args.method == "exhaustive":
        result = beamsearch.exhaustive_search(scenario, cfg, args.fp_iters)
    elif args.method == "sa":
        result = beamsearch.simulated_annealing(scenario, cfg, _sa_schedule(args),
                                                args.fp_iters)
    elif args.method == "neural":
        if args.model is None:
            raise ConfigError("--model is required for the neural method")
        model = mlp.load_model(args.model, cfg)
        q = mlp.predict(model, scenario, cfg)
        r_bar = channel.interference_free_rates(cfg, scenario)
        h = channel.channel_matrix(cfg, scenario, q)
        alloc = fixedpoint.solve(h, r_bar, cfg, max_iters=args.fp_iters)
        result = beamsearch.SearchResult(q, alloc, alloc.iterations_used, 1)
    else:
        raise ConfigError(f"unknown method {args.method!r}")

    alloc = result.allocation
    print(f"method = {args.method}")
    print(f"fraction = {alloc.fraction!r}")
    print("powers_watts = " + " ".join(repr(float(p)) for p in alloc.powers))
    print("assignment = " + " ".join(str(int(a)) for a in alloc.assignment))
    print("beamwidths_deg = " + " ".join(repr(math.degrees(v)) for v in result.config.rx_beamwidths))
    print("directions_deg = " + " ".join(repr(math.degrees(v)) for v in result.config.rx_directions))
    print(f"residual = {alloc.residual!r}")
    print(f"fp_iterations = {result.fp_iterations_total}")
    return EXIT_OK


def _add_sa_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--sa-steps", type=int, default=200,
                        help="annealing steps (probes beyond the initial one)")
    parser.add_argument("--sa-t0", type=float, default=0.1,
                        help="initial annealing temperature on the c scale")
    parser.add_argument("--sa-cooling", type=float, default=0.98,
                        help="geometric cooling factor in (0,1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairbeam",
        description="Joint beam selection and max-min fair uplink power allocation toolkit",
    )
    parser.add_argument("--version", action="version", version=f"fairbeam {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a labeled dataset")
    gen.add_argument("--config", help="network configuration file (defaults used if omitted)")
    gen.add_argument("--samples", type=int, required=True)
    gen.add_argument("--mode", choices=("c1", "c2"), default="c1")
    gen.add_argument("--oracle", choices=("exhaustive", "sa"), default="exhaustive")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument("--fp-iters", type=int, default=100)
    gen.add_argument("--c2-center-x", type=float,
                     default=dataset.DEFAULT_C2_CENTER[0])
    gen.add_argument("--c2-center-y", type=float,
                     default=dataset.DEFAULT_C2_CENTER[1])
    gen.add_argument("--c2-radius", type=float, default=dataset.DEFAULT_C2_RADIUS)
    gen.add_argument("--threads", type=int, default=None)
    _add_sa_flags(gen)
    gen.set_defaults(func=cmd_gen)

    train = sub.add_parser("train", help="train the beam predictor")
    train.add_argument("--config", help="network configuration file")
    train.add_argument("--data", required=True, help="training dataset (jsonl)")
    train.add_argument("--epochs", type=int, default=500)
    train.add_argument("--batch", type=int, default=512)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--rho", type=float, default=0.95)
    train.add_argument("--eps", type=float, default=1e-6)
    train.add_argument("--hidden", default="200,200")
    train.add_argument("--jitter", type=float, default=0.0,
                       help="std (m) of per-epoch position perturbations")
    train.add_argument("--weight-decay", type=float, default=0.0,
                       help="per-step multiplicative weight shrinkage")
    train.add_argument("--average-tail", type=float, default=0.0,
                       help="fraction of final epochs to average into the checkpoint")
    train.add_argument("--out-model", required=True)
    train.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate methods on a test dataset")
    ev.add_argument("--config", help="network configuration file")
    ev.add_argument("--data", required=True, help="test dataset (jsonl)")
    ev.add_argument("--methods", default="exhaustive,neural,naive,sa")
    ev.add_argument("--fp-iters", type=int, default=100)
    ev.add_argument("--model", help="model checkpoint for the neural method")
    ev.add_argument("--train-data", help="training dataset for the naive method")
    ev.add_argument("--distribution", choices=("c1", "c2"), default="c1")
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--sweep", action="store_true",
                    help="emit efficiency-vs-cumulative-iterations rows")
    ev.add_argument("--plot", help="also write an SVG plot of the sweep")
    ev.add_argument("--out", required=True)
    ev.add_argument("--threads", type=int, default=None)
    _add_sa_flags(ev)
    ev.set_defaults(func=cmd_eval)

    solve = sub.add_parser("solve", help="solve a single scenario")
    solve.add_argument("--config", help="network configuration file")
    solve.add_argument("--scenario-file", help="text file with 'x y direction_deg' rows")
    solve.add_argument("--seed", type=int, help="sample a fresh uniform scenario instead")
    solve.add_argument("--method", choices=("exhaustive", "sa", "neural"),
                       default="exhaustive")
    solve.add_argument("--fp-iters", type=int, default=100)
    solve.add_argument("--model", help="model checkpoint for the neural method")
    _add_sa_flags(solve)
    solve.set_defaults(func=cmd_solve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None) is None and hasattr(args, "threads"):
        args.threads = _default_threads()
    try:
        return args.func(args)
    except mlp.DimensionMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except (ConfigError, dataset.DatasetFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
