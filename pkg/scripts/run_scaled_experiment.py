#!/usr/bin/env python3
"""Desk-scale reproduction of the solution-efficiency experiment.

Generates exhaustively labeled C1 training data, trains the one-shot beam
predictor, evaluates every method on matched (C1) and shifted (C2) test
distributions, and emits the efficiency-vs-fixed-point-iterations sweep
(CSV plus SVG).  All outputs land in --outdir together with the datasets
and the model checkpoint, so partial reruns skip completed stages.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from fairbeam import dataset, evaluation, mlp
from fairbeam.beamsearch import AnnealingSchedule
from fairbeam.scenario import NetworkConfig, load_network_config, save_network_config


def parse_args():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", help="network config file (defaults if omitted)")
    parser.add_argument("--train-samples", type=int, default=20_000)
    parser.add_argument("--test-samples", type=int, default=2_000)
    parser.add_argument("--epochs", type=int, default=500)
    parser.add_argument("--batch", type=int, default=512)
    parser.add_argument("--jitter", type=float, default=0.3,
                        help="training-time position jitter std in meters")
    parser.add_argument("--weight-decay", type=float, default=3e-4,
                        help="per-step multiplicative weight shrinkage")
    parser.add_argument("--average-tail", type=float, default=0.3,
                        help="fraction of final epochs averaged into the checkpoint")
    parser.add_argument("--fp-iters", type=int, default=100)
    parser.add_argument("--sa-steps", type=int, default=300)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int,
                        default=max(1, min(os.cpu_count() or 1, 4)))
    parser.add_argument("--outdir", default="results")
    return parser.parse_args()


def stage(name):
    print(f"== {name}", flush=True)
    return time.time()


def main():
    args = parse_args()
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg = load_network_config(args.config) if args.config else NetworkConfig()
    save_network_config(cfg, outdir / "network.cfg")

    datasets = {}
    specs = [("train", "c1", args.train_samples, 101),
             ("test_c1", "c1", args.test_samples, 202),
             ("test_c2", "c2", args.test_samples, 303)]
    for name, mode, n, seed in specs:
        path = outdir / f"{name}.jsonl"
        if path.exists():
            datasets[name] = dataset.load(path, cfg)
            print(f"== {name}: reusing {len(datasets[name])} records from {path}")
            continue
        t0 = stage(f"{name}: labeling {n} {mode.upper()} samples "
                   f"({args.threads} workers)")
        datasets[name] = dataset.generate(n, cfg, mode=mode, seed=seed + args.seed,
                                          fp_iters=args.fp_iters,
                                          n_workers=args.threads)
        dataset.save(datasets[name], cfg, path)
        print(f"   done in {time.time() - t0:.0f}s")

    model_path = outdir / "model.json"
    if model_path.exists():
        model = mlp.load_model(model_path, cfg)
        print(f"== model: reusing checkpoint {model_path}")
    else:
        t0 = stage(f"training: {args.epochs} epochs, batch {args.batch}, "
                   f"jitter {args.jitter} m")
        model, log = mlp.train(datasets["train"], cfg, epochs=args.epochs,
                               batch_size=args.batch, seed=args.seed,
                               jitter=args.jitter,
                               weight_decay=args.weight_decay,
                               average_tail=args.average_tail)
        mlp.save_model(model, model_path)
        with open(outdir / "train_log.csv", "w", encoding="utf-8") as fh:
            fh.write("epoch,loss,head_accuracy\n")
            for row in log:
                fh.write(f"{row['epoch']},{row['loss']!r},{row['head_accuracy']!r}\n")
        print(f"   done in {time.time() - t0:.0f}s "
              f"(final loss {log[-1]['loss']:.4f})")

    t0 = stage("evaluation: oracle pass and all methods")
    schedule = AnnealingSchedule(steps=args.sa_steps, seed=args.seed)
    summary = {}
    rows = []
    for dist, records in (("c1", datasets["test_c1"]), ("c2", datasets["test_c2"])):
        oracle = evaluation.oracle_fractions(records, cfg, args.fp_iters,
                                             n_workers=args.threads)
        for method, kwargs in (
            ("exhaustive", {}),
            ("neural", {"model": model}),
            ("naive", {"train_records": datasets["train"]}),
            ("sa", {"sa_schedule": schedule}),
        ):
            report = evaluation.evaluate(method, records, cfg, args.fp_iters,
                                         oracle=oracle, distribution=dist,
                                         n_workers=args.threads, **kwargs)
            rows.append((report.method, dist, report.cumulative_fp_iterations,
                         report.mean_efficiency, report.sample_count))
            summary[f"{method}_{dist}"] = report.mean_efficiency
            print(f"   {method:10s} {dist}: {report.mean_efficiency:.4f}")
        if dist == "c1":
            sweep_rows = evaluation.sweep([schedule], ["exhaustive", "neural", "naive"],
                                          records, cfg, args.fp_iters, oracle=oracle,
                                          model=model,
                                          train_records=datasets["train"],
                                          distribution=dist,
                                          n_workers=args.threads)
            evaluation.export_report(sweep_rows, outdir / "sweep_c1.csv")
            evaluation.plot_sweep(sweep_rows, outdir / "sweep_c1.svg")
    evaluation.export_report(rows, outdir / "summary.csv")
    print(f"   done in {time.time() - t0:.0f}s")

    gap = summary["neural_c1"] - summary["naive_c1"]
    shift = summary["neural_c2"] - summary["neural_c1"]
    summary["neural_minus_naive_c1"] = gap
    summary["neural_c2_minus_c1"] = shift
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    print(f"== neural-naive gap (C1): {gap:+.4f}; C2-C1 shift: {shift:+.4f}")
    print(f"== artifacts in {outdir}/")


if __name__ == "__main__":
    main()
