"""Command-line entry points.

  ncairfl run --config cfg.json [--out metrics.csv] [--seed 123]
  ncairfl bound --config cfg.json
  ncairfl partition-report --config cfg.json
"""

from __future__ import annotations

import argparse
import sys
from collections import Counter

import numpy as np

from . import channel as ch
from .bound import BoundInputs, bound_terms, eta_max
from .config import parse_config
from .errors import ConfigError, IdxFormatError
from .harness import build_trial_setup, load_datasets, run_experiment, write_metrics


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.out is not None:
        cfg.output_path = args.out
    records = run_experiment(cfg)
    write_metrics(records, cfg.output_path)
    print(f"wrote {len(records)} records to {cfg.output_path}")
    return 0


def _cmd_bound(args) -> int:
    cfg = parse_config(args.config)
    if cfg.bound is None:
        raise ConfigError("invalid field 'bound': required for the bound subcommand")
    raw = dict(cfg.bound)
    snr = raw.pop("snr_min", None)
    if snr is None:
        # derive the worst-device SNR from the radio config like a run would
        setup, snr = build_trial_setup(cfg, 0, *_tiny_dataset_and_model(cfg))
    try:
        inputs = BoundInputs(
            smoothness=raw.pop("smoothness"),
            grad_sq_bound=raw.pop("grad_sq_bound"),
            grad_variance=raw.pop("grad_variance"),
            heterogeneity=raw.pop("heterogeneity"),
            f_gap=raw.pop("f_gap"),
            q_steps=cfg.q_steps,
            rounds=cfg.rounds,
            n=cfg.n,
            eta=cfg.eta,
            r=cfg.r,
            p=cfg.p,
            snr_min=snr,
            d=raw.pop("d", cfg.dataset.dims),
        )
    except KeyError as exc:
        raise ConfigError(f"invalid field 'bound': missing key {exc}") from exc
    if raw:
        raise ConfigError(f"invalid field 'bound': unknown keys {sorted(raw)}")
    bd = bound_terms(inputs)
    print(f"eta_max         = {eta_max(inputs.q_steps, inputs.smoothness)!r}")
    print(f"eta_valid       = {bd.eta_valid}")
    print(f"lambda          = {bd.lam!r}")
    print(f"snr_min         = {inputs.snr_min!r}")
    print(f"init_term       = {bd.init_term!r}")
    print(f"detection_term  = {bd.detection_term!r}")
    print(f"sgd_hetero_term = {bd.sgd_hetero_term!r}")
    print(f"contraction_term= {bd.contraction_term!r}")
    print(f"total           = {bd.total!r}")
    print("csv:term,value")
    for name in ("init_term", "detection_term", "sgd_hetero_term", "contraction_term", "total"):
        print(f"csv:{name},{getattr(bd, name)!r}")
    return 0


def _tiny_dataset_and_model(cfg):
    # partition/SNR reporting only needs shapes, not the full dataset
    from .data import synth_dataset
    from .model import QuadraticModel
    from .streams import derive_stream

    ds = synth_dataset(
        "quadratic-regression", 2, max(2 * cfg.n, 4),
        derive_stream(cfg.master_seed, ("bound-stub",)),
    )
    return ds, QuadraticModel(2)


def _cmd_partition_report(args) -> int:
    cfg = parse_config(args.config)
    train, test, model = load_datasets(cfg)
    setup, worst_snr = build_trial_setup(cfg, 0, train, model)
    print(f"dataset: kind={cfg.dataset.kind} train={len(train)} test={len(test)} "
          f"dim={train.dim}")
    print(f"partition_mode={cfg.partition_mode} n={cfg.n} snr_min={worst_snr!r}")
    for part, gain in zip(setup.partitions, setup.gains):
        labels = Counter(train.labels[part.sample_indices].tolist())
        hist = " ".join(f"{k}:{v}" for k, v in sorted(labels.items()))
        print(
            f"device {part.device_id:3d}: samples={len(part):6d} "
            f"distance_m={gain.distance_m:8.3f} kappa={gain.kappa:.3e} labels [{hist}]"
        )
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ncairfl",
        description="CSI-free over-the-air federated learning simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the experiment described by a config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None, help="override the config's output_path")
    p_run.add_argument("--seed", type=int, default=None, help="override master_seed")
    p_run.set_defaults(func=_cmd_run)

    p_bound = sub.add_parser("bound", help="print the convergence-bound breakdown")
    p_bound.add_argument("--config", required=True)
    p_bound.set_defaults(func=_cmd_bound)

    p_rep = sub.add_parser("partition-report", help="describe trial-0 partitions")
    p_rep.add_argument("--config", required=True)
    p_rep.set_defaults(func=_cmd_partition_report)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, IdxFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
