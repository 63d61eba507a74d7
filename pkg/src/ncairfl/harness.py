"""Experiment runner: trial loops, evaluation cadence, CSV metrics.

A run is a pure function of (config, master_seed): every random draw comes
from a stream keyed by what it is for, schemes inside a trial share the
distance draws, partitions, initial model, and device-selection sequence,
and records are emitted in canonical (scheme, trial, round) order, so two
invocations produce byte-identical CSV files.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from typing import List

import numpy as np

from . import channel as ch
from .config import ExperimentConfig
from .data import Batch, Dataset, load_idx, partition, synth_dataset
from .errors import ConfigError, DivergenceError, NumericOverflowError
from .model import MLP_INPUT, MlpModel, QuadraticModel
from .schemes import RoundState, TrialSetup, build_round_rngs, run_round
from .streams import derive_seed, derive_stream

CSV_COLUMNS = (
    "scheme",
    "trial",
    "round",
    "train_loss",
    "test_accuracy",
    "grad_norm_sq",
    "rho",
    "snr_min",
    "wall_ms",
)

PROBE_SIZE = 1024


@dataclass
class MetricsRecord:
    scheme: str
    trial: int
    round: int
    train_loss: float
    test_accuracy: float
    grad_norm_sq: float
    rho: float
    snr_min: float
    wall_ms: float


def evaluate(model, theta: np.ndarray, test: Dataset) -> tuple[float, float]:
    """Accuracy and mean loss of a flat parameter vector on a test split."""
    return model.evaluate(theta, test)


def _subsample(dataset: Dataset, fraction: float, rng: np.random.Generator) -> Dataset:
    if fraction >= 1.0:
        return dataset
    keep = max(2, int(len(dataset) * fraction))
    idx = np.sort(rng.choice(len(dataset), size=keep, replace=False))
    targets = dataset.targets[idx] if dataset.targets is not None else None
    return Dataset(
        features=dataset.features[idx],
        labels=dataset.labels[idx],
        split=dataset.split,
        targets=targets,
    )


def _split(full: Dataset, train_size: int) -> tuple[Dataset, Dataset]:
    train = Dataset(
        features=full.features[:train_size],
        labels=full.labels[:train_size],
        split="train",
        targets=None if full.targets is None else full.targets[:train_size],
    )
    test = Dataset(
        features=full.features[train_size:],
        labels=full.labels[train_size:],
        split="test",
        targets=None if full.targets is None else full.targets[train_size:],
    )
    return train, test


def load_datasets(cfg: ExperimentConfig) -> tuple[Dataset, Dataset, object]:
    """Build (train, test, model) from the config's dataset spec.

    Synthetic train/test splits are cut from one draw so they share the
    same class geometry (blobs) or the same ground-truth coefficients
    (quadratic). subset_fraction subsamples both splits.
    """
    spec = cfg.dataset
    if spec.kind == "mnist_idx":
        train = load_idx(spec.train_images, spec.train_labels, split="train")
        test = load_idx(spec.test_images, spec.test_labels, split="test")
        model: object = MlpModel()
    elif spec.kind == "blobs":
        rng = derive_stream(cfg.master_seed, ("dataset", "blobs"))
        full = synth_dataset(
            "blobs", spec.dims, spec.train_size + spec.test_size, rng,
            separation=spec.separation,
        )
        order = derive_stream(cfg.master_seed, ("dataset", "split")).permutation(len(full))
        full = Dataset(features=full.features[order], labels=full.labels[order])
        train, test = _split(full, spec.train_size)
        model = MlpModel()
    elif spec.kind == "quadratic":
        rng = derive_stream(cfg.master_seed, ("dataset", "quadratic"))
        full = synth_dataset(
            "quadratic-regression", spec.dims, spec.train_size + spec.test_size,
            rng, noise=spec.noise,
        )
        train, test = _split(full, spec.train_size)
        model = QuadraticModel(spec.dims)
    else:
        raise ConfigError(f"unknown dataset kind {spec.kind!r}")

    if spec.kind != "quadratic" and train.dim != MLP_INPUT:
        raise ConfigError(
            f"classification datasets must have {MLP_INPUT} features, got {train.dim}"
        )
    sub_rng = derive_stream(cfg.master_seed, ("subset",))
    train = _subsample(train, cfg.subset_fraction, sub_rng)
    test = _subsample(test, cfg.subset_fraction, sub_rng)
    return train, test, model


def _draw_distances(cfg: ExperimentConfig, trial: int) -> np.ndarray:
    rng = derive_stream(cfg.distance_seed, ("distance", trial))
    dist = rng.uniform(0.0, 100.0, cfg.n)
    while np.any(dist <= 0.0):
        dist[dist <= 0.0] = rng.uniform(0.0, 100.0, int(np.sum(dist <= 0.0)))
    return dist


def _probe_batch(train: Dataset, cfg: ExperimentConfig, trial: int) -> Batch:
    rng = derive_stream(cfg.master_seed, ("probe", trial))
    size = min(PROBE_SIZE, len(train))
    idx = np.sort(rng.choice(len(train), size=size, replace=False))
    targets = train.targets[idx] if train.targets is not None else None
    return Batch(features=train.features[idx], labels=train.labels[idx], targets=targets)


def _eval_rounds(rounds: int, eval_every: int) -> List[int]:
    marks = set(range(0, rounds + 1, eval_every))
    marks.add(rounds)
    return sorted(marks)


def build_trial_setup(
    cfg: ExperimentConfig, trial: int, train: Dataset, model
) -> tuple[TrialSetup, float]:
    """Per-trial static context shared by all schemes, plus worst-case SNR."""
    distances = _draw_distances(cfg, trial)
    gains = [ch.path_loss(dist, cfg.f_c_hz) for dist in distances]
    powers = np.asarray(cfg.device_powers())
    worst_snr = ch.snr_min(powers, gains, cfg.sigma2_watts)
    partitions = partition(
        train, cfg.n, cfg.partition_mode,
        derive_stream(cfg.master_seed, ("partition", trial)),
    )
    setup = TrialSetup(
        model=model,
        dataset=train,
        partitions=partitions,
        gains=gains,
        powers=powers,
        sigma2=cfg.sigma2_watts,
        eta=cfg.eta,
        q_steps=cfg.q_steps,
        batch_size=cfg.batch_size,
        r=cfg.r,
        n=cfg.n,
        p=cfg.p,
        rho_cap=cfg.rho_cap,
        gamma_th=cfg.gamma_th,
        dither_seed=derive_seed(cfg.master_seed, ("dither-master", trial)),
    )
    return setup, worst_snr


def run_experiment(cfg: ExperimentConfig) -> List[MetricsRecord]:
    """Run every (scheme, trial) pair in the config and return one record
    per evaluation round, in canonical order. A diverging scheme yields a
    NaN-valued record at the failing round and the run moves on."""
    train, test, model = load_datasets(cfg)
    eval_rounds = _eval_rounds(cfg.rounds, cfg.eval_every)
    records: List[MetricsRecord] = []

    for trial in range(cfg.trials):
        setup, worst_snr = build_trial_setup(cfg, trial, train, model)
        probe = _probe_batch(train, cfg, trial)
        theta0 = model.init_params(derive_stream(cfg.master_seed, ("init", trial)))

        for scheme in cfg.schemes:
            state = RoundState(
                theta=theta0.copy(), memories=np.zeros((cfg.n, model.dim)), round=0
            )
            last_rho = float("nan")
            t_start = time.perf_counter()

            def emit(round_index: int, diverged: bool = False) -> None:
                nonlocal t_start
                if diverged:
                    loss = acc = gsq = float("nan")
                else:
                    loss = model.loss(state.theta, probe)
                    g = model.grad(state.theta, probe)
                    gsq = float(g @ g)
                    acc, _ = evaluate(model, state.theta, test)
                wall = (
                    (time.perf_counter() - t_start) * 1e3 if cfg.record_wall_ms else 0.0
                )
                t_start = time.perf_counter()
                records.append(
                    MetricsRecord(
                        scheme=scheme,
                        trial=trial,
                        round=round_index,
                        train_loss=loss,
                        test_accuracy=acc,
                        grad_norm_sq=gsq,
                        rho=last_rho,
                        snr_min=worst_snr,
                        wall_ms=wall,
                    )
                )

            emit(0)
            for t in range(cfg.rounds):
                rngs = build_round_rngs(cfg.master_seed, scheme, trial, t, cfg.n)
                try:
                    state, info = run_round(scheme, state, setup, rngs)
                except (DivergenceError, NumericOverflowError):
                    emit(t + 1, diverged=True)
                    break
                last_rho = info.rho
                if (t + 1) in eval_rounds:
                    emit(t + 1)

    records.sort(key=lambda rec: (rec.scheme, rec.trial, rec.round))
    return records


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else "nan"
    return str(value)


def write_metrics(records: List[MetricsRecord], path: str) -> None:
    """Write records as CSV with a fixed header and '.' decimals."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow([_fmt(getattr(rec, col)) for col in CSV_COLUMNS])


def read_metrics(path: str) -> List[MetricsRecord]:
    records = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            records.append(
                MetricsRecord(
                    scheme=row["scheme"],
                    trial=int(row["trial"]),
                    round=int(row["round"]),
                    train_loss=float(row["train_loss"]),
                    test_accuracy=float(row["test_accuracy"]),
                    grad_norm_sq=float(row["grad_norm_sq"]),
                    rho=float(row["rho"]),
                    snr_min=float(row["snr_min"]),
                    wall_ms=float(row["wall_ms"]),
                )
            )
    return records
