"""Experiment configuration: JSON parsing, validation, unit conversion.

Field names carry explicit units (``sigma2_dbm``, ``power_watts``,
``f_c_hz``) because the physical constants mix dBm, Watts and GHz; the
conversion to Watts happens exactly once, here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Union

from .channel import dbm_to_watts
from .errors import ConfigError
from .schemes import SCHEME_NAMES

DATASET_KINDS = ("mnist_idx", "blobs", "quadratic")
PARTITION_MODES = ("iid", "noniid")

# 10% truncation probability under unit-variance Rayleigh fading
DEFAULT_GAMMA_TH = math.sqrt(-math.log(0.9))


@dataclass
class DatasetSpec:
    kind: str
    train_images: Optional[str] = None
    train_labels: Optional[str] = None
    test_images: Optional[str] = None
    test_labels: Optional[str] = None
    dims: int = 784
    train_size: int = 4000
    test_size: int = 1000
    separation: float = 6.0
    noise: float = 0.1


@dataclass
class ExperimentConfig:
    schemes: List[str]
    n: int
    rounds: int  # T
    q_steps: int  # Q
    r: float
    p: float
    eta: float
    batch_size: int
    power_watts: Union[float, List[float]]
    sigma2_dbm: float
    f_c_hz: float
    distance_seed: int
    trials: int
    dataset: DatasetSpec
    partition_mode: str
    eval_every: int
    master_seed: int
    output_path: str = "metrics.csv"
    rho_cap: float = 1e12
    gamma_th: float = DEFAULT_GAMMA_TH
    subset_fraction: float = 1.0
    record_wall_ms: bool = False
    bound: Optional[dict] = None
    sigma2_watts: float = field(init=False, default=0.0)

    def __post_init__(self):
        self.sigma2_watts = dbm_to_watts(self.sigma2_dbm)

    def device_powers(self) -> List[float]:
        if isinstance(self.power_watts, (int, float)):
            return [float(self.power_watts)] * self.n
        return [float(p) for p in self.power_watts]


def _require(cond: bool, field_name: str, detail: str) -> None:
    if not cond:
        raise ConfigError(f"invalid field {field_name!r}: {detail}")


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    _require(len(cfg.schemes) > 0, "schemes", "must list at least one scheme")
    for s in cfg.schemes:
        _require(s in SCHEME_NAMES, "schemes", f"unknown scheme {s!r}, expected {SCHEME_NAMES}")
    _require(cfg.n >= 1, "n", "must be >= 1")
    _require(cfg.rounds >= 1, "rounds", "must be >= 1")
    _require(cfg.q_steps >= 1, "q_steps", "must be >= 1")
    _require(cfg.trials >= 1, "trials", "must be >= 1")
    _require(0.0 < cfg.r <= 1.0, "r", "must be in (0, 1]")
    rn = cfg.r * cfg.n
    _require(abs(rn - round(rn)) < 1e-9 and round(rn) >= 1, "r",
             f"r*n must be a positive integer, got {rn}")
    _require(0.0 < cfg.p < 1.0, "p", "must be in (0, 1)")
    _require(cfg.eta > 0.0, "eta", "must be > 0")
    _require(cfg.batch_size >= 1, "batch_size", "must be >= 1")
    powers = cfg.device_powers()
    _require(len(powers) == cfg.n, "power_watts",
             f"need 1 or {cfg.n} values, got {len(powers)}")
    _require(all(p > 0 for p in powers), "power_watts", "must be positive")
    _require(cfg.f_c_hz > 0, "f_c_hz", "must be positive")
    _require(cfg.eval_every >= 1, "eval_every", "must be >= 1")
    _require(cfg.rho_cap > 0, "rho_cap", "must be positive")
    _require(cfg.gamma_th >= 0, "gamma_th", "must be >= 0")
    _require(0.0 < cfg.subset_fraction <= 1.0, "subset_fraction", "must be in (0, 1]")
    _require(cfg.partition_mode in PARTITION_MODES, "partition_mode",
             f"expected one of {PARTITION_MODES}")
    _require(cfg.dataset.kind in DATASET_KINDS, "dataset.kind",
             f"expected one of {DATASET_KINDS}")
    if cfg.dataset.kind == "mnist_idx":
        for name in ("train_images", "train_labels", "test_images", "test_labels"):
            _require(getattr(cfg.dataset, name) is not None, f"dataset.{name}",
                     "required for mnist_idx datasets")
    else:
        _require(cfg.dataset.dims >= 1, "dataset.dims", "must be >= 1")
        _require(cfg.dataset.train_size >= 2, "dataset.train_size", "must be >= 2")
        _require(cfg.dataset.test_size >= 1, "dataset.test_size", "must be >= 1")
    return cfg


def from_dict(raw: dict) -> ExperimentConfig:
    known_dataset = {f for f in DatasetSpec.__dataclass_fields__}
    ds_raw = raw.get("dataset")
    if not isinstance(ds_raw, dict) or "kind" not in ds_raw:
        raise ConfigError("invalid field 'dataset': must be an object with a 'kind'")
    unknown = set(ds_raw) - known_dataset
    if unknown:
        raise ConfigError(f"invalid field 'dataset': unknown keys {sorted(unknown)}")
    dataset = DatasetSpec(**ds_raw)

    required = [
        "schemes", "n", "rounds", "q_steps", "r", "p", "eta", "batch_size",
        "power_watts", "sigma2_dbm", "f_c_hz", "distance_seed", "trials",
        "partition_mode", "eval_every", "master_seed",
    ]
    for name in required:
        if name not in raw:
            raise ConfigError(f"invalid field {name!r}: missing")
    optional = {
        "output_path": "metrics.csv",
        "rho_cap": 1e12,
        "gamma_th": DEFAULT_GAMMA_TH,
        "subset_fraction": 1.0,
        "record_wall_ms": False,
        "bound": None,
    }
    known = set(required) | set(optional) | {"dataset"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")

    kwargs = {name: raw[name] for name in required}
    kwargs.update({name: raw.get(name, default) for name, default in optional.items()})
    kwargs["dataset"] = dataset
    try:
        cfg = ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return validate(cfg)


def parse_config(path: str) -> ExperimentConfig:
    """Load, validate, and unit-convert a JSON experiment config."""
    with open(path, "r", encoding="utf-8") as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return from_dict(raw)
