"""Deterministic derivation of independent RNG streams from one master seed.

Every source of randomness in the simulator (partitioning, init, device
selection, SGD batches, dithers, fading, noise) gets its own stream keyed
by a tuple of labels, e.g. ``("sgd", trial, round, device)``. Distinct
label tuples give statistically independent streams; identical tuples give
identical streams on every platform, which is what makes whole experiment
runs byte-reproducible.

Derivation: the labels are serialized unambiguously, hashed with SHA-256
together with the master seed, and the first 128 bits of the digest seed a
``numpy.random.Generator`` (PCG64).
"""

from __future__ import annotations

import hashlib
from typing import Iterable, Union

import numpy as np

Label = Union[str, int]


def _label_bytes(labels: Iterable[Label]) -> bytes:
    out = bytearray()
    for lab in labels:
        if isinstance(lab, (bool,)):
            raise TypeError("bool labels are ambiguous; use int or str")
        if isinstance(lab, (int, np.integer)):
            out += b"i" + int(lab).to_bytes(8, "big", signed=True)
        elif isinstance(lab, str):
            enc = lab.encode("utf-8")
            out += b"s" + len(enc).to_bytes(4, "big") + enc
        else:
            raise TypeError(f"stream labels must be str or int, got {type(lab)!r}")
    return bytes(out)


def derive_seed(master_seed: int, labels: Iterable[Label] = ()) -> int:
    """Collision-resistant 128-bit seed for (master_seed, labels)."""
    h = hashlib.sha256()
    h.update(int(master_seed).to_bytes(32, "big", signed=True))
    h.update(_label_bytes(labels))
    return int.from_bytes(h.digest()[:16], "big")


def derive_stream(master_seed: int, labels: Iterable[Label] = ()) -> np.random.Generator:
    """Independent, reproducible generator for (master_seed, labels)."""
    return np.random.default_rng(np.random.SeedSequence(derive_seed(master_seed, labels)))
