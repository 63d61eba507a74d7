"""Binary-dither codec with error-feedback memory.

The uplink payload of each device is a non-negative vector: the device adds
its error memory to the fresh model difference, multiplies by a shared
per-round random sign vector, and clips negatives to zero. The receiver,
which can regenerate the same sign vector from the shared seed, undoes the
dither by re-multiplying its aggregate estimate with the signs. Whatever a
device could not transmit this round (the sign-mismatched part) stays in
its memory and is retried later.

Key algebraic facts used by the tests:
  * conservation: signs*g + m_next == m + delta, entry by entry, bitwise
    (multiplying by +-1 and subtracting an equal value are exact in IEEE754);
  * complementarity: g * m_next == 0 entrywise;
  * contraction: averaging over the dither, the residual keeps only the
    sign-mismatched mass, E||m+delta - signs*g||^2 <= (1-lambda)*||m+delta||^2
    with lambda = min(p, 1-p), met with equality at p = 1/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .streams import derive_stream


@dataclass(frozen=True)
class DitherVector:
    """Shared +-1 sign vector for one round, regenerable from (seed, round)."""

    signs: np.ndarray  # float64 entries, each exactly +1.0 or -1.0
    round_index: int

    def __post_init__(self):
        if not np.all(np.abs(self.signs) == 1.0):
            raise ValueError("dither entries must be exactly +-1")


def gen_dither(master_seed: int, round_index: int, d: int, p: float = 0.5) -> DitherVector:
    """Draw the round's i.i.d. sign vector: +1 w.p. p, -1 w.p. 1-p.

    Deterministic in (master_seed, round_index): server and devices call
    this independently and obtain identical signs without communicating.
    """
    if not 0.0 < p < 1.0:
        raise ConfigError(f"dither probability p must be in (0,1), got {p}")
    rng = derive_stream(master_seed, ("dither", round_index))
    signs = np.where(rng.random(d) < p, 1.0, -1.0)
    return DitherVector(signs=signs, round_index=round_index)


def encode(m: np.ndarray, delta: np.ndarray, phi: DitherVector) -> np.ndarray:
    """Non-negative transmit payload: clip((memory + difference) * signs, 0)."""
    signs = phi.signs
    if not (m.shape == delta.shape == signs.shape):
        raise ValueError(
            f"length mismatch: m {m.shape}, delta {delta.shape}, signs {signs.shape}"
        )
    return np.maximum((m + delta) * signs, 0.0)


def update_memory(
    m: np.ndarray,
    delta: np.ndarray,
    phi: DitherVector,
    g: np.ndarray,
    active: bool,
) -> np.ndarray:
    """Carry the untransmitted residual forward; inactive devices keep m.

    For an active device the new memory is (m + delta) - signs*g, which is
    exactly the part of m + delta whose sign disagreed with the dither.
    """
    if not active:
        return m
    return (m + delta) - phi.signs * g


def decode(r: np.ndarray, phi: DitherVector, eta: float) -> np.ndarray:
    """Remove the dither from the receiver statistic: eta * signs * r."""
    signs = phi.signs
    if r.shape != signs.shape:
        raise ValueError(f"length mismatch: r {r.shape}, signs {signs.shape}")
    return eta * (signs * r)


def contraction_expectation(v: np.ndarray, p: float) -> float:
    """Closed-form E over dithers of ||v - signs*clip(v*signs, 0)||^2.

    Per entry the residual is v_j exactly when the drawn sign disagrees
    with sign(v_j), so the expectation is
    sum_{v_j>0} (1-p) v_j^2 + sum_{v_j<0} p v_j^2. Entries at zero never
    contribute.
    """
    if not 0.0 < p < 1.0:
        raise ConfigError(f"dither probability p must be in (0,1), got {p}")
    v = np.asarray(v, dtype=np.float64)
    vsq = v * v
    return float(np.sum(np.where(v > 0, (1.0 - p) * vsq, np.where(v < 0, p * vsq, 0.0))))
