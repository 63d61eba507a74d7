"""Physical-layer simulation: path loss, fading, superposition, detection.

All active devices transmit simultaneously on d parallel flat subcarriers.
The receiver sees the superposition of the faded signals plus circularly
symmetric complex Gaussian noise. The non-coherent receiver applies a
square-law detector per subcarrier and debiases by the noise variance,
which yields an unbiased estimate of the sum of transmitted powers without
any channel knowledge.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

SPEED_OF_LIGHT = 2.998e8  # m/s

# One-sided multiplicative back-off used to keep the power constraint
# satisfied in float arithmetic (see select_rho).
_RHO_BACKOFF = 1.0 - 2.0 ** -44


@dataclass(frozen=True)
class LinkGain:
    """Large-scale power gain of one uplink."""

    kappa: float
    distance_m: float


@dataclass(frozen=True)
class ChannelRound:
    """One round's realization: small-scale fading, noise variance, power scale."""

    h: np.ndarray  # complex, shape (n_active, d)
    sigma2: float  # noise variance, Watts
    rho: float  # common power scale


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def path_loss(distance_m: float, f_c_hz: float) -> LinkGain:
    """Free-space power gain c^2 / (4 pi f_c distance)^2."""
    if distance_m <= 0:
        raise ValueError(f"link distance must be positive, got {distance_m}")
    if f_c_hz <= 0:
        raise ValueError(f"carrier frequency must be positive, got {f_c_hz}")
    amp = SPEED_OF_LIGHT / (4.0 * np.pi * f_c_hz * distance_m)
    return LinkGain(kappa=float(amp * amp), distance_m=float(distance_m))


def transmit_signal(g: np.ndarray, eta: float, rho: float, gain: LinkGain) -> np.ndarray:
    """Per-subcarrier amplitudes sqrt(rho * g / (kappa * eta)) for one device."""
    if rho <= 0:
        raise ValueError(f"power scale rho must be positive, got {rho}")
    if np.any(g < 0):
        raise ValueError("encoded payload has negative entries; encoder contract violated")
    if eta <= 0:
        if np.any(g > 0):
            raise ValueError("eta must be positive to transmit a nonzero payload")
        return np.zeros_like(g)
    return np.sqrt(rho * g / (gain.kappa * eta))


def _mean_tx_power(g: np.ndarray, eta: float, rho: float, gain: LinkGain) -> float:
    x = transmit_signal(g, eta, rho, gain)
    return float(np.mean(x * x))


def select_rho(
    encoded: Sequence[np.ndarray],
    gains: Sequence[LinkGain],
    powers: Sequence[float],
    eta: float,
    d: int,
    rho_cap: float = 1e12,
) -> float:
    """Largest common power scale keeping every active device within budget.

    rho = min_i P_i * kappa_i * eta * d / E_i over devices with nonzero
    payload, where E_i = sum_j g_ij is the squared norm of the amplitude
    vector sqrt(g_i) actually put on the air, so the binding device
    transmits at exactly its average power budget. Devices with an all-zero
    payload impose no constraint; if every payload is zero the configured
    cap is returned.

    The closed-form rho can overshoot the budget by a few ulps once the
    amplitudes are actually computed in float arithmetic, so the result is
    nudged down by one part in 2^44 until the float-evaluated mean power of
    every device is within budget. The adjustment is ~5e-14 relative and
    only applied when needed.
    """
    candidates = []
    for g, gain, p_i in zip(encoded, gains, powers):
        amp_energy = float(np.sum(g))  # ||sqrt(g)||^2: tx power is linear in g
        if amp_energy > 0.0:
            candidates.append(p_i * gain.kappa * eta * d / amp_energy)
    if not candidates:
        return rho_cap  # nothing on the air; eta may even be zero here
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    rho = min(min(candidates), rho_cap)
    for _ in range(64):
        ok = all(
            _mean_tx_power(g, eta, rho, gain) <= p_i
            for g, gain, p_i in zip(encoded, gains, powers)
            if np.any(g > 0)
        )
        if ok:
            return rho
        rho *= _RHO_BACKOFF
    raise FloatingPointError("select_rho failed to reach a feasible power scale")


def draw_fading(n_active: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. CN(0,1) fading (Rayleigh magnitude), redrawn every round."""
    re = rng.standard_normal((n_active, d))
    im = rng.standard_normal((n_active, d))
    return (re + 1j * im) / np.sqrt(2.0)


def draw_channel_round(
    n_active: int, d: int, sigma2: float, rho: float, rng: np.random.Generator
) -> ChannelRound:
    # deliberately does not call draw_fading: non-coherent rounds go through
    # here and must keep working even where CSI draws are forbidden, while
    # coherent baselines call draw_fading directly because their
    # transmitters need the realization
    re = rng.standard_normal((n_active, d))
    im = rng.standard_normal((n_active, d))
    return ChannelRound(h=(re + 1j * im) / np.sqrt(2.0), sigma2=sigma2, rho=rho)


def superpose(
    x_set: Sequence[np.ndarray],
    gains: Sequence[LinkGain],
    rnd: ChannelRound,
    rng: np.random.Generator,
) -> np.ndarray:
    """Received vector y = sum_i h_i * sqrt(kappa_i) * x_i + noise.

    The sqrt(kappa_i) here cancels the 1/sqrt(kappa_i) inside each x_i, so
    the received signal depends on link gains only through the power
    constraint that shaped rho. Noise is CN(0, sigma2) per subcarrier,
    drawn from the round's stream. x_i may be real (non-coherent payload)
    or complex (channel-inverting payload).
    """
    if len(x_set) != rnd.h.shape[0]:
        raise ValueError(
            f"got {len(x_set)} transmit vectors for {rnd.h.shape[0]} fading rows"
        )
    d = rnd.h.shape[1]
    y = np.zeros(d, dtype=np.complex128)
    for x, gain, h_i in zip(x_set, gains, rnd.h):
        if x.shape != (d,):
            raise ValueError(f"transmit vector has shape {x.shape}, expected ({d},)")
        y = y + h_i * (np.sqrt(gain.kappa) * x)
    noise_re = rng.standard_normal(d)
    noise_im = rng.standard_normal(d)
    y = y + np.sqrt(rnd.sigma2 / 2.0) * (noise_re + 1j * noise_im)
    return y


def square_law(y: np.ndarray, sigma2: float, rho: float) -> np.ndarray:
    """Debias the per-subcarrier energy: r = (|y|^2 - sigma2) / rho.

    Unbiased for the sum of transmitted powers; individual entries may be
    negative when noise undershoots.
    """
    if rho <= 0:
        raise ValueError(f"power scale rho must be positive, got {rho}")
    return (np.abs(y) ** 2 - sigma2) / rho


def snr_min(powers: Sequence[float], gains: Sequence[LinkGain], sigma2: float) -> float:
    """Worst-device average receive SNR, min_i P_i * kappa_i / sigma2."""
    if sigma2 <= 0:
        raise ValueError(f"noise variance must be positive, got {sigma2}")
    return min(p_i * gain.kappa / sigma2 for p_i, gain in zip(powers, gains))
