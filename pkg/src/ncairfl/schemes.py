"""Round orchestration for the four federated schemes.

  fedavg_ideal: plain FedAvg over a perfect channel.
  ncairfl:      dithered non-negative payloads, square-law detection,
                error-feedback memory; never touches channel state.
  cairfl:       truncated channel inversion with genie CSIT, no memory.
  airfl_mem:    truncated channel inversion plus long-term memory for the
                truncated coordinates.

Every round function is a pure map (state, setup, rngs) -> (state, info);
device work is summed in ascending device order so runs are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np

from . import channel as ch
from . import dither
from .data import Dataset, DevicePartition
from .errors import ConfigError, DivergenceError
from .model import local_update
from .streams import derive_stream

SCHEME_NAMES = ("fedavg_ideal", "ncairfl", "cairfl", "airfl_mem")


@dataclass
class RoundState:
    theta: np.ndarray  # (d,) global model
    memories: np.ndarray  # (n, d) per-device error memories
    round: int


@dataclass
class TrialSetup:
    """Everything static over one (trial, scheme) run."""

    model: object
    dataset: Dataset
    partitions: List[DevicePartition]
    gains: List[ch.LinkGain]
    powers: np.ndarray  # (n,) Watts
    sigma2: float  # Watts
    eta: float
    q_steps: int
    batch_size: int
    r: float
    n: int
    p: float = 0.5
    rho_cap: float = 1e12
    gamma_th: float = 0.32459284597450133  # 10% truncation under Rayleigh
    dither_seed: int = 0

    @property
    def d(self) -> int:
        return self.model.dim


@dataclass
class RoundRngs:
    selection: np.random.Generator
    channel: np.random.Generator
    device_fn: Callable[[int], np.random.Generator]


def build_round_rngs(
    master_seed: int, scheme: str, trial: int, round_index: int, n: int
) -> RoundRngs:
    """Per-round streams. Selection and SGD streams are scheme-independent,
    so all schemes within a trial see the same device draws and batches;
    channel streams are per-scheme because schemes consume channel
    randomness differently."""
    return RoundRngs(
        selection=derive_stream(master_seed, ("select", trial, round_index)),
        channel=derive_stream(master_seed, ("channel", scheme, trial, round_index)),
        device_fn=lambda i: derive_stream(master_seed, ("sgd", trial, round_index, i)),
    )


@dataclass
class RoundInfo:
    rho: float  # nan for channel-free schemes
    max_grad_norm: float
    # worst device's (1/d)||x||^2 / P ratio this round; nan when nothing
    # was transmitted over a physical channel. Power feasibility means <= 1.
    max_power_ratio: float = float("nan")


def sample_devices(n: int, r: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform without-replacement subset of size r*n, ascending ids."""
    k_real = r * n
    k = round(k_real)
    if k < 1 or abs(k_real - k) > 1e-9:
        raise ConfigError(f"r*n must be a positive integer, got r={r}, n={n}")
    return np.sort(rng.choice(n, size=k, replace=False))


def global_update(theta: np.ndarray, delta_hat: np.ndarray, r: float, n: int) -> np.ndarray:
    """theta - delta_hat / (r*n)."""
    if r * n < 1:
        raise ValueError(f"r*n must be >= 1, got {r * n}")
    return theta - delta_hat / (r * n)


def _check_finite(theta: np.ndarray, round_index: int) -> None:
    if not np.all(np.isfinite(theta)):
        raise DivergenceError(round_index)


def _local_deltas(
    state: RoundState, setup: TrialSetup, active: np.ndarray, rngs: RoundRngs
):
    deltas = {}
    max_gn = 0.0
    for i in active:
        delta, gn = local_update(
            state.theta,
            setup.model,
            setup.dataset,
            setup.partitions[i],
            setup.q_steps,
            setup.eta,
            setup.batch_size,
            rngs.device_fn(int(i)),
        )
        deltas[int(i)] = delta
        max_gn = max(max_gn, gn)
    return deltas, max_gn


def run_round_ideal(
    state: RoundState, setup: TrialSetup, rngs: RoundRngs
) -> tuple[RoundState, RoundInfo]:
    """FedAvg with perfect communications: average the raw differences."""
    active = sample_devices(setup.n, setup.r, rngs.selection)
    deltas, max_gn = _local_deltas(state, setup, active, rngs)
    total = np.zeros(setup.d)
    for i in active:
        total = total + deltas[int(i)]
    theta = global_update(state.theta, total, setup.r, setup.n)
    _check_finite(theta, state.round)
    return (
        RoundState(theta=theta, memories=state.memories, round=state.round + 1),
        RoundInfo(rho=float("nan"), max_grad_norm=max_gn),
    )


def run_round_ncairfl(
    state: RoundState, setup: TrialSetup, rngs: RoundRngs
) -> tuple[RoundState, RoundInfo]:
    """One non-coherent round: dither-encode, transmit, square-law detect,
    decode, and apply the global step. Channel state is drawn internally
    and never inspected; the update depends on it only through the
    superposed signal."""
    phi = dither.gen_dither(setup.dither_seed, state.round, setup.d, setup.p)
    active = sample_devices(setup.n, setup.r, rngs.selection)
    deltas, max_gn = _local_deltas(state, setup, active, rngs)

    encoded = [dither.encode(state.memories[i], deltas[int(i)], phi) for i in active]
    memories = state.memories.copy()
    for i, g in zip(active, encoded):
        memories[i] = dither.update_memory(
            state.memories[i], deltas[int(i)], phi, g, active=True
        )

    active_gains = [setup.gains[i] for i in active]
    active_powers = [float(setup.powers[i]) for i in active]
    rho = ch.select_rho(
        encoded, active_gains, active_powers, setup.eta, setup.d, setup.rho_cap
    )
    x_set = [
        ch.transmit_signal(g, setup.eta, rho, gain)
        for g, gain in zip(encoded, active_gains)
    ]
    power_ratio = max(
        float(np.mean(x * x)) / p_i for x, p_i in zip(x_set, active_powers)
    )
    rnd = ch.draw_channel_round(len(x_set), setup.d, setup.sigma2, rho, rngs.channel)
    y = ch.superpose(x_set, active_gains, rnd, rngs.channel)
    r_stats = ch.square_law(y, setup.sigma2, rho)
    delta_hat = dither.decode(r_stats, phi, setup.eta)
    theta = global_update(state.theta, delta_hat, setup.r, setup.n)
    _check_finite(theta, state.round)
    return (
        RoundState(theta=theta, memories=memories, round=state.round + 1),
        RoundInfo(rho=rho, max_grad_norm=max_gn, max_power_ratio=power_ratio),
    )


def _trunc_rho(
    payloads: Sequence[np.ndarray],
    masks: Sequence[np.ndarray],
    h_rows: Sequence[np.ndarray],
    gains: Sequence[ch.LinkGain],
    powers: Sequence[float],
    d: int,
    rho_cap: float,
) -> float:
    """Largest rho meeting every inverting device's average power budget.

    A device spends rho * sum_masked |v_j / h_j|^2 / kappa of energy, so its
    individual cap is P * kappa * d / sum_masked |v_j|^2 / |h_j|^2. Devices
    transmitting nothing impose no constraint. Nudged down until the
    float-evaluated power check passes, as in select_rho.
    """
    candidates = []
    costs = []
    for v, mask, h_i, gain, p_i in zip(payloads, masks, h_rows, gains, powers):
        cost = float(np.sum((v[mask] ** 2) / (np.abs(h_i[mask]) ** 2)))
        costs.append(cost)
        if cost > 0.0:
            candidates.append(p_i * gain.kappa * d / cost)
    if not candidates:
        return rho_cap
    rho = min(min(candidates), rho_cap)
    for _ in range(64):
        ok = all(
            cost == 0.0 or float(np.mean(np.abs(_invert(v, mask, h_i, rho, gain)) ** 2)) <= p_i
            for v, mask, h_i, gain, p_i, cost in zip(
                payloads, masks, h_rows, gains, powers, costs
            )
        )
        if ok:
            return rho
        rho *= 1.0 - 2.0 ** -44
    raise FloatingPointError("truncated-inversion rho never became feasible")


def _invert(
    v: np.ndarray,
    mask: np.ndarray,
    h_i: np.ndarray,
    rho: float,
    gain: ch.LinkGain,
) -> np.ndarray:
    """Channel-inverting transmit vector, zero on truncated subcarriers."""
    x = np.zeros(v.shape[0], dtype=np.complex128)
    x[mask] = np.sqrt(rho) * v[mask] / (np.sqrt(gain.kappa) * h_i[mask])
    return x


def run_round_trunc_ci(
    state: RoundState,
    setup: TrialSetup,
    rngs: RoundRngs,
    with_memory: bool,
) -> tuple[RoundState, RoundInfo]:
    """Coherent baseline: invert the known fading where its magnitude
    clears gamma_th, skip the rest. with_memory=True accumulates skipped
    coordinates into device memory (long-term compensation); False
    discards them."""
    active = sample_devices(setup.n, setup.r, rngs.selection)
    deltas, max_gn = _local_deltas(state, setup, active, rngs)

    # genie CSIT: devices see this round's fading before transmitting
    h = ch.draw_fading(len(active), setup.d, rngs.channel)
    payloads = []
    masks = []
    for row, i in enumerate(active):
        base = deltas[int(i)] + state.memories[i] if with_memory else deltas[int(i)]
        payloads.append(base / setup.eta)
        masks.append(np.abs(h[row]) >= setup.gamma_th)

    active_gains = [setup.gains[i] for i in active]
    active_powers = [float(setup.powers[i]) for i in active]
    rho = _trunc_rho(
        payloads, masks, h, active_gains, active_powers, setup.d, setup.rho_cap
    )
    x_set = [
        _invert(v, mask, h_i, rho, gain)
        for v, mask, h_i, gain in zip(payloads, masks, h, active_gains)
    ]
    power_ratio = max(
        float(np.mean(np.abs(x) ** 2)) / p_i
        for x, p_i in zip(x_set, active_powers)
    )
    rnd = ch.ChannelRound(h=h, sigma2=setup.sigma2, rho=rho)
    y = ch.superpose(x_set, active_gains, rnd, rngs.channel)
    r_stats = y.real / np.sqrt(rho)
    delta_hat = setup.eta * r_stats

    memories = state.memories
    if with_memory:
        memories = state.memories.copy()
        for row, i in enumerate(active):
            carried = state.memories[i] + deltas[int(i)]
            memories[i] = np.where(masks[row], 0.0, carried)

    theta = global_update(state.theta, delta_hat, setup.r, setup.n)
    _check_finite(theta, state.round)
    return (
        RoundState(theta=theta, memories=memories, round=state.round + 1),
        RoundInfo(rho=rho, max_grad_norm=max_gn, max_power_ratio=power_ratio),
    )


def run_round(
    scheme: str, state: RoundState, setup: TrialSetup, rngs: RoundRngs
) -> tuple[RoundState, RoundInfo]:
    if scheme == "fedavg_ideal":
        return run_round_ideal(state, setup, rngs)
    if scheme == "ncairfl":
        return run_round_ncairfl(state, setup, rngs)
    if scheme == "cairfl":
        return run_round_trunc_ci(state, setup, rngs, with_memory=False)
    if scheme == "airfl_mem":
        return run_round_trunc_ci(state, setup, rngs, with_memory=True)
    raise ConfigError(f"unknown scheme {scheme!r}; expected one of {SCHEME_NAMES}")


def initial_state(setup: TrialSetup, init_rng: np.random.Generator) -> RoundState:
    theta0 = setup.model.init_params(init_rng)
    return RoundState(
        theta=theta0, memories=np.zeros((setup.n, setup.d)), round=0
    )
