"""Deterministic simulator for CSI-free over-the-air federated learning.

Devices upload model differences through a fading multiple-access channel
without any channel knowledge: a shared per-round sign dither makes the
clipped payload an expectation-contractive compressor, a square-law
detector at the server recovers the power sum unbiasedly, and per-device
error-feedback memories retain whatever a round could not carry. Coherent
channel-inversion baselines and an ideal-channel FedAvg reference share
the same harness, plus a closed-form convergence-bound calculator.
"""

from .bound import BoundBreakdown, BoundInputs, bound_terms, eta_max
from .channel import (
    ChannelRound,
    LinkGain,
    dbm_to_watts,
    draw_channel_round,
    draw_fading,
    path_loss,
    select_rho,
    snr_min,
    square_law,
    superpose,
    transmit_signal,
)
from .config import DatasetSpec, ExperimentConfig, parse_config
from .data import Batch, Dataset, DevicePartition, load_idx, partition, sample_batch, synth_dataset
from .dither import DitherVector, contraction_expectation, decode, encode, gen_dither, update_memory
from .errors import ConfigError, DivergenceError, IdxFormatError, NumericOverflowError
from .harness import MetricsRecord, evaluate, read_metrics, run_experiment, write_metrics
from .model import (
    MLP_DIM,
    MlpModel,
    MlpParams,
    QuadraticModel,
    forward_loss,
    gradient,
    init_mlp_params,
    local_update,
    params_to_vector,
    vector_to_params,
)
from .schemes import (
    RoundRngs,
    RoundState,
    TrialSetup,
    build_round_rngs,
    global_update,
    run_round,
    run_round_ideal,
    run_round_ncairfl,
    run_round_trunc_ci,
    sample_devices,
)
from .streams import derive_seed, derive_stream

__version__ = "0.1.0"
