"""Closed-form convergence-bound calculator.

Evaluates the non-convex convergence envelope for the non-coherent scheme:
an initialization term decaying with rounds, a detection-error term driven
by the worst-device SNR, the usual SGD variance/heterogeneity terms, and a
contraction term from the dither compression. The curvature and moment
constants are caller-supplied (measured on a synthetic problem or posited);
the calculator never pretends to estimate them for a deep net.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BoundInputs:
    smoothness: float  # L
    grad_sq_bound: float  # G^2, second moment of stochastic gradients
    grad_variance: float  # sigma_l^2
    heterogeneity: float  # sigma_g^2
    f_gap: float  # f(theta_0) - f*
    q_steps: int
    rounds: int  # T
    n: int
    eta: float
    r: float
    p: float
    snr_min: float
    d: int


@dataclass(frozen=True)
class BoundBreakdown:
    init_term: float
    detection_term: float
    sgd_hetero_term: float
    contraction_term: float
    total: float
    eta_valid: bool  # eta within the step-size range the bound requires
    lam: float
    g_tilde_sq: float
    g_e_sq: float


def eta_max(q_steps: int, smoothness: float) -> float:
    """Largest admissible constant learning rate, 1/(sqrt(240)*Q*L)."""
    if q_steps <= 0 or smoothness <= 0:
        raise ValueError("Q and L must be positive")
    return 1.0 / (np.sqrt(240.0) * q_steps * smoothness)


def bound_terms(inp: BoundInputs) -> BoundBreakdown:
    """Evaluate the four-term bound on the average squared gradient norm.

    Returns the breakdown with eta_valid=False (numbers still computed)
    when eta exceeds eta_max(Q, L).
    """
    positives = {
        "smoothness": inp.smoothness,
        "grad_sq_bound": inp.grad_sq_bound,
        "grad_variance": inp.grad_variance,
        "heterogeneity": inp.heterogeneity,
        "f_gap": inp.f_gap,
        "q_steps": inp.q_steps,
        "rounds": inp.rounds,
        "n": inp.n,
        "eta": inp.eta,
        "snr_min": inp.snr_min,
        "d": inp.d,
    }
    for name, value in positives.items():
        if value <= 0:
            raise ValueError(f"{name} must be positive, got {value}")
    if not 0.0 < inp.r <= 1.0:
        raise ValueError(f"r must be in (0,1], got {inp.r}")
    if not 0.0 < inp.p < 1.0:
        raise ValueError(f"p must be in (0,1), got {inp.p}")

    lam = min(inp.p, 1.0 - inp.p)
    q = float(inp.q_steps)
    g2 = inp.grad_sq_bound
    eta = inp.eta
    ell = inp.smoothness
    rn = inp.r * inp.n

    g_tilde_sq = (8.0 / lam**2 - 6.0) * (q * q) * g2
    g_e_sq = (
        rn**2 * g_tilde_sq
        + 4.0 * rn * g_tilde_sq / inp.snr_min
        + g_tilde_sq / (inp.d * inp.snr_min**2)
    )

    init_term = 8.0 * inp.f_gap / (inp.rounds * eta * q)
    detection_term = 4.0 * eta * ell * g_e_sq / (q * inp.r**2 * inp.n**2)
    sgd_hetero_term = 4.0 * eta * ell * q * g2 + 40.0 * eta**2 * q * ell**2 * (
        inp.grad_variance + 6.0 * q * inp.heterogeneity
    )
    contraction_term = (
        48.0 * eta**2 * q**2 * ell**2 * (1.0 - lam**2) * g2 / (inp.r**2 * lam**2)
    )
    total = init_term + detection_term + sgd_hetero_term + contraction_term
    return BoundBreakdown(
        init_term=init_term,
        detection_term=detection_term,
        sgd_hetero_term=sgd_hetero_term,
        contraction_term=contraction_term,
        total=total,
        eta_valid=eta <= eta_max(inp.q_steps, inp.smoothness),
        lam=lam,
        g_tilde_sq=g_tilde_sq,
        g_e_sq=g_e_sq,
    )
