"""Learning models: a two-layer ReLU MLP with exact backprop, and a
least-squares regression model used for convergence-trend experiments.

Both expose the same small surface over flat parameter vectors (init,
loss, grad, evaluate) so the federated schemes never care which one they
are training. ``local_update`` runs the local SGD loop shared by every
scheme and returns the model difference a device would upload.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Batch, Dataset, DevicePartition, sample_batch
from .errors import NumericOverflowError

MLP_INPUT = 784
MLP_HIDDEN = 100
MLP_OUTPUT = 10
MLP_DIM = MLP_INPUT * MLP_HIDDEN + MLP_HIDDEN + MLP_HIDDEN * MLP_OUTPUT + MLP_OUTPUT


@dataclass
class MlpParams:
    w1: np.ndarray  # (784, 100)
    b1: np.ndarray  # (100,)
    w2: np.ndarray  # (100, 10)
    b2: np.ndarray  # (10,)


def init_mlp_params(rng: np.random.Generator) -> MlpParams:
    """Uniform(-a, a) weights with a = sqrt(6/(fan_in+fan_out)), zero biases."""
    a1 = np.sqrt(6.0 / (MLP_INPUT + MLP_HIDDEN))
    a2 = np.sqrt(6.0 / (MLP_HIDDEN + MLP_OUTPUT))
    return MlpParams(
        w1=rng.uniform(-a1, a1, (MLP_INPUT, MLP_HIDDEN)),
        b1=np.zeros(MLP_HIDDEN),
        w2=rng.uniform(-a2, a2, (MLP_HIDDEN, MLP_OUTPUT)),
        b2=np.zeros(MLP_OUTPUT),
    )


def params_to_vector(params: MlpParams) -> np.ndarray:
    return np.concatenate(
        [params.w1.ravel(), params.b1, params.w2.ravel(), params.b2]
    )


def vector_to_params(vec: np.ndarray) -> MlpParams:
    if vec.shape != (MLP_DIM,):
        raise ValueError(f"expected flat vector of length {MLP_DIM}, got {vec.shape}")
    o = 0
    w1 = vec[o : o + MLP_INPUT * MLP_HIDDEN].reshape(MLP_INPUT, MLP_HIDDEN)
    o += MLP_INPUT * MLP_HIDDEN
    b1 = vec[o : o + MLP_HIDDEN]
    o += MLP_HIDDEN
    w2 = vec[o : o + MLP_HIDDEN * MLP_OUTPUT].reshape(MLP_HIDDEN, MLP_OUTPUT)
    o += MLP_HIDDEN * MLP_OUTPUT
    b2 = vec[o : o + MLP_OUTPUT]
    return MlpParams(w1=w1.copy(), b1=b1.copy(), w2=w2.copy(), b2=b2.copy())


def _forward(params: MlpParams, features: np.ndarray):
    # non-finite intermediates are caught by the callers' explicit checks
    with np.errstate(over="ignore", invalid="ignore"):
        z1 = features @ params.w1 + params.b1
        a1 = np.maximum(z1, 0.0)
        z2 = a1 @ params.w2 + params.b2
        # max-subtraction keeps exp() from overflowing
        z2s = z2 - z2.max(axis=1, keepdims=True)
        ez = np.exp(z2s)
        probs = ez / ez.sum(axis=1, keepdims=True)
    return z1, a1, z2s, probs


def forward_loss(params: MlpParams, batch: Batch) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and per-sample class probabilities."""
    if len(batch) < 1:
        raise ValueError("batch must be non-empty")
    z1, a1, z2s, probs = _forward(params, batch.features)
    with np.errstate(over="ignore", invalid="ignore"):
        logp = z2s - np.log(np.exp(z2s).sum(axis=1, keepdims=True))
        loss = float(-np.mean(logp[np.arange(len(batch)), batch.labels]))
    if not (np.isfinite(loss) and np.all(np.isfinite(probs))):
        raise NumericOverflowError(
            "non-finite activation in forward pass; check learning rate / init"
        )
    return loss, probs


def gradient(params: MlpParams, batch: Batch) -> MlpParams:
    """Exact gradient of forward_loss with respect to every parameter."""
    if len(batch) < 1:
        raise ValueError("batch must be non-empty")
    features = batch.features
    n = len(batch)
    z1, a1, _, probs = _forward(params, features)
    dz2 = probs.copy()
    dz2[np.arange(n), batch.labels] -= 1.0
    dz2 /= n
    gw2 = a1.T @ dz2
    gb2 = dz2.sum(axis=0)
    da1 = dz2 @ params.w2.T
    dz1 = da1 * (z1 > 0.0)
    gw1 = features.T @ dz1
    gb1 = dz1.sum(axis=0)
    grads = MlpParams(w1=gw1, b1=gb1, w2=gw2, b2=gb2)
    if not all(np.all(np.isfinite(g)) for g in (gw1, gb1, gw2, gb2)):
        raise NumericOverflowError(
            "non-finite gradient in backward pass; check learning rate / init"
        )
    return grads


class MlpModel:
    """Flat-vector interface over the 784-100-10 ReLU MLP."""

    dim = MLP_DIM

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        return params_to_vector(init_mlp_params(rng))

    def loss(self, theta: np.ndarray, batch: Batch) -> float:
        return forward_loss(vector_to_params(theta), batch)[0]

    def grad(self, theta: np.ndarray, batch: Batch) -> np.ndarray:
        return params_to_vector(gradient(vector_to_params(theta), batch))

    def evaluate(self, theta: np.ndarray, dataset: Dataset) -> tuple[float, float]:
        """Argmax accuracy (ties go to the lowest class index) and mean loss."""
        batch = Batch(features=dataset.features, labels=dataset.labels)
        loss, probs = forward_loss(vector_to_params(theta), batch)
        accuracy = float(np.mean(np.argmax(probs, axis=1) == dataset.labels))
        return accuracy, loss


class QuadraticModel:
    """Least-squares regression 0.5 * mean((x.theta - y)^2), a smooth
    objective whose curvature constants are computable in closed form."""

    def __init__(self, dims: int):
        self.dim = dims

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal(self.dim)

    def loss(self, theta: np.ndarray, batch: Batch) -> float:
        resid = batch.features @ theta - batch.targets
        return float(0.5 * np.mean(resid * resid))

    def grad(self, theta: np.ndarray, batch: Batch) -> np.ndarray:
        resid = batch.features @ theta - batch.targets
        return batch.features.T @ resid / len(batch)

    def evaluate(self, theta: np.ndarray, dataset: Dataset) -> tuple[float, float]:
        # regression has no accuracy; the column is pinned to 0.0
        batch = Batch(
            features=dataset.features, labels=dataset.labels, targets=dataset.targets
        )
        return 0.0, self.loss(theta, batch)

    def smoothness(self, dataset: Dataset) -> float:
        """Largest eigenvalue of the empirical second-moment matrix."""
        x = dataset.features
        return float(np.linalg.eigvalsh(x.T @ x / len(dataset)).max())


def local_update(
    theta0: np.ndarray,
    model,
    dataset: Dataset,
    part: DevicePartition,
    q_steps: int,
    eta: float,
    batch_size: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float]:
    """Run q_steps of local SGD from theta0; return (difference, stats).

    The difference is theta0 - theta_final, i.e. eta times the sum of the
    per-step stochastic gradients. The second return value is the largest
    per-step gradient norm, recorded for diagnostics.
    """
    if q_steps < 1:
        raise ValueError(f"local step count must be >= 1, got {q_steps}")
    if eta < 0:
        raise ValueError(f"learning rate must be >= 0, got {eta}")
    theta = theta0.copy()
    max_grad_norm = 0.0
    for _ in range(q_steps):
        batch = sample_batch(dataset, part, batch_size, rng)
        g = model.grad(theta, batch)
        max_grad_norm = max(max_grad_norm, float(np.linalg.norm(g)))
        theta = theta - eta * g
    return theta0 - theta, max_grad_norm
