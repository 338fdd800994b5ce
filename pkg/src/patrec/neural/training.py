"""Stochastic gradient descent with momentum on a mean-absolute-error loss.

Update rule (heavy ball):

    v <- momentum * v - learning_rate * grad
    w <- w + v

equivalent to ``w_next = w - lr*grad + momentum*(w - w_prev)``.  Each sweep
partitions the training set into fresh random batches drawn from the
configured seed, so the whole weight trajectory is a deterministic function
of (dataset, seed, config).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..geometry import GridImage
from ..rng import Rng, derive_seed
from .models import ConvLayerParams, NetworkParams, make_network, network_backward, network_forward


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    momentum: float = 0.99
    batch_size: int = 1
    sweeps: int = 30
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.batch_size < 1 or self.sweeps < 1:
            raise ValueError("batch_size and sweeps must be at least 1")


def l1_loss_and_grad(pred: np.ndarray, target: np.ndarray):
    """Mean absolute error and its (sub)gradient; sign at 0 is 0."""
    diff = pred - target
    return float(np.abs(diff).mean()), np.sign(diff) / diff.size


def _as_array(sample) -> np.ndarray:
    if isinstance(sample, GridImage):
        return sample.values
    return np.asarray(sample)


def evaluate_loss(params: NetworkParams, dataset, dtype=None) -> float:
    """Mean MAE of the network over (input, target) pairs."""
    dtype = np.dtype(dtype or np.float64)
    total = 0.0
    for inp, tgt in dataset:
        x = _as_array(inp).astype(dtype)[None, None]
        y, _ = network_forward(params.astype(dtype), x)
        total += float(np.abs(y[0, 0] - _as_array(tgt).astype(dtype)).mean())
    return total / len(dataset)


def train(dataset, arch, cfg: TrainConfig, eval_dataset=None):
    """Fit a network to (input image, target image) pairs.

    ``arch`` is either an initialized :class:`NetworkParams` (used as the
    starting point) or the string ``"snet"``/``"unet"``, in which case the
    weights are initialized from ``derive_seed(cfg.seed, 0)``.

    Returns ``(params, history)`` where history has one record per sweep:
    ``{"sweep": k, "train_loss": mean MAE seen during the sweep,
    "eval_loss": mean MAE on eval_dataset or None}``.
    """
    if len(dataset) == 0:
        raise ValueError("training dataset is empty")
    dtype = np.dtype(cfg.dtype)
    if isinstance(arch, NetworkParams):
        params = arch.astype(dtype)
    else:
        params = make_network(arch, derive_seed(cfg.seed, 0), dtype=dtype)

    inputs = [_as_array(p[0]).astype(dtype)[None, None] for p in dataset]
    targets = [_as_array(p[1]).astype(dtype)[None, None] for p in dataset]

    kernels = [l.kernel.copy() for l in params.layers]
    biases = [l.bias.copy() for l in params.layers]
    vel_k = [np.zeros_like(k) for k in kernels]
    vel_b = [np.zeros_like(b) for b in biases]
    shuffle = Rng(derive_seed(cfg.seed, 1))

    def current() -> NetworkParams:
        layers = tuple(ConvLayerParams(k.copy(), b.copy()) for k, b in zip(kernels, biases))
        return replace(params, layers=layers)

    history = []
    n = len(dataset)
    lr, beta = dtype.type(cfg.learning_rate), dtype.type(cfg.momentum)
    for sweep in range(cfg.sweeps):
        perm = shuffle.permutation(n)
        sweep_losses = []
        for start in range(0, n, cfg.batch_size):
            batch = perm[start : start + cfg.batch_size]
            grad_k = [np.zeros_like(k) for k in kernels]
            grad_b = [np.zeros_like(b) for b in biases]
            p = current()
            for idx in batch:
                y, cache = network_forward(p, inputs[idx])
                loss, dy = l1_loss_and_grad(y, targets[idx])
                if not np.isfinite(loss):
                    raise TrainingDivergedError(
                        f"non-finite loss at sweep {sweep}, sample {int(idx)}"
                    )
                sweep_losses.append(loss)
                layer_grads, _ = network_backward(p, cache, dy.astype(dtype), need_input_grad=False)
                for li, (gk, gb) in enumerate(layer_grads):
                    grad_k[li] += gk
                    grad_b[li] += gb
            scale = dtype.type(1.0 / len(batch))
            for li in range(len(kernels)):
                vel_k[li] = beta * vel_k[li] - lr * (grad_k[li] * scale)
                vel_b[li] = beta * vel_b[li] - lr * (grad_b[li] * scale)
                kernels[li] += vel_k[li]
                biases[li] += vel_b[li]
        record = {"sweep": sweep, "train_loss": float(np.mean(sweep_losses)), "eval_loss": None}
        if eval_dataset:
            record["eval_loss"] = evaluate_loss(current(), eval_dataset, dtype)
        history.append(record)
    return current().astype(np.float64), history
