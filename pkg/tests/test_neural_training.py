import numpy as np
import pytest

from patrec.neural import (
    ConvLayerParams,
    NetworkParams,
    TrainConfig,
    TrainingDivergedError,
    l1_loss_and_grad,
    network_backward,
    network_forward,
    train,
    unet_init,
)
from patrec.rng import Rng, derive_seed


def smooth_pair(n=16, shift=2, scale=0.7):
    xx, yy = np.meshgrid(np.linspace(-2, 2, n), np.linspace(-2, 2, n))
    inp = np.exp(-(xx**2 + yy**2))
    return inp, scale * np.roll(inp, shift, axis=0)


class TestLoss:
    def test_l1_value_and_grad(self):
        pred = np.array([[1.0, -2.0], [0.0, 3.0]])
        tgt = np.array([[0.0, -2.0], [1.0, 1.0]])
        loss, g = l1_loss_and_grad(pred, tgt)
        assert loss == pytest.approx((1 + 0 + 1 + 2) / 4)
        assert np.array_equal(g, np.array([[1.0, 0.0], [-1.0, 1.0]]) / 4)


class TestTrainBasics:
    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            train([], "snet", TrainConfig(sweeps=1))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            TrainConfig(momentum=1.0)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)

    def test_deterministic_trajectory(self):
        data = [(Rng(i).normal(64).reshape(8, 8), Rng(i + 50).normal(64).reshape(8, 8)) for i in range(4)]
        cfg = TrainConfig(sweeps=3, seed=42)
        p1, h1 = train(data, "unet", cfg)
        p2, h2 = train(data, "unet", cfg)
        for a, b in zip(p1.layers, p2.layers):
            assert np.array_equal(a.kernel, b.kernel)
            assert np.array_equal(a.bias, b.bias)
        assert h1 == h2

    def test_divergence_guard(self):
        data = [smooth_pair()]
        cfg = TrainConfig(learning_rate=1e9, momentum=0.99, sweeps=50, seed=0)
        with pytest.raises(TrainingDivergedError):
            train(data, "unet", cfg)

    def test_eval_loss_reported(self):
        data = [smooth_pair()]
        cfg = TrainConfig(sweeps=2, seed=0)
        _, hist = train(data, "unet", cfg, eval_dataset=data)
        assert all(h["eval_loss"] is not None for h in hist)
        assert len(hist) == 2


class TestTrainingDynamics:
    def test_residual_unet_easy_fit(self):
        # target = input: residual net starts near identity, improves quickly
        data = [(v, v) for v in (Rng(i).normal(256).reshape(16, 16) for i in range(8))]
        cfg = TrainConfig(sweeps=5, seed=1)
        _, hist = train(data, "unet", cfg)
        losses = [h["train_loss"] for h in hist]
        assert min(losses) < losses[0]

    def test_snet_memorizes_single_pair(self):
        # overfit sanity: one pair, 500 sweeps, loss collapses by ~2 orders
        data = [smooth_pair()]
        cfg = TrainConfig(learning_rate=0.001, momentum=0.99, batch_size=1, sweeps=500, seed=1)
        _, hist = train(data, "snet", cfg)
        losses = [h["train_loss"] for h in hist]
        assert min(losses) < 0.02 * losses[0]

    def test_zero_momentum_equals_plain_sgd(self):
        # independent plain-SGD loop, 10 steps, bitwise-equal trajectory
        data = [smooth_pair(n=8, shift=1)]
        x = data[0][0].astype(np.float64)[None, None]
        t = data[0][1].astype(np.float64)[None, None]

        params0 = unet_init(derive_seed(7, 0), depth=1, base_channels=2)
        kernels = [l.kernel.copy() for l in params0.layers]
        biases = [l.bias.copy() for l in params0.layers]
        lr = 0.01
        for _ in range(10):
            p = NetworkParams(
                arch="unet",
                layers=tuple(ConvLayerParams(k.copy(), b.copy()) for k, b in zip(kernels, biases)),
                residual=params0.residual,
                depth=1,
                base_channels=2,
            )
            y, cache = network_forward(p, x)
            _, dy = l1_loss_and_grad(y, t)
            grads, _ = network_backward(p, cache, dy)
            for li, (gk, gb) in enumerate(grads):
                kernels[li] = kernels[li] - lr * gk
                biases[li] = biases[li] - lr * gb

        cfg = TrainConfig(
            learning_rate=lr, momentum=0.0, batch_size=1, sweeps=10, seed=7, dtype="float64"
        )
        trained, _ = train(data, unet_init(derive_seed(7, 0), depth=1, base_channels=2), cfg)
        for li, layer in enumerate(trained.layers):
            assert np.array_equal(layer.kernel, kernels[li])
            assert np.array_equal(layer.bias, biases[li])
