"""Total-variation regularized reconstruction via a primal-dual iteration.

Minimizes, over images x,

    0.5 * ||A x - y||^2 + lam * sum_i sqrt((Dx x)_i^2 + (Dy x)_i^2)

with A the wave forward operator and (Dx, Dy) forward differences scaled by
the pixel spacings (Neumann boundary: the last column/row of each
difference is zero).  The solver is the standard first-order primal-dual
scheme: closed-form dual update for the quadratic data term, pixelwise
projection onto the lam-radius Euclidean ball for the TV dual, primal
gradient step through the exact adjoints, and over-relaxation.  Step sizes
must satisfy sigma * tau * L^2 <= 1 where L bounds the norm of the stacked
operator [A; D]; L is estimated by power iteration when not supplied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fbp import FbpConfig, fbp_reconstruct
from .geometry import GridImage, Sinogram
from .rng import Rng
from .wave import ForwardConfig, WaveOperator


def grad_arrays(v: np.ndarray, dx: float, dy: float) -> tuple[np.ndarray, np.ndarray]:
    """Forward differences along x (columns) and y (rows), zero last column/row."""
    gx = np.zeros_like(v)
    gy = np.zeros_like(v)
    gx[:, :-1] = (v[:, 1:] - v[:, :-1]) / dx
    gy[:-1, :] = (v[1:, :] - v[:-1, :]) / dy
    return gx, gy


def neg_div_arrays(px: np.ndarray, py: np.ndarray, dx: float, dy: float) -> np.ndarray:
    """Exact algebraic adjoint of :func:`grad_arrays` (a negative divergence)."""
    out = np.zeros_like(px)
    out[:, :-1] -= px[:, :-1] / dx
    out[:, 1:] += px[:, :-1] / dx
    out[:-1, :] -= py[:-1, :] / dy
    out[1:, :] += py[:-1, :] / dy
    return out


def grad(image: GridImage) -> tuple[GridImage, GridImage]:
    gx, gy = grad_arrays(image.values, image.dx, image.dy)
    return image.with_values(gx), image.with_values(gy)


def neg_div(gx: GridImage, gy: GridImage) -> GridImage:
    if gx.values.shape != gy.values.shape:
        raise ValueError("gradient components must share a shape")
    return gx.with_values(neg_div_arrays(gx.values, gy.values, gx.dx, gx.dy))


def total_variation(v: np.ndarray, dx: float, dy: float) -> float:
    gx, gy = grad_arrays(v, dx, dy)
    return float(np.hypot(gx, gy).sum())


def estimate_opnorm(apply, apply_adjoint, shape, iters: int = 50, seed: int = 0, safety: float = 1.05) -> float:
    """Power iteration estimate of the operator norm, times a safety factor."""
    if iters < 10:
        raise ValueError("need at least 10 power iterations")
    z = Rng(seed).normal(int(np.prod(shape))).reshape(shape)
    z /= np.linalg.norm(z)
    lam = 0.0
    for _ in range(iters):
        w = apply_adjoint(apply(z))
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        z = w / lam
    return safety * float(np.sqrt(lam))


def stacked_opnorm(op: WaveOperator, grid: GridImage, iters: int = 50, seed: int = 0) -> float:
    """Norm estimate for the stacked operator [A; D] used by the solver."""

    def apply(v):
        return (op.apply(v), grad_arrays(v, grid.dx, grid.dy))

    def apply_adjoint(pair):
        s, (gx, gy) = pair
        return op.apply_adjoint(s) + neg_div_arrays(gx, gy, grid.dx, grid.dy)

    return estimate_opnorm(apply, apply_adjoint, (grid.height, grid.width), iters, seed)


@dataclass(frozen=True)
class TvConfig:
    lam: float = 0.005
    iterations: int = 50
    sigma: float | None = None  # defaults to 1/L
    tau: float | None = None
    theta: float = 1.0
    opnorm: float | None = None  # L; estimated by power iteration when None
    power_iters: int = 50
    nonneg: bool = False
    warm_start: bool = True
    checkpoint_every: int = 0  # 0: record only the first and final iterate

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.iterations < 1:
            raise ValueError("need at least one iteration")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must be in [0, 1]")


def tv_objective(op: WaveOperator, v: np.ndarray, y: np.ndarray, lam: float, dx: float, dy: float):
    data = 0.5 * float(((op.apply(v) - y) ** 2).sum())
    tv = lam * total_variation(v, dx, dy)
    return data, tv


def tv_reconstruct(
    sino: Sinogram,
    grid: GridImage,
    cfg: TvConfig = TvConfig(),
    fwd_cfg: ForwardConfig = ForwardConfig(),
    operator: WaveOperator | None = None,
) -> tuple[GridImage, list[tuple[int, float, float, float]]]:
    """Runs the primal-dual iteration; returns the final iterate and the
    recorded objective history as (iteration, data term, tv term, total)."""
    op = operator or WaveOperator(grid, sino.geometry, sino.num_times, sino.dt, fwd_cfg)
    y = sino.values
    dx, dy = grid.dx, grid.dy

    big_l = cfg.opnorm if cfg.opnorm is not None else stacked_opnorm(op, grid, cfg.power_iters)
    sigma = cfg.sigma if cfg.sigma is not None else 1.0 / big_l
    tau = cfg.tau if cfg.tau is not None else 1.0 / big_l
    if sigma <= 0 or tau <= 0:
        raise ValueError("step sizes must be positive")
    if sigma * tau * big_l**2 > 1.0 + 1e-9:
        raise ValueError(
            f"step-size condition violated: sigma*tau*L^2 = {sigma * tau * big_l**2:.6f} > 1"
        )

    if cfg.warm_start:
        x = fbp_reconstruct(sino, grid, FbpConfig()).values.copy()
    else:
        x = np.zeros((grid.height, grid.width))
    x_bar = x.copy()
    q = np.zeros_like(y)
    px = np.zeros_like(x)
    py = np.zeros_like(x)

    history = []

    def record(it, v):
        data, tv = tv_objective(op, v, y, cfg.lam, dx, dy)
        history.append((it, data, tv, data + tv))

    record(0, x)
    for it in range(1, cfg.iterations + 1):
        q = (q + sigma * (op.apply(x_bar) - y)) / (1.0 + sigma)
        gx, gy = grad_arrays(x_bar, dx, dy)
        px = px + sigma * gx
        py = py + sigma * gy
        mag = np.hypot(px, py)
        scale = np.where(mag > cfg.lam, np.where(mag > 0, cfg.lam / np.maximum(mag, 1e-300), 1.0), 1.0)
        px *= scale
        py *= scale
        x_old = x
        x = x - tau * (op.apply_adjoint(q) + neg_div_arrays(px, py, dx, dy))
        if cfg.nonneg:
            x = np.maximum(x, 0.0)
        x_bar = x + cfg.theta * (x - x_old)
        if (cfg.checkpoint_every and it % cfg.checkpoint_every == 0) or it == cfg.iterations:
            record(it, x)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"TV iterate diverged at iteration {it}")

    return grid.with_values(x), history
