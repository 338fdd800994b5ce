"""Independent finite-difference time-domain reference for the wave forward map.

Second-order leapfrog on a square Cartesian grid with unit sound speed:

    u(t+dt) = 2 u(t) - u(t-dt) + dt^2 * laplacian(u(t))

started with ``u(dt) = u(0) + dt^2/2 * laplacian(u(0))`` (zero initial
velocity).  The computational domain is auto-sized so that no boundary
reflection can reach a detector before the end of the recording; a thin
sponge layer additionally damps whatever grazes the boundary.  Detector
time series are sampled bilinearly every step and interpolated onto the
requested uniform time grid.

This solver shares no discretization machinery with :mod:`patrec.wave`;
it exists to cross-check that operator and is deliberately built on a
different numerical route (time stepping instead of integral evaluation).
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .geometry import GridImage, SensorGeometry, Sinogram


def _auto_domain_radius(grid: GridImage, geometry: SensorGeometry, t_max: float) -> float:
    x_min, x_max, y_min, y_max = grid.extent
    r_support = max(np.hypot(x, y) for x in (x_min, x_max) for y in (y_min, y_max))
    r_det = float(np.linalg.norm(geometry.positions, axis=1).max())
    # a reflected path support -> boundary -> detector is at least 2B - r_support - r_det
    return 0.5 * (t_max + r_support + r_det) + 2.0


def simulate(
    image: GridImage,
    geometry: SensorGeometry,
    num_times: int,
    dt: float,
    dx: float | None = None,
    cfl: float = 0.5,
    domain_radius: float | None = None,
    sponge_cells: int = 12,
) -> Sinogram:
    """Reference pressure time series at the detectors of ``geometry``.

    ``dx`` defaults to half the smaller pixel spacing of the input image;
    ``cfl`` is dt_solver / dx and must stay below 1/sqrt(2).
    """
    if not 0 < cfl <= 0.5:
        raise ValueError("cfl must be in (0, 0.5] for this reference solver")
    if dx is None:
        dx = 0.5 * min(image.dx, image.dy)
    t_max = (num_times - 1) * dt
    if domain_radius is None:
        domain_radius = _auto_domain_radius(image, geometry, t_max)

    n = int(np.ceil(2 * domain_radius / dx)) + 1
    coords = -domain_radius + dx * np.arange(n)

    # initial condition: the image as a bilinear function, zero outside its extent
    x_min, x_max, y_min, y_max = image.extent
    interp = RegularGridInterpolator(
        (image.y_centers[::-1], image.x_centers),
        image.values[::-1],
        method="linear",
        bounds_error=False,
        fill_value=None,  # nearest-edge extrapolation inside the half-pixel margin
    )
    gx, gy = np.meshgrid(coords, coords)
    pts = np.stack([gy.ravel(), gx.ravel()], axis=1)
    u0 = interp(pts).reshape(n, n)
    outside = (gx < x_min) | (gx > x_max) | (gy < y_min) | (gy > y_max)
    u0[outside] = 0.0

    dt_solver = cfl * dx
    n_steps = int(np.ceil(t_max / dt_solver)) + 1
    c2 = dt_solver**2 / dx**2

    # sponge: exponential damping ramp over the outer cells
    damp = np.ones(n)
    if sponge_cells > 0:
        ramp = np.linspace(0.0, 1.0, sponge_cells)
        damp[:sponge_cells] = np.exp(-3.0 * (1.0 - ramp) ** 2)
        damp[-sponge_cells:] = np.exp(-3.0 * ramp**2)
    sponge = np.outer(damp, damp)

    # detector sampling weights (bilinear on the solver grid)
    det = geometry.positions
    fi = (det[:, 1] + domain_radius) / dx
    fj = (det[:, 0] + domain_radius) / dx
    i0 = np.clip(np.floor(fi).astype(int), 0, n - 2)
    j0 = np.clip(np.floor(fj).astype(int), 0, n - 2)
    wi = fi - i0
    wj = fj - j0

    def record(u):
        return (
            u[i0, j0] * (1 - wi) * (1 - wj)
            + u[i0, j0 + 1] * (1 - wi) * wj
            + u[i0 + 1, j0] * wi * (1 - wj)
            + u[i0 + 1, j0 + 1] * wi * wj
        )

    def laplacian(u):
        lap = np.zeros_like(u)
        lap[1:-1, 1:-1] = (
            u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2] - 4.0 * u[1:-1, 1:-1]
        )
        return lap

    series = np.empty((geometry.num_detectors, n_steps + 1))
    u_prev = u0
    series[:, 0] = record(u_prev)
    u_cur = u0 + 0.5 * c2 * laplacian(u0)
    u_cur *= sponge
    series[:, 1] = record(u_cur)
    for step in range(2, n_steps + 1):
        u_next = 2.0 * u_cur - u_prev + c2 * laplacian(u_cur)
        u_next *= sponge
        u_prev, u_cur = u_cur, u_next
        series[:, step] = record(u_cur)

    t_solver = dt_solver * np.arange(n_steps + 1)
    t_out = dt * np.arange(num_times)
    values = np.empty((geometry.num_detectors, num_times))
    for m in range(geometry.num_detectors):
        values[m] = np.interp(t_out, t_solver, series[m])
    return Sinogram(geometry, dt, values)
