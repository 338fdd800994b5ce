"""Core data model: physical image grids, sensor arcs and sinograms.

Conventions used throughout the toolkit:

* lengths are millimetres; time is rescaled by the sound speed so the wave
  equation has unit speed and time also carries mm,
* image values are stored row-major with row 0 at the top of the physical
  extent (y = y_max) and pixel centers at ``x_min + (j + 1/2) * dx``,
* all objects are immutable after construction and safe to share between
  threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

Extent = tuple[float, float, float, float]  # (x_min, x_max, y_min, y_max)


def _as_readonly_f64(values, shape) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.shape != shape:
        raise ValueError(f"values have shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("values must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GridImage:
    """Discretized image on a physical rectangle.

    ``values`` has shape ``(height, width)``; row 0 corresponds to the top
    of the extent (largest y).
    """

    width: int
    height: int
    extent: Extent
    values: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("width and height must be positive")
        x_min, x_max, y_min, y_max = self.extent
        if not (x_max > x_min and y_max > y_min):
            raise ValueError(f"extent {self.extent} must have positive side lengths")
        if not all(np.isfinite(self.extent)):
            raise ValueError("extent must be finite")
        object.__setattr__(self, "extent", tuple(float(v) for v in self.extent))
        object.__setattr__(
            self, "values", _as_readonly_f64(self.values, (self.height, self.width))
        )

    @property
    def dx(self) -> float:
        x_min, x_max, _, _ = self.extent
        return (x_max - x_min) / self.width

    @property
    def dy(self) -> float:
        _, _, y_min, y_max = self.extent
        return (y_max - y_min) / self.height

    @cached_property
    def x_centers(self) -> np.ndarray:
        """Pixel-center x coordinates, left to right (length ``width``)."""
        x_min = self.extent[0]
        return x_min + (np.arange(self.width) + 0.5) * self.dx

    @cached_property
    def y_centers(self) -> np.ndarray:
        """Pixel-center y coordinates, top to bottom (length ``height``)."""
        y_max = self.extent[3]
        return y_max - (np.arange(self.height) + 0.5) * self.dy

    def with_values(self, values) -> "GridImage":
        """Same grid, new pixel values."""
        return GridImage(self.width, self.height, self.extent, values)

    @staticmethod
    def zeros(width: int, height: int, extent: Extent) -> "GridImage":
        return GridImage(width, height, extent, np.zeros((height, width)))


@dataclass(frozen=True, eq=False)
class SensorGeometry:
    """Uniformly spaced detectors on a circular arc of radius ``radius``.

    Detector m sits at angle ``theta_start + (m + 1/2) * span / M`` so no
    detector lands on an arc endpoint; the associated arc-length quadrature
    weight is ``radius * span / M`` for every detector.
    """

    radius: float
    theta_start: float
    theta_end: float
    num_detectors: int

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.num_detectors < 2:
            raise ValueError(f"need at least 2 detectors, got {self.num_detectors}")
        if not self.theta_start < self.theta_end:
            raise ValueError("theta_start must be below theta_end")
        if self.theta_end - self.theta_start > 2 * np.pi + 1e-12:
            raise ValueError("arc span cannot exceed a full circle")

    @property
    def span(self) -> float:
        return self.theta_end - self.theta_start

    @cached_property
    def angles(self) -> np.ndarray:
        m = np.arange(self.num_detectors)
        return self.theta_start + (m + 0.5) * self.span / self.num_detectors

    @cached_property
    def positions(self) -> np.ndarray:
        """Detector positions, shape (M, 2)."""
        pos = self.radius * np.stack([np.cos(self.angles), np.sin(self.angles)], axis=1)
        pos.setflags(write=False)
        return pos

    @property
    def arc_weight(self) -> float:
        """Arc length per detector, ``radius * span / M``."""
        return self.radius * self.span / self.num_detectors


def make_arc_geometry(
    radius: float, num_detectors: int, theta_start: float, theta_end: float
) -> SensorGeometry:
    """Detectors at the angular midpoints of ``num_detectors`` equal sub-arcs."""
    return SensorGeometry(
        radius=float(radius),
        theta_start=float(theta_start),
        theta_end=float(theta_end),
        num_detectors=int(num_detectors),
    )


def arc_below(radius: float = 50.0, num_detectors: int = 28, y_cut: float = -11.1) -> SensorGeometry:
    """Arc covering the part of the circle with second coordinate below ``y_cut``.

    The default is the limited-view setup used by the bundled experiment
    pipeline: 28 detectors on ``|s| = 50 mm`` with ``s_y < -11.1 mm``.
    """
    if abs(y_cut) >= radius:
        raise ValueError(f"|y_cut| = {abs(y_cut)} must be below the radius {radius}")
    half = np.arcsin(y_cut / radius)
    return make_arc_geometry(radius, num_detectors, np.pi - half, 2 * np.pi + half)


def full_circle(radius: float, num_detectors: int) -> SensorGeometry:
    """Detectors uniformly covering the whole circle."""
    return make_arc_geometry(radius, num_detectors, 0.0, 2 * np.pi)


@dataclass(frozen=True, eq=False)
class Sinogram:
    """Pressure samples at detector positions times uniform time samples.

    ``values[m, n]`` is the pressure at detector m and time ``n * dt``
    (t0 = 0).
    """

    geometry: SensorGeometry
    dt: float
    values: np.ndarray

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        arr = np.asarray(self.values)
        if arr.ndim != 2 or arr.shape[0] != self.geometry.num_detectors:
            raise ValueError(
                f"values must be (M, N) with M = {self.geometry.num_detectors}, got {arr.shape}"
            )
        if arr.shape[1] < 2:
            raise ValueError("need at least 2 time samples")
        object.__setattr__(
            self, "values", _as_readonly_f64(arr, (arr.shape[0], arr.shape[1]))
        )

    @property
    def num_times(self) -> int:
        return self.values.shape[1]

    @cached_property
    def times(self) -> np.ndarray:
        return np.arange(self.num_times) * self.dt

    def with_values(self, values) -> "Sinogram":
        return Sinogram(self.geometry, self.dt, values)
