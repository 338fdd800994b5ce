"""Photoacoustic tomography reconstruction toolkit.

Simulates acoustic measurements of 2D initial-pressure images on circular
sensor geometries, reconstructs by filtered back-projection, removes
sparse-data artifacts with small convolutional networks trained from scratch,
and provides total-variation minimization as an iterative baseline.
"""

__version__ = "0.1.0"

from .geometry import GridImage, SensorGeometry, Sinogram, make_arc_geometry, arc_below
from .containers import (
    read_image,
    write_image,
    read_sinogram,
    write_sinogram,
)
from .rng import Rng, derive_seed

__all__ = [
    "GridImage",
    "SensorGeometry",
    "Sinogram",
    "make_arc_geometry",
    "arc_below",
    "read_image",
    "write_image",
    "read_sinogram",
    "write_sinogram",
    "Rng",
    "derive_seed",
    "__version__",
]
