"""Random ring-superposition phantoms and dataset generation.

A phantom is a sum of 2 to 6 smooth rings, normalized so the maximum pixel
is exactly one.  Each ring has a radial profile built from three factors:

* a raised-cosine annular bump ``(1 + cos(pi*(rho - r)/(w/2)))/2`` on
  ``|rho - r| <= w/2``,
* an exponential factor ``exp(-kappa * max(0, r + w/2 - rho))`` modeling the
  loss of optical energy with depth into the absorbing ring,
* a Gaussian blur of standard deviation ``sigma_b`` applied to the 1D radial
  profile (not to the 2D image), so rendering is independent of the target
  grid resolution.  The blur kernel is truncated at 3 sigma and renormalized,
  which makes every ring exactly compactly supported with outer radius
  ``r + w/2 + 3*sigma_b``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .containers import write_image
from .geometry import Extent, GridImage
from .rng import Rng, derive_seed

BLUR_SUPPORT_SIGMAS = 3.0


class PhantomGenerationError(RuntimeError):
    """Raised when the requested parameter ranges admit no in-extent ring."""


@dataclass(frozen=True)
class RingSpec:
    center: tuple[float, float]
    radius: float
    width: float
    magnitude: float
    blur_sigma: float
    decay_rate: float

    def __post_init__(self):
        if self.radius <= 0 or self.width <= 0:
            raise ValueError("radius and width must be positive")
        if self.magnitude < 0 or self.blur_sigma < 0 or self.decay_rate < 0:
            raise ValueError("magnitude, blur_sigma and decay_rate must be non-negative")

    @property
    def outer_radius(self) -> float:
        """Radius outside which the rendered ring is exactly zero."""
        return self.radius + self.width / 2 + BLUR_SUPPORT_SIGMAS * self.blur_sigma


@dataclass(frozen=True)
class PhantomSpec:
    rings: tuple[RingSpec, ...]
    seed: int

    def __post_init__(self):
        if not 2 <= len(self.rings) <= 6:
            raise ValueError(f"phantom needs 2..6 rings, got {len(self.rings)}")


@dataclass(frozen=True)
class RingRanges:
    """Uniform sampling ranges for the ring parameters (all in mm except
    magnitude and decay_rate)."""

    radius: tuple[float, float] = (1.5, 5.0)
    width: tuple[float, float] = (0.6, 2.0)
    magnitude: tuple[float, float] = (0.5, 1.0)
    blur_sigma: tuple[float, float] = (0.05, 0.2)
    decay_rate: tuple[float, float] = (0.1, 0.5)


def ring_profile(spec: RingSpec, rho) -> np.ndarray:
    """Radial profile g(rho) of a unit-magnitude ring (vectorized in rho)."""
    rho = np.asarray(rho, dtype=np.float64)
    half = spec.width / 2.0

    def base(r):
        inside = np.abs(r - spec.radius) <= half
        bump = np.where(inside, 0.5 * (1.0 + np.cos(np.pi * (r - spec.radius) / half)), 0.0)
        depth = np.maximum(0.0, spec.radius + half - r)
        return bump * np.exp(-spec.decay_rate * depth)

    if spec.blur_sigma == 0.0:
        return base(rho)

    sigma = spec.blur_sigma
    step = min(sigma / 8.0, spec.width / 32.0)
    pad = BLUR_SUPPORT_SIGMAS * sigma
    lo = spec.radius - half - pad
    hi = spec.radius + half + pad
    grid = np.arange(lo, hi + step, step)
    khalf = int(np.ceil(pad / step))
    offsets = np.arange(-khalf, khalf + 1) * step
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    kernel /= kernel.sum()  # renormalized truncated Gaussian, mass-preserving
    blurred = np.convolve(base(grid), kernel, mode="same")
    return np.interp(rho, grid, blurred, left=0.0, right=0.0)


def _check_inside(spec: RingSpec, extent: Extent):
    x_min, x_max, y_min, y_max = extent
    cx, cy = spec.center
    r = spec.outer_radius
    if cx - r < x_min or cx + r > x_max or cy - r < y_min or cy + r > y_max:
        raise ValueError(
            f"ring at {spec.center} with outer radius {r:.3f} leaves the extent {extent}"
        )


def render_ring(spec: RingSpec, grid: GridImage) -> GridImage:
    """Render one ring onto the grid of ``grid`` (its values are ignored)."""
    _check_inside(spec, grid.extent)
    xx = grid.x_centers[None, :] - spec.center[0]
    yy = grid.y_centers[:, None] - spec.center[1]
    rho = np.hypot(xx, yy)
    return grid.with_values(spec.magnitude * ring_profile(spec, rho))


def render_phantom(rings, grid: GridImage) -> GridImage:
    """Sum of rendered rings, normalized so the maximum pixel equals one."""
    total = np.zeros((grid.height, grid.width))
    for spec in rings:
        total += render_ring(spec, grid).values
    peak = total.max()
    if peak <= 0:
        raise ValueError("phantom is identically zero")
    return grid.with_values(total / peak)


def sample_phantom(
    seed: int,
    grid: GridImage,
    ranges: RingRanges = RingRanges(),
    max_tries: int = 200,
) -> tuple[PhantomSpec, GridImage]:
    """Draw one random phantom.

    Draw order (fixed for reproducibility): ring count, then per ring
    radius, width, magnitude, blur_sigma, decay_rate and finally the center,
    which is uniform in the extent shrunk by the ring's outer radius.  Ring
    parameters whose outer radius does not fit anywhere are redrawn, up to
    ``max_tries`` attempts per ring.
    """
    rng = Rng(seed)
    x_min, x_max, y_min, y_max = grid.extent
    count = int(rng.integers(2, 7)[0])
    rings = []
    for _ in range(count):
        for attempt in range(max_tries):
            radius = float(rng.uniform(1, *ranges.radius)[0])
            width = float(rng.uniform(1, *ranges.width)[0])
            magnitude = float(rng.uniform(1, *ranges.magnitude)[0])
            blur_sigma = float(rng.uniform(1, *ranges.blur_sigma)[0])
            decay_rate = float(rng.uniform(1, *ranges.decay_rate)[0])
            margin = radius + width / 2 + BLUR_SUPPORT_SIGMAS * blur_sigma
            if x_min + margin >= x_max - margin or y_min + margin >= y_max - margin:
                continue
            cx = float(rng.uniform(1, x_min + margin, x_max - margin)[0])
            cy = float(rng.uniform(1, y_min + margin, y_max - margin)[0])
            rings.append(
                RingSpec(
                    center=(cx, cy),
                    radius=radius,
                    width=width,
                    magnitude=magnitude,
                    blur_sigma=blur_sigma,
                    decay_rate=decay_rate,
                )
            )
            break
        else:
            raise PhantomGenerationError(
                f"no in-extent ring found in {max_tries} attempts for extent {grid.extent}"
            )
    spec = PhantomSpec(rings=tuple(rings), seed=int(seed))
    return spec, render_phantom(spec.rings, grid)


def _spec_to_record(spec: PhantomSpec) -> dict:
    return {"seed": spec.seed, "rings": [asdict(r) for r in spec.rings]}


def _record_to_spec(rec: dict) -> PhantomSpec:
    rings = tuple(
        RingSpec(
            center=tuple(r["center"]),
            radius=r["radius"],
            width=r["width"],
            magnitude=r["magnitude"],
            blur_sigma=r["blur_sigma"],
            decay_rate=r["decay_rate"],
        )
        for r in rec["rings"]
    )
    return PhantomSpec(rings=rings, seed=rec["seed"])


def generate_dataset(
    n: int,
    seed: int,
    out_dir,
    grid: GridImage,
    ranges: RingRanges = RingRanges(),
    prefix: str = "phantom",
) -> Path:
    """Write ``n`` phantom images plus a manifest; returns the manifest path.

    Phantom i uses the child seed ``derive_seed(seed, i)``, so images can be
    regenerated individually and generation order does not matter.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(n):
        child = derive_seed(seed, i)
        spec, image = sample_phantom(child, grid, ranges)
        name = f"{prefix}_{i:05d}.pati"
        try:
            write_image(out_dir / name, image)
        except OSError as exc:
            raise OSError(f"failed writing {out_dir / name}: {exc}") from exc
        rec = {"index": i, "file": name}
        rec.update(_spec_to_record(spec))
        records.append(rec)
    manifest = {
        "format": "patrec-phantom-manifest",
        "version": 1,
        "toolkit_version": __version__,
        "master_seed": int(seed),
        "grid": {"width": grid.width, "height": grid.height, "extent": list(grid.extent)},
        "ranges": asdict(ranges),
        "records": records,
    }
    manifest_path = out_dir / f"{prefix}_manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def load_manifest(manifest_path) -> dict:
    with open(manifest_path) as f:
        manifest = json.load(f)
    if manifest.get("format") != "patrec-phantom-manifest":
        raise ValueError(f"{manifest_path} is not a phantom manifest")
    return manifest


def manifest_grid(manifest: dict) -> GridImage:
    g = manifest["grid"]
    return GridImage.zeros(g["width"], g["height"], tuple(g["extent"]))


def regenerate_from_manifest(manifest: dict) -> list[tuple[str, GridImage]]:
    """Re-render every phantom recorded in a manifest (bitwise reproducible)."""
    grid = manifest_grid(manifest)
    out = []
    for rec in manifest["records"]:
        spec = _record_to_spec(rec)
        out.append((rec["file"], render_phantom(spec.rings, grid)))
    return out
