"""Quantitative evaluation: relative MSE, cross-sections, method reports."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import GridImage


def rel_mse(truth: GridImage, recon: GridImage) -> float:
    """Squared l2 error of (recon - truth) divided by the squared l2 norm of truth."""
    t = truth.values if isinstance(truth, GridImage) else np.asarray(truth)
    r = recon.values if isinstance(recon, GridImage) else np.asarray(recon)
    if t.shape != r.shape:
        raise ValueError(f"shape mismatch: truth {t.shape}, recon {r.shape}")
    denom = float((t * t).sum())
    if denom == 0.0:
        raise ZeroDivisionError("relative MSE is undefined for an identically zero truth")
    return float(((r - t) ** 2).sum()) / denom


def cross_section(image: GridImage, row: int | None = None, y: float | None = None):
    """One pixel row as (x coordinates, values); select by index or physical y."""
    if (row is None) == (y is None):
        raise ValueError("give exactly one of row index or physical y")
    if y is not None:
        _, _, y_min, y_max = image.extent
        if not y_min <= y <= y_max:
            raise ValueError(f"y = {y} outside extent [{y_min}, {y_max}]")
        row = int(np.clip((y_max - y) / image.dy, 0, image.height - 1))
    if not 0 <= row < image.height:
        raise ValueError(f"row {row} out of range [0, {image.height})")
    return image.x_centers.copy(), image.values[row].copy()


@dataclass
class EvalReport:
    """Per-image relative MSE for each reconstruction method plus aggregates."""

    files: list[str]
    per_image: dict[str, list[float]] = field(default_factory=dict)
    manifests: list[str] = field(default_factory=list)

    def add(self, method: str, values) -> None:
        values = [float(v) for v in values]
        if len(values) != len(self.files):
            raise ValueError(f"{method}: {len(values)} values for {len(self.files)} files")
        self.per_image[method] = values

    def mean(self, method: str) -> float:
        return float(np.mean(self.per_image[method]))

    def median(self, method: str) -> float:
        return float(np.median(self.per_image[method]))

    def to_text(self) -> str:
        lines = ["relative MSE by method", "======================"]
        if self.manifests:
            lines.append("inputs: " + ", ".join(self.manifests))
        lines.append("")
        lines.append(f"{'method':12s} {'mean':>12s} {'median':>12s} {'n':>5s}")
        for method in sorted(self.per_image):
            lines.append(
                f"{method:12s} {self.mean(method):12.6f} {self.median(method):12.6f} "
                f"{len(self.files):5d}"
            )
        lines.append("")
        lines.append("per-image:")
        header = "file," + ",".join(sorted(self.per_image))
        lines.append(header)
        for i, name in enumerate(self.files):
            vals = ",".join(f"{self.per_image[m][i]:.6f}" for m in sorted(self.per_image))
            lines.append(f"{name},{vals}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        header = "file," + ",".join(sorted(self.per_image))
        rows = [header]
        for i, name in enumerate(self.files):
            vals = ",".join(repr(self.per_image[m][i]) for m in sorted(self.per_image))
            rows.append(f"{name},{vals}")
        return "\n".join(rows) + "\n"


def write_profile_csv(path, x_mm: np.ndarray, columns: dict[str, np.ndarray]) -> None:
    """Cross-section overlay table with columns x_mm, then one per method."""
    names = list(columns)
    for name in names:
        if len(columns[name]) != len(x_mm):
            raise ValueError(f"column {name!r} length differs from x grid")
    with open(path, "w") as f:
        f.write("x_mm," + ",".join(names) + "\n")
        for i in range(len(x_mm)):
            f.write(repr(float(x_mm[i])) + "," + ",".join(repr(float(columns[n][i])) for n in names) + "\n")
