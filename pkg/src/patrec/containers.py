"""Binary container formats for images and sinograms.

Image container ("PATI"):
    magic ``PATI`` | u32 version=1 | u32 width | u32 height |
    f64 x_min, x_max, y_min, y_max | width*height f32 values, row-major.

Sinogram container ("PATS"):
    magic ``PATS`` | u32 version=1 | u32 M | u32 N | f64 radius |
    f64 theta_start | f64 theta_end | f64 dt | M*N f32 values, detector-major.

All integers and floats are little-endian.  The stored payload is float32:
writing rounds the in-memory float64 values once; reading returns them
exactly, so a written file round-trips bit-identically.  PGM/PNG export is
lossy 8-bit and never read back.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .geometry import GridImage, SensorGeometry, Sinogram

IMAGE_MAGIC = b"PATI"
SINO_MAGIC = b"PATS"
FORMAT_VERSION = 1


class ContainerError(Exception):
    """Base class for container decode failures."""


class BadMagicError(ContainerError):
    pass


class VersionMismatchError(ContainerError):
    pass


class TruncatedFileError(ContainerError):
    pass


class HeaderError(ContainerError):
    """Structurally valid but nonsensical header fields."""


def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise TruncatedFileError(f"file ends inside {what} ({len(data)}/{n} bytes)")
    return data


def _check_header(f, magic: bytes):
    got = _read_exact(f, 4, "magic")
    if got != magic:
        raise BadMagicError(f"bad magic {got!r}, expected {magic!r}")
    (version,) = struct.unpack("<I", _read_exact(f, 4, "version"))
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"unsupported version {version}")


def write_image(path, image: GridImage) -> None:
    with open(path, "wb") as f:
        f.write(IMAGE_MAGIC)
        f.write(struct.pack("<III", FORMAT_VERSION, image.width, image.height))
        f.write(struct.pack("<4d", *image.extent))
        f.write(np.ascontiguousarray(image.values, dtype="<f4").tobytes())


def read_image(path) -> GridImage:
    with open(path, "rb") as f:
        _check_header(f, IMAGE_MAGIC)
        width, height = struct.unpack("<II", _read_exact(f, 8, "dimensions"))
        if width == 0 or height == 0:
            raise HeaderError(f"degenerate image size {width}x{height}")
        extent = struct.unpack("<4d", _read_exact(f, 32, "extent"))
        if not all(np.isfinite(extent)) or extent[1] <= extent[0] or extent[3] <= extent[2]:
            raise HeaderError(f"invalid extent {extent}")
        payload = _read_exact(f, 4 * width * height, "pixel payload")
        if f.read(1):
            raise HeaderError("trailing bytes after pixel payload")
    values = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(height, width)
    return GridImage(width=int(width), height=int(height), extent=extent, values=values)


def write_sinogram(path, sino: Sinogram) -> None:
    g = sino.geometry
    with open(path, "wb") as f:
        f.write(SINO_MAGIC)
        f.write(struct.pack("<III", FORMAT_VERSION, g.num_detectors, sino.num_times))
        f.write(struct.pack("<4d", g.radius, g.theta_start, g.theta_end, sino.dt))
        f.write(np.ascontiguousarray(sino.values, dtype="<f4").tobytes())


def read_sinogram(path) -> Sinogram:
    with open(path, "rb") as f:
        _check_header(f, SINO_MAGIC)
        m, n = struct.unpack("<II", _read_exact(f, 8, "dimensions"))
        if m < 2 or n < 2:
            raise HeaderError(f"degenerate sinogram size {m}x{n}")
        radius, theta_start, theta_end, dt = struct.unpack("<4d", _read_exact(f, 32, "geometry"))
        if not (radius > 0 and theta_start < theta_end and dt > 0):
            raise HeaderError("invalid geometry fields")
        payload = _read_exact(f, 4 * m * n, "sample payload")
        if f.read(1):
            raise HeaderError("trailing bytes after sample payload")
    geometry = SensorGeometry(
        radius=radius, theta_start=theta_start, theta_end=theta_end, num_detectors=int(m)
    )
    values = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(m, n)
    return Sinogram(geometry=geometry, dt=dt, values=values)


def _to_uint8(values: np.ndarray) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        return np.zeros(values.shape, dtype=np.uint8)
    scaled = (values - lo) / (hi - lo) * 255.0
    return np.round(scaled).astype(np.uint8)


def export_pgm(path, image: GridImage) -> None:
    """8-bit PGM with linear min-max scaling (visualization only)."""
    pix = _to_uint8(image.values)
    with open(path, "wb") as f:
        f.write(f"P5\n{image.width} {image.height}\n255\n".encode("ascii"))
        f.write(pix.tobytes())


def export_png(path, image: GridImage) -> None:
    """8-bit grayscale PNG with linear min-max scaling (visualization only)."""
    pix = _to_uint8(image.values)
    h, w = pix.shape

    def chunk(tag: bytes, data: bytes) -> bytes:
        crc = zlib.crc32(tag + data) & 0xFFFFFFFF
        return struct.pack(">I", len(data)) + tag + data + struct.pack(">I", crc)

    ihdr = struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)  # 8-bit grayscale
    raw = b"".join(b"\x00" + pix[i].tobytes() for i in range(h))
    with open(path, "wb") as f:
        f.write(b"\x89PNG\r\n\x1a\n")
        f.write(chunk(b"IHDR", ihdr))
        f.write(chunk(b"IDAT", zlib.compress(raw, 9)))
        f.write(chunk(b"IEND", b""))
