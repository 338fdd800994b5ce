"""Network checkpoint container ("PATW").

Layout (little-endian):
    magic ``PATW`` | u32 version=1 | u32 tag length | tag utf-8 |
    u32 array count | per array: u32 ndim, ndim * u32 dims, f64 data |
    u32 CRC32 of everything before it.

Arrays are stored in layer order, kernel then bias, always as float64.
The tag encodes the architecture, e.g. ``snet;residual=0`` or
``unet;depth=3;base=16;residual=1``.
"""

from __future__ import annotations

import io
import struct
import zlib

import numpy as np

from ..containers import (
    BadMagicError,
    ContainerError,
    HeaderError,
    TruncatedFileError,
    VersionMismatchError,
    _read_exact,
)
from .models import ConvLayerParams, NetworkParams

MAGIC = b"PATW"
VERSION = 1


class ChecksumError(ContainerError):
    pass


def _tag(params: NetworkParams) -> str:
    res = int(params.residual)
    if params.arch == "snet":
        return f"snet;residual={res}"
    return f"unet;depth={params.depth};base={params.base_channels};residual={res}"


def _parse_tag(tag: str) -> dict:
    parts = tag.split(";")
    out = {"arch": parts[0]}
    for item in parts[1:]:
        key, _, val = item.partition("=")
        out[key] = int(val)
    if out["arch"] not in ("snet", "unet") or "residual" not in out:
        raise HeaderError(f"unrecognized architecture tag {tag!r}")
    return out


def save_params(path, params: NetworkParams) -> None:
    chunks = [MAGIC, struct.pack("<I", VERSION)]
    tag = _tag(params).encode("utf-8")
    chunks.append(struct.pack("<I", len(tag)))
    chunks.append(tag)
    arrays = []
    for layer in params.layers:
        arrays.append(layer.kernel)
        arrays.append(layer.bias)
    chunks.append(struct.pack("<I", len(arrays)))
    for arr in arrays:
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    blob = b"".join(chunks)
    with open(path, "wb") as f:
        f.write(blob)
        f.write(struct.pack("<I", zlib.crc32(blob) & 0xFFFFFFFF))


def load_params(path) -> NetworkParams:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 4:
        raise TruncatedFileError("file too short for magic")
    if data[:4] != MAGIC:
        raise BadMagicError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < 12:
        raise TruncatedFileError("file ends inside header")
    (stored_crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != stored_crc:
        raise ChecksumError("checkpoint CRC mismatch")

    f = io.BytesIO(data[4:-4])
    (version,) = struct.unpack("<I", _read_exact(f, 4, "version"))
    if version != VERSION:
        raise VersionMismatchError(f"unsupported checkpoint version {version}")
    (tag_len,) = struct.unpack("<I", _read_exact(f, 4, "tag length"))
    if tag_len > 4096:
        raise HeaderError(f"implausible tag length {tag_len}")
    info = _parse_tag(_read_exact(f, tag_len, "tag").decode("utf-8"))
    (n_arrays,) = struct.unpack("<I", _read_exact(f, 4, "array count"))
    if n_arrays % 2:
        raise HeaderError(f"array count {n_arrays} is not kernel/bias pairs")
    arrays = []
    for _ in range(n_arrays):
        (ndim,) = struct.unpack("<I", _read_exact(f, 4, "ndim"))
        if ndim > 4:
            raise HeaderError(f"implausible array rank {ndim}")
        shape = struct.unpack(f"<{ndim}I", _read_exact(f, 4 * ndim, "dims"))
        count = int(np.prod(shape)) if ndim else 1
        payload = _read_exact(f, 8 * count, "array payload")
        arrays.append(np.frombuffer(payload, dtype="<f8").reshape(shape))
    if f.read(1):
        raise HeaderError("trailing bytes after arrays")

    layers = tuple(
        ConvLayerParams(kernel=arrays[2 * i].copy(), bias=arrays[2 * i + 1].copy())
        for i in range(n_arrays // 2)
    )
    try:
        if info["arch"] == "snet":
            return NetworkParams(arch="snet", layers=layers, residual=bool(info["residual"]))
        return NetworkParams(
            arch="unet",
            layers=layers,
            residual=bool(info["residual"]),
            depth=info["depth"],
            base_channels=info["base"],
        )
    except (ValueError, KeyError) as exc:
        raise HeaderError(f"checkpoint does not describe a valid network: {exc}") from exc
