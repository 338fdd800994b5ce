"""The two network architectures, their parameters, and backward passes.

Layer parameters live in a flat ordered tuple; the architecture tag plus
(for the U-Net) depth and base channel count determine how the pipeline
wires them.  The U-Net layer order is: encoder blocks top-down (two convs
each), bottleneck (two convs), decoder blocks bottom-up (two convs each),
final 1x1 projection.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..geometry import GridImage
from ..rng import Rng, derive_seed
from .layers import (
    concat_backward,
    concat_forward,
    conv2d_backward,
    conv2d_forward,
    conv2d_forward_cols,
    maxpool2_backward,
    maxpool2_forward,
    relu_backward,
    relu_forward,
    upsample2_backward,
    upsample2_forward,
)

SNET_KERNEL = 7
SNET_CHANNELS = (1, 64, 32, 1)


@dataclass(frozen=True, eq=False)
class ConvLayerParams:
    kernel: np.ndarray  # (C_out, C_in, k, k)
    bias: np.ndarray  # (C_out,)

    def __post_init__(self):
        if self.kernel.ndim != 4 or self.kernel.shape[2] != self.kernel.shape[3]:
            raise ValueError(f"kernel must be (C_out, C_in, k, k), got {self.kernel.shape}")
        if self.kernel.shape[2] % 2 == 0:
            raise ValueError("kernel size must be odd so padding preserves size")
        if self.bias.shape != (self.kernel.shape[0],):
            raise ValueError(f"bias shape {self.bias.shape} does not match kernel")
        if not (np.all(np.isfinite(self.kernel)) and np.all(np.isfinite(self.bias))):
            raise ValueError("parameters must be finite")

    @property
    def c_out(self) -> int:
        return self.kernel.shape[0]

    @property
    def c_in(self) -> int:
        return self.kernel.shape[1]

    @property
    def size(self) -> int:
        return self.kernel.size + self.bias.size


@dataclass(frozen=True, eq=False)
class NetworkParams:
    arch: str  # "snet" | "unet"
    layers: tuple[ConvLayerParams, ...]
    residual: bool
    depth: int = 0  # unet only
    base_channels: int = 0  # unet only

    def __post_init__(self):
        if self.arch == "snet":
            if len(self.layers) != 3:
                raise ValueError("snet has exactly 3 layers")
            for layer, (ci, co) in zip(self.layers, zip(SNET_CHANNELS, SNET_CHANNELS[1:])):
                if layer.kernel.shape != (co, ci, SNET_KERNEL, SNET_KERNEL):
                    raise ValueError(
                        f"snet layer must be ({co}, {ci}, 7, 7), got {layer.kernel.shape}"
                    )
        elif self.arch == "unet":
            expect = _unet_layer_shapes(self.depth, self.base_channels)
            if len(self.layers) != len(expect):
                raise ValueError(f"unet(depth={self.depth}) needs {len(expect)} layers")
            for layer, shape in zip(self.layers, expect):
                if layer.kernel.shape != shape:
                    raise ValueError(f"unet layer shape {layer.kernel.shape}, expected {shape}")
        else:
            raise ValueError(f"unknown architecture {self.arch!r}")

    def astype(self, dtype) -> "NetworkParams":
        return replace(
            self,
            layers=tuple(
                ConvLayerParams(l.kernel.astype(dtype), l.bias.astype(dtype)) for l in self.layers
            ),
        )


def param_count(params: NetworkParams) -> int:
    return sum(l.size for l in params.layers)


def _unet_layer_shapes(depth: int, base: int) -> list[tuple[int, int, int, int]]:
    if depth < 1 or base < 1:
        raise ValueError("unet needs depth >= 1 and base_channels >= 1")
    shapes = []
    ch_in = 1
    for i in range(depth):  # encoder
        ch = base * 2**i
        shapes.append((ch, ch_in, 3, 3))
        shapes.append((ch, ch, 3, 3))
        ch_in = ch
    ch = base * 2**depth  # bottleneck
    shapes.append((ch, ch_in, 3, 3))
    shapes.append((ch, ch, 3, 3))
    for i in reversed(range(depth)):  # decoder; input = upsampled + skip channels
        ch = base * 2**i
        shapes.append((ch, base * 2 ** (i + 1) + ch, 3, 3))
        shapes.append((ch, ch, 3, 3))
    shapes.append((1, base, 1, 1))  # final projection
    return shapes


def _glorot_layer(shape, rng: Rng, dtype) -> ConvLayerParams:
    c_out, c_in, k, _ = shape
    fan_in = c_in * k * k
    fan_out = c_out * k * k
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    kernel = rng.uniform(int(np.prod(shape)), -limit, limit).reshape(shape).astype(dtype)
    return ConvLayerParams(kernel=kernel, bias=np.zeros(c_out, dtype=dtype))


def snet_init(seed: int, residual: bool = False, dtype=np.float64) -> NetworkParams:
    """Seeded Glorot-uniform initialization of the three-layer network."""
    shapes = [
        (co, ci, SNET_KERNEL, SNET_KERNEL) for ci, co in zip(SNET_CHANNELS, SNET_CHANNELS[1:])
    ]
    layers = tuple(_glorot_layer(s, Rng(derive_seed(seed, i)), dtype) for i, s in enumerate(shapes))
    return NetworkParams(arch="snet", layers=layers, residual=residual)


def unet_init(
    seed: int, depth: int = 3, base_channels: int = 16, residual: bool = True, dtype=np.float64
) -> NetworkParams:
    shapes = _unet_layer_shapes(depth, base_channels)
    layers = tuple(_glorot_layer(s, Rng(derive_seed(seed, i)), dtype) for i, s in enumerate(shapes))
    return NetworkParams(
        arch="unet", layers=layers, residual=residual, depth=depth, base_channels=base_channels
    )


def make_network(arch: str, seed: int, **kwargs) -> NetworkParams:
    if arch == "snet":
        return snet_init(seed, **kwargs)
    if arch == "unet":
        return unet_init(seed, **kwargs)
    raise ValueError(f"unknown architecture {arch!r}")


# ---------------------------------------------------------------- S-Net


def _snet_forward(params: NetworkParams, x: np.ndarray):
    l1, l2, l3 = params.layers
    a1, c1 = conv2d_forward_cols(x, l1.kernel, l1.bias)
    r1 = relu_forward(a1)
    a2, c2 = conv2d_forward_cols(r1, l2.kernel, l2.bias)
    r2 = relu_forward(a2)
    a3, c3 = conv2d_forward_cols(r2, l3.kernel, l3.bias)
    y = a3 + x if params.residual else a3
    return y, (x, a1, r1, a2, r2, c1, c2, c3)


def _snet_backward(params: NetworkParams, cache, grad_y: np.ndarray, need_input_grad=True):
    x, a1, r1, a2, r2, c1, c2, c3 = cache
    l1, l2, l3 = params.layers
    gr2, gk3, gb3 = conv2d_backward(r2, l3.kernel, grad_y, cols=c3)
    ga2 = relu_backward(a2, gr2)
    gr1, gk2, gb2 = conv2d_backward(r1, l2.kernel, ga2, cols=c2)
    ga1 = relu_backward(a1, gr1)
    gx, gk1, gb1 = conv2d_backward(x, l1.kernel, ga1, cols=c1, need_input_grad=need_input_grad)
    if params.residual and need_input_grad:
        gx = gx + grad_y
    return [(gk1, gb1), (gk2, gb2), (gk3, gb3)], gx


# ---------------------------------------------------------------- U-Net


def _unet_forward(params: NetworkParams, x: np.ndarray):
    d = params.depth
    h, w = x.shape[2], x.shape[3]
    if h % 2**d or w % 2**d:
        raise ValueError(f"input {h}x{w} must be divisible by 2^{d}")
    layers = params.layers
    caches = []
    skips = []
    cur = x
    li = 0
    for _ in range(d):  # encoder
        for _ in range(2):
            a, cols = conv2d_forward_cols(cur, layers[li].kernel, layers[li].bias)
            caches.append(("conv_relu", cur, a, li, cols))
            cur = relu_forward(a)
            li += 1
        skips.append(cur)
        pooled, idx = maxpool2_forward(cur)
        caches.append(("pool", idx, cur.shape))
        cur = pooled
    for _ in range(2):  # bottleneck
        a, cols = conv2d_forward_cols(cur, layers[li].kernel, layers[li].bias)
        caches.append(("conv_relu", cur, a, li, cols))
        cur = relu_forward(a)
        li += 1
    for i in reversed(range(d)):  # decoder
        cur = upsample2_forward(cur)
        caches.append(("upsample",))
        skip = skips[i]
        cur = concat_forward(cur, skip)
        caches.append(("concat", cur.shape[1] - skip.shape[1]))
        for _ in range(2):
            a, cols = conv2d_forward_cols(cur, layers[li].kernel, layers[li].bias)
            caches.append(("conv_relu", cur, a, li, cols))
            cur = relu_forward(a)
            li += 1
    a, cols = conv2d_forward_cols(cur, layers[li].kernel, layers[li].bias)  # final 1x1, no relu
    caches.append(("conv", cur, li, cols))
    y = a + x if params.residual else a
    return y, caches


def _unet_backward(params: NetworkParams, caches, grad_y: np.ndarray, need_input_grad=True):
    layers = params.layers
    grads: list = [None] * len(layers)
    g = grad_y
    skip_grads: list = []
    for entry in reversed(caches):
        kind = entry[0]
        if kind == "conv":
            _, inp, li, cols = entry
            g, gk, gb = conv2d_backward(inp, layers[li].kernel, g, cols=cols)
            grads[li] = (gk, gb)
        elif kind == "conv_relu":
            _, inp, a, li, cols = entry
            g = relu_backward(a, g)
            want_g = need_input_grad or li != 0
            g, gk, gb = conv2d_backward(
                inp, layers[li].kernel, g, cols=cols, need_input_grad=want_g
            )
            grads[li] = (gk, gb)
        elif kind == "concat":
            g, g_skip = concat_backward(g, entry[1])
            skip_grads.append(g_skip)
        elif kind == "upsample":
            g = upsample2_backward(g)
        elif kind == "pool":
            _, idx, in_shape = entry
            g = maxpool2_backward(idx, g, in_shape)
            # the skip branch reenters here: add the gradient that flowed
            # through the matching decoder concatenation
            g = g + skip_grads.pop()
        else:  # pragma: no cover
            raise AssertionError(kind)
    if params.residual and need_input_grad:
        g = g + grad_y
    return grads, g if need_input_grad else None


# ---------------------------------------------------------------- dispatch


def network_forward(params: NetworkParams, x: np.ndarray):
    """Forward pass with cache for a later backward call."""
    if params.arch == "snet":
        return _snet_forward(params, x)
    return _unet_forward(params, x)


def network_backward(params: NetworkParams, cache, grad_y: np.ndarray, need_input_grad=True):
    """Per-layer (kernel, bias) gradients and the input gradient (None when
    ``need_input_grad`` is off, which skips the first layer's input pass)."""
    if params.arch == "snet":
        return _snet_backward(params, cache, grad_y, need_input_grad)
    return _unet_backward(params, cache, grad_y, need_input_grad)


def apply_network(params: NetworkParams, values: np.ndarray) -> np.ndarray:
    """Inference on a single (H, W) array."""
    y, _ = network_forward(params, values[None, None])
    return y[0, 0]


def _apply_image(params: NetworkParams, image: GridImage, expected: str, dtype) -> GridImage:
    if params.arch != expected:
        raise ValueError(f"parameters are for {params.arch!r}, expected {expected!r}")
    x = image.values.astype(dtype)
    out = apply_network(params.astype(dtype), x)
    return image.with_values(out.astype(np.float64))


def snet_apply(params: NetworkParams, image: GridImage, dtype=np.float64) -> GridImage:
    """Three-layer network applied to a reconstructed image."""
    return _apply_image(params, image, "snet", dtype)


def unet_apply(params: NetworkParams, image: GridImage, dtype=np.float64) -> GridImage:
    """U-Net applied to a reconstructed image (residual if so configured)."""
    return _apply_image(params, image, "unet", dtype)
