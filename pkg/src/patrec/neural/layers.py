"""Layer primitives on (batch, channels, height, width) arrays.

Convolutions use odd kernels with zero padding of (k-1)/2 so spatial size
is preserved; they are implemented as im2col plus one matrix product per
batch element.  Every backward function returns the exact gradient of its
forward map.
"""

from __future__ import annotations

import numpy as np


def _check_input(x: np.ndarray):
    if x.ndim != 4:
        raise ValueError(f"expected (batch, channels, height, width), got shape {x.shape}")


def _im2col(xp: np.ndarray, k: int) -> np.ndarray:
    """Padded input (B, C, Hp, Wp) -> patch matrix (B, C*k*k, H*W)."""
    b, c, hp, wp = xp.shape
    h, w = hp - k + 1, wp - k + 1
    cols = np.empty((b, c, k * k, h * w), dtype=xp.dtype)
    for di in range(k):
        for dj in range(k):
            cols[:, :, di * k + dj, :] = xp[:, :, di : di + h, dj : dj + w].reshape(b, c, h * w)
    return cols.reshape(b, c * k * k, h * w)


def _col2im(cols: np.ndarray, b: int, c: int, h: int, w: int, k: int) -> np.ndarray:
    """Exact transpose of pad + _im2col."""
    pad = (k - 1) // 2
    xp = np.zeros((b, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    cols = cols.reshape(b, c, k, k, h, w)
    for di in range(k):
        for dj in range(k):
            xp[:, :, di : di + h, dj : dj + w] += cols[:, :, di, dj]
    return xp[:, :, pad : pad + h, pad : pad + w]


def conv2d_forward_cols(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray):
    """conv2d_forward that also returns the im2col matrix for reuse."""
    _check_input(x)
    c_out, c_in, k, k2 = kernel.shape
    if k != k2 or k % 2 == 0:
        raise ValueError(f"kernel must be square with odd size, got {kernel.shape}")
    if x.shape[1] != c_in:
        raise ValueError(f"input has {x.shape[1]} channels, kernel expects {c_in}")
    if bias.shape != (c_out,):
        raise ValueError(f"bias must have shape ({c_out},), got {bias.shape}")
    b, _, h, w = x.shape
    pad = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = _im2col(xp, k)
    y = np.matmul(kernel.reshape(c_out, -1), cols) + bias[:, None]
    return y.reshape(b, c_out, h, w), cols


def conv2d_forward(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Same-size 2D convolution (cross-correlation) with zero padding."""
    return conv2d_forward_cols(x, kernel, bias)[0]


def conv2d_backward(
    x: np.ndarray,
    kernel: np.ndarray,
    grad_y: np.ndarray,
    cols: np.ndarray | None = None,
    need_input_grad: bool = True,
):
    """Gradients of conv2d_forward w.r.t. input, kernel and bias.

    ``cols`` may pass the im2col matrix cached from the forward pass;
    ``need_input_grad=False`` skips the input gradient (returned as None).
    """
    _check_input(x)
    b, c_in, h, w = x.shape
    c_out, _, k, _ = kernel.shape
    if grad_y.shape != (b, c_out, h, w):
        raise ValueError(f"grad has shape {grad_y.shape}, expected {(b, c_out, h, w)}")
    pad = (k - 1) // 2
    gy = np.ascontiguousarray(grad_y.reshape(b, c_out, h * w))
    if cols is None:
        cols = _im2col(np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))), k)
    grad_kernel = np.matmul(gy, cols.transpose(0, 2, 1)).sum(axis=0).reshape(kernel.shape)
    grad_bias = gy.sum(axis=(0, 2))
    grad_x = None
    if need_input_grad:
        w_t = np.ascontiguousarray(kernel.reshape(c_out, -1).T)
        grad_x = _col2im(np.matmul(w_t, gy), b, c_in, h, w, k)
    return grad_x, grad_kernel, grad_bias


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, grad_y: np.ndarray) -> np.ndarray:
    """Passes gradient where x > 0; the subgradient at exactly 0 is 0."""
    return grad_y * (x > 0)


def maxpool2_forward(x: np.ndarray):
    """2x2 max pooling with stride 2; returns (output, argmax routing)."""
    _check_input(x)
    b, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"pooling needs even spatial dims, got {h}x{w}")
    xr = (
        x.reshape(b, c, h // 2, 2, w // 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(b, c, h // 2, w // 2, 4)
    )
    idx = xr.argmax(axis=-1)
    y = np.take_along_axis(xr, idx[..., None], axis=-1)[..., 0]
    return y, idx


def maxpool2_backward(idx: np.ndarray, grad_y: np.ndarray, in_shape) -> np.ndarray:
    """Routes the gradient to the argmax position of each 2x2 block."""
    b, c, h, w = in_shape
    g = np.zeros((b, c, h // 2, w // 2, 4), dtype=grad_y.dtype)
    np.put_along_axis(g, idx[..., None], grad_y[..., None], axis=-1)
    return g.reshape(b, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h, w)


def upsample2_forward(x: np.ndarray) -> np.ndarray:
    """Nearest-neighbor 2x upsampling."""
    _check_input(x)
    return x.repeat(2, axis=2).repeat(2, axis=3)


def upsample2_backward(grad_y: np.ndarray) -> np.ndarray:
    """Sums the gradient over each replicated 2x2 block."""
    b, c, h, w = grad_y.shape
    return grad_y.reshape(b, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5))


def concat_forward(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Channel concatenation."""
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ValueError(f"cannot concatenate shapes {a.shape} and {b.shape}")
    return np.concatenate([a, b], axis=1)


def concat_backward(grad_y: np.ndarray, split: int):
    """Splits the gradient back into the two concatenated inputs."""
    return grad_y[:, :split], grad_y[:, split:]
