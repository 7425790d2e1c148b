"""Hand-differentiated 1D layer primitives on float64 numpy arrays.

Arrays are laid out as ``(channels, length)`` for a single series or
``(batch, channels, length)`` for a batch; every function accepts either and
returns the same rank it was given.  Convolutions use the cross-correlation
convention (no kernel flip).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ContractError(ValueError):
    """Raised when an input violates an operation's preconditions."""


@dataclass
class ConvLayer:
    weights: np.ndarray  # (out_channels, in_channels, kernel_width)
    bias: np.ndarray  # (out_channels,)
    stride: int = 1

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 3:
            raise ContractError(f"weights must be 3-D (out, in, kernel), got shape {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise ContractError(
                f"bias shape {self.bias.shape} does not match out_channels={self.weights.shape[0]}"
            )
        if self.kernel_width < 1:
            raise ContractError("kernel_width must be >= 1")
        if self.stride < 1:
            raise ContractError("stride must be >= 1")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ContractError("layer parameters must be finite")

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel_width(self) -> int:
        return self.weights.shape[2]

    @classmethod
    def init(cls, in_channels: int, out_channels: int, kernel_width: int = 7, stride: int = 1,
             rng: np.random.Generator | None = None) -> "ConvLayer":
        """He-normal weights, zero bias."""
        rng = np.random.default_rng() if rng is None else rng
        std = np.sqrt(2.0 / (in_channels * kernel_width))
        w = rng.normal(0.0, std, size=(out_channels, in_channels, kernel_width))
        return cls(w, np.zeros(out_channels), stride)


@dataclass
class ConvGrads:
    """Gradients of a scalar loss with respect to one layer's parameters and input."""

    dweights: np.ndarray
    dbias: np.ndarray
    dx: np.ndarray


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x[None], True
    if x.ndim == 3:
        return x, False
    raise ContractError(f"expected a (channels, length) or (batch, channels, length) array, got ndim={x.ndim}")


def same_padding(length: int, kernel_width: int, stride: int) -> tuple[int, int]:
    """Zero padding (left, right) giving ``ceil(length / stride)`` outputs."""
    out = -(-length // stride)
    total = max((out - 1) * stride + kernel_width - length, 0)
    return total // 2, total - total // 2


def conv_output_length(length: int, kernel_width: int, stride: int, same: bool = False) -> int:
    if same:
        return -(-length // stride)
    return (length - kernel_width) // stride + 1


def _check_conv_input(layer: ConvLayer, xb: np.ndarray, same: bool) -> None:
    if xb.shape[1] != layer.in_channels:
        raise ContractError(f"channels mismatch: input has {xb.shape[1]}, layer expects {layer.in_channels}")
    if not same and xb.shape[2] < layer.kernel_width:
        raise ContractError(f"length mismatch: input length {xb.shape[2]} < kernel_width {layer.kernel_width}")


def _pad(xb: np.ndarray, layer: ConvLayer, same: bool) -> tuple[np.ndarray, int]:
    if not same:
        return xb, 0
    left, right = same_padding(xb.shape[2], layer.kernel_width, layer.stride)
    if left == 0 and right == 0:
        return xb, 0
    return np.pad(xb, ((0, 0), (0, 0), (left, right))), left


def _columns(xp: np.ndarray, kernel_width: int, stride: int, n_out: int) -> np.ndarray:
    """im2col: ``(batch * n_out, channels * kernel_width)``, rows ordered batch-major."""
    win = sliding_window_view(xp, kernel_width, axis=2)[:, :, : (n_out - 1) * stride + 1 : stride, :]
    b, c, t, k = win.shape
    return win.transpose(0, 2, 1, 3).reshape(b * t, c * k)


def _scatter_add(dst: np.ndarray, parts: np.ndarray, stride: int) -> None:
    """``dst[:, :, j + stride * t] += parts[:, t, :, j]`` for every tap ``j``."""
    n = parts.shape[1]
    stop = (n - 1) * stride + 1
    for j in range(parts.shape[3]):
        dst[:, :, j: j + stop: stride] += parts[:, :, :, j].transpose(0, 2, 1)


def _rows(a: np.ndarray) -> np.ndarray:
    # (b, c, t) -> (b * t, c)
    return a.transpose(0, 2, 1).reshape(-1, a.shape[1])


def _unrows(a: np.ndarray, batch: int) -> np.ndarray:
    # (b * t, c) -> (b, c, t)
    return a.reshape(batch, -1, a.shape[1]).transpose(0, 2, 1)


def conv1d_forward(layer: ConvLayer, x: np.ndarray, same: bool = False) -> np.ndarray:
    """Strided 1D convolution; ``same=True`` zero-pads to ``ceil(length / stride)`` outputs."""
    xb, single = _as_batch(x)
    _check_conv_input(layer, xb, same)
    xp, _ = _pad(xb, layer, same)
    n_out = conv_output_length(xp.shape[2], layer.kernel_width, layer.stride)
    cols = _columns(xp, layer.kernel_width, layer.stride, n_out)
    out = cols @ layer.weights.reshape(layer.out_channels, -1).T
    out += layer.bias
    out = _unrows(out, xb.shape[0])
    return out[0] if single else out


def conv1d_backward(layer: ConvLayer, x: np.ndarray, upstream: np.ndarray, same: bool = False) -> ConvGrads:
    xb, single = _as_batch(x)
    gb, _ = _as_batch(upstream)
    _check_conv_input(layer, xb, same)
    xp, left = _pad(xb, layer, same)
    n_out = conv_output_length(xp.shape[2], layer.kernel_width, layer.stride)
    expected = (xb.shape[0], layer.out_channels, n_out)
    if gb.shape != expected:
        raise ContractError(f"upstream shape {gb.shape} does not match forward output shape {expected}")
    k, s = layer.kernel_width, layer.stride
    cols = _columns(xp, k, s, n_out)
    g2 = _rows(gb)
    dw = (g2.T @ cols).reshape(layer.weights.shape)
    db = g2.sum(axis=0)
    dcols = (g2 @ layer.weights.reshape(layer.out_channels, -1)).reshape(
        xb.shape[0], n_out, layer.in_channels, k)
    dxp = np.zeros_like(xp)
    _scatter_add(dxp, dcols, s)
    dx = dxp[:, :, left: left + xb.shape[2]]
    return ConvGrads(dw, db, dx[0] if single else dx)


def tconv_full_length(length: int, kernel_width: int, stride: int) -> int:
    return (length - 1) * stride + kernel_width


def _tconv_crop(n_in: int, layer: ConvLayer, target_length: int | None) -> tuple[int, int]:
    full = tconv_full_length(n_in, layer.kernel_width, layer.stride)
    if target_length is None:
        return 0, full
    if target_length > full or -(-target_length // layer.stride) != n_in:
        raise ContractError(
            f"target length {target_length} incompatible with input length {n_in}, "
            f"stride {layer.stride}, kernel_width {layer.kernel_width}")
    # mirrors same_padding so a cropped tconv is the adjoint of a same-padded conv
    return (full - target_length) // 2, target_length


def tconv1d_forward(layer: ConvLayer, x: np.ndarray, target_length: int | None = None) -> np.ndarray:
    """Transposed convolution; weights are ``(out, in, kernel)`` like :func:`conv1d_forward`.

    Full output length is ``(length - 1) * stride + kernel_width``.  With
    ``target_length`` the output is centre-cropped the same way ``same``
    padding pads, so the two are adjoint.
    """
    xb, single = _as_batch(x)
    if xb.shape[1] != layer.in_channels:
        raise ContractError(f"channels mismatch: input has {xb.shape[1]}, layer expects {layer.in_channels}")
    n_in = xb.shape[2]
    offset, n_out = _tconv_crop(n_in, layer, target_length)
    k, s = layer.kernel_width, layer.stride
    full = np.zeros((xb.shape[0], layer.out_channels, tconv_full_length(n_in, k, s)))
    w2 = layer.weights.transpose(1, 0, 2).reshape(layer.in_channels, -1)  # (in, out * k)
    contrib = (_rows(xb) @ w2).reshape(xb.shape[0], n_in, layer.out_channels, k)
    _scatter_add(full, contrib, s)
    out = full[:, :, offset: offset + n_out] + layer.bias[None, :, None]
    return out[0] if single else out


def tconv1d_backward(layer: ConvLayer, x: np.ndarray, upstream: np.ndarray,
                     target_length: int | None = None) -> ConvGrads:
    xb, single = _as_batch(x)
    gb, _ = _as_batch(upstream)
    n_in = xb.shape[2]
    offset, n_out = _tconv_crop(n_in, layer, target_length)
    expected = (xb.shape[0], layer.out_channels, n_out)
    if gb.shape != expected:
        raise ContractError(f"upstream shape {gb.shape} does not match forward output shape {expected}")
    k, s = layer.kernel_width, layer.stride
    gfull = np.zeros((xb.shape[0], layer.out_channels, tconv_full_length(n_in, k, s)))
    gfull[:, :, offset: offset + n_out] = gb
    cols = _columns(gfull, k, s, n_in)  # (b * t, out * k)
    x2 = _rows(xb)
    dw = (x2.T @ cols).reshape(layer.in_channels, layer.out_channels, k).transpose(1, 0, 2)
    db = gb.sum(axis=(0, 2))
    w2 = layer.weights.transpose(1, 0, 2).reshape(layer.in_channels, -1)
    dx = _unrows(cols @ w2.T, xb.shape[0])
    return ConvGrads(np.ascontiguousarray(dw), db, dx[0] if single else dx)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    return np.where(x > 0.0, upstream, 0.0)


def dropout(x: np.ndarray, rate: float, rng: np.random.Generator | None = None,
            train: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Inverted dropout. Returns ``(output, kept)``; ``kept`` is a boolean mask."""
    if not 0.0 <= rate < 1.0:
        raise ContractError(f"dropout rate must lie in [0, 1), got {rate}")
    x = np.asarray(x, dtype=np.float64)
    if not train or rate == 0.0:
        return x, np.ones(x.shape, dtype=bool)
    if rng is None:
        raise ContractError("dropout in train mode needs an rng")
    kept = rng.random(x.shape) >= rate
    return np.where(kept, x / (1.0 - rate), 0.0), kept


def dropout_backward(upstream: np.ndarray, kept: np.ndarray, rate: float) -> np.ndarray:
    return np.where(kept, upstream / (1.0 - rate), 0.0)


def _check_mse(x: np.ndarray, xhat: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    xhat = np.asarray(xhat, dtype=np.float64)
    if x.shape != xhat.shape:
        raise ContractError(f"shape mismatch: x {x.shape} vs xhat {xhat.shape}")
    m = np.asarray(mask, dtype=np.float64)
    if m.shape != x.shape[:-2] + x.shape[-1:]:
        raise ContractError(f"mask shape {m.shape} does not match series shape {x.shape}")
    if np.any(m.sum(axis=-1) == 0):
        raise ContractError("mask has no valid positions")
    return x, xhat, m


def masked_mse(x: np.ndarray, xhat: np.ndarray, mask: np.ndarray) -> float | np.ndarray:
    """Mean squared error over valid time steps and all channels.

    For batched input returns one value per batch member.
    """
    x, xhat, m = _check_mse(x, xhat, mask)
    sq = ((x - xhat) ** 2).sum(axis=-2)  # sum over channels
    n = x.shape[-2] * m.sum(axis=-1)
    out = (sq * m).sum(axis=-1) / n
    return float(out) if np.ndim(out) == 0 else out


def masked_mse_backward(x: np.ndarray, xhat: np.ndarray, mask: np.ndarray,
                        upstream: float | np.ndarray = 1.0) -> np.ndarray:
    """Gradient of :func:`masked_mse` with respect to ``xhat``."""
    x, xhat, m = _check_mse(x, xhat, mask)
    n = x.shape[-2] * m.sum(axis=-1)
    scale = np.asarray(upstream, dtype=np.float64) * 2.0 / n
    return (xhat - x) * (m * scale[..., None])[..., None, :]
