"""Functional forward/backward kernels for the network layers.

Every op is a (fwd, bwd) pair: fwd returns (output, cache), bwd consumes the
cache plus the upstream gradient and returns gradients for each input.
Tensors are single images, H x W x C, no batch axis; dtype follows the
inputs (float64 for gradient checking, float32 for training).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError, ValidationError

# ---------------------------------------------------------------------------
# padding helpers
# ---------------------------------------------------------------------------


def _reflect_indices(n: int, p: int) -> np.ndarray:
    """Source index for each padded index under mirror (no edge repeat) padding."""
    if p > n - 1:
        raise ShapeError(f"reflect padding {p} too large for extent {n}")
    j = np.arange(-p, n + p)
    j = np.where(j < 0, -j, j)
    j = np.where(j >= n, 2 * (n - 1) - j, j)
    return j


def _pad2d(x: np.ndarray, p: int, mode: str) -> np.ndarray:
    if p == 0:
        return x
    if mode == "zero":
        return np.pad(x, ((p, p), (p, p), (0, 0)))
    if mode == "reflect":
        _reflect_indices(x.shape[0], p)  # raises early if too small
        _reflect_indices(x.shape[1], p)
        return np.pad(x, ((p, p), (p, p), (0, 0)), mode="reflect")
    raise ValidationError(f"unknown pad mode {mode!r}")


def _unpad2d_grad(gxp: np.ndarray, p: int, mode: str, h: int, w: int) -> np.ndarray:
    """Adjoint of _pad2d: fold padded-border gradients back into the interior."""
    if p == 0:
        return gxp
    if mode == "zero":
        return gxp[p : p + h, p : p + w].copy()
    idx_h = _reflect_indices(h, p)
    idx_w = _reflect_indices(w, p)
    tmp = np.zeros((h,) + gxp.shape[1:], dtype=gxp.dtype)
    np.add.at(tmp, idx_h, gxp)
    tmp = tmp.transpose(1, 0, 2)
    out = np.zeros((w, h, gxp.shape[2]), dtype=gxp.dtype)
    np.add.at(out, idx_w, tmp)
    return out.transpose(1, 0, 2)


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------


def conv2d_fwd(
    x: np.ndarray,
    w: np.ndarray,
    b: np.ndarray | None = None,
    stride: int = 1,
    pad_mode: str = "zero",
):
    """Direct 2-D convolution, same-size at stride 1.

    x: H x W x Cin; w: k x k x Cin x Cout; b: Cout or None.
    Output spatial dims are ceil(H / stride) for odd k with (k-1)//2 padding.
    """
    if x.ndim != 3 or w.ndim != 4:
        raise ShapeError(f"conv2d: bad ranks x{x.shape} w{w.shape}")
    k = w.shape[0]
    if w.shape[1] != k or k % 2 == 0:
        raise ShapeError(f"conv2d: kernel must be odd square, got {w.shape[:2]}")
    if w.shape[2] != x.shape[2]:
        raise ShapeError(f"conv2d: Cin mismatch, x has {x.shape[2]}, w expects {w.shape[2]}")
    p = (k - 1) // 2
    xp = _pad2d(x, p, pad_mode)
    win = sliding_window_view(xp, (k, k), axis=(0, 1))[::stride, :: stride]
    ho, wo = win.shape[:2]
    cols = win.transpose(0, 1, 3, 4, 2).reshape(ho * wo, k * k * x.shape[2])
    y = cols @ w.reshape(-1, w.shape[3])
    if b is not None:
        y = y + b
    y = y.reshape(ho, wo, w.shape[3])
    cache = (cols, w, b is not None, x.shape, xp.shape, stride, p, pad_mode, k)
    return y, cache


def conv2d_bwd(cache, gy: np.ndarray):
    cols, w, has_bias, x_shape, xp_shape, stride, p, pad_mode, k = cache
    ho, wo, cout = gy.shape
    cin = x_shape[2]
    gy2 = gy.reshape(-1, cout)
    gw = (cols.T @ gy2).reshape(k, k, cin, cout)
    gb = gy2.sum(axis=0) if has_bias else None
    gcols = (gy2 @ w.reshape(-1, cout).T).reshape(ho, wo, k, k, cin)
    gxp = np.zeros(xp_shape, dtype=gy.dtype)
    for u in range(k):
        for v in range(k):
            gxp[u : u + stride * (ho - 1) + 1 : stride, v : v + stride * (wo - 1) + 1 : stride] += gcols[:, :, u, v, :]
    gx = _unpad2d_grad(gxp, p, pad_mode, x_shape[0], x_shape[1])
    return gx, gw, gb


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------


def relu_fwd(x: np.ndarray):
    mask = x > 0
    return np.where(mask, x, 0.0), mask


def relu_bwd(mask, gy):
    return gy * mask


def sigmoid_fwd(x: np.ndarray):
    y = np.empty_like(x)
    pos = x >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    y[~pos] = ex / (1.0 + ex)
    return y, y


def sigmoid_bwd(y, gy):
    return gy * y * (1.0 - y)


# ---------------------------------------------------------------------------
# curve non-linearity
# ---------------------------------------------------------------------------


def curve_apply_fwd(f: np.ndarray, a: np.ndarray):
    """Iterated quadratic curve C <- A_i * C * (1 - C) + C on clamped features.

    f: H x W x C features (clamped to [0,1] internally); a: H x W x n curve
    parameters in [0,1], one map per iteration, shared across feature
    channels at each pixel. Output stays in [0,1] and never drops below the
    clamped input (concave-down increasing curve family).
    """
    if f.ndim != 3 or a.ndim != 3:
        raise ShapeError(f"curve_activation: bad ranks f{f.shape} a{a.shape}")
    if a.shape[:2] != f.shape[:2]:
        raise ShapeError(f"curve_activation: spatial mismatch f{f.shape} a{a.shape}")
    if a.shape[2] < 1:
        raise ValidationError("curve_activation: need at least one parameter map")
    amin, amax = float(a.min()), float(a.max())
    if amin < -1e-6 or amax > 1.0 + 1e-6:
        raise ValidationError(f"curve parameters out of [0,1]: min={amin}, max={amax}")
    n = a.shape[2]
    c = np.clip(f, 0.0, 1.0)
    pre = []
    for i in range(n):
        ai = a[:, :, i, None]
        pre.append(c)
        c = c + ai * c * (1.0 - c)
    return c, (f, a, pre)


def curve_apply_bwd(cache, gy: np.ndarray):
    f, a, pre = cache
    n = a.shape[2]
    g = gy
    ga = np.empty_like(a)
    for i in reversed(range(n)):
        cp = pre[i]
        ai = a[:, :, i, None]
        ga[:, :, i] = (g * (cp * (1.0 - cp))).sum(axis=2)
        g = g * (1.0 + ai * (1.0 - 2.0 * cp))
    gf = g * ((f >= 0.0) & (f <= 1.0))
    return gf, ga


# ---------------------------------------------------------------------------
# pooling and resampling
# ---------------------------------------------------------------------------


def _pool_bounds(n: int, bins: int):
    idx = np.arange(bins)
    starts = (idx * n) // bins
    ends = -((-(idx + 1) * n) // bins)
    return starts, ends


def adaptive_avg_pool_fwd(x: np.ndarray, bins: int):
    """Mean-pool to a bins x bins grid (cells may overlap when bins > extent)."""
    if bins < 1:
        raise ShapeError(f"bins must be >= 1, got {bins}")
    h, w, c = x.shape
    sh, eh = _pool_bounds(h, bins)
    sw, ew = _pool_bounds(w, bins)
    y = np.empty((bins, bins, c), dtype=x.dtype)
    for i in range(bins):
        for j in range(bins):
            y[i, j] = x[sh[i] : eh[i], sw[j] : ew[j]].mean(axis=(0, 1))
    return y, (x.shape, sh, eh, sw, ew)


def adaptive_avg_pool_bwd(cache, gy: np.ndarray):
    x_shape, sh, eh, sw, ew = cache
    gx = np.zeros(x_shape, dtype=gy.dtype)
    bins = gy.shape[0]
    for i in range(bins):
        for j in range(bins):
            area = (eh[i] - sh[i]) * (ew[j] - sw[j])
            gx[sh[i] : eh[i], sw[j] : ew[j]] += gy[i, j] / area
    return gx


def _resize_matrix(n_in: int, n_out: int, dtype) -> np.ndarray:
    """Row-stochastic (n_out, n_in) interpolation matrix, corners aligned."""
    if n_in == 1 or n_out == 1:
        pos = np.zeros(n_out, dtype=np.float64)
    else:
        pos = np.linspace(0.0, n_in - 1.0, n_out)
    i0 = np.minimum(np.floor(pos).astype(np.int64), max(n_in - 2, 0))
    i1 = np.minimum(i0 + 1, n_in - 1)
    t = pos - i0
    m = np.zeros((n_out, n_in), dtype=np.float64)
    rows = np.arange(n_out)
    np.add.at(m, (rows, i0), 1.0 - t)
    np.add.at(m, (rows, i1), t)
    return m.astype(dtype)


def bilinear_resize_fwd(x: np.ndarray, out_h: int, out_w: int):
    """Corner-aligned bilinear resampling as two separable interpolations."""
    h, w, c = x.shape
    wy = _resize_matrix(h, out_h, x.dtype)
    wx = _resize_matrix(w, out_w, x.dtype)
    t = (wy @ x.reshape(h, w * c)).reshape(out_h, w, c)
    y = np.tensordot(t, wx, axes=([1], [1])).transpose(0, 2, 1)
    return np.ascontiguousarray(y), (x.shape, wy, wx)


def bilinear_resize_bwd(cache, gy: np.ndarray):
    x_shape, wy, wx = cache
    out_h, out_w, c = gy.shape
    t = (wy.T @ gy.reshape(out_h, out_w * c)).reshape(x_shape[0], out_w, c)
    gx = np.tensordot(t, wx, axes=([1], [0])).transpose(0, 2, 1)
    return np.ascontiguousarray(gx)


# ---------------------------------------------------------------------------
# filter-adaptive convolution
# ---------------------------------------------------------------------------


def fac_fwd(d: np.ndarray, k: np.ndarray, ksize: int):
    """Per-pixel, per-channel dynamic convolution with zero-padded borders.

    d: H x W x C features; k: H x W x (C * ksize^2) predicted filter bank,
    laid out channel-major (taps fastest). Each output element applies its
    own ksize x ksize kernel to the matching input channel.
    """
    if ksize < 1 or ksize % 2 == 0:
        raise ShapeError(f"fac kernel size must be odd, got {ksize}")
    h, w, c = d.shape
    if k.shape != (h, w, c * ksize * ksize):
        raise ShapeError(f"filter bank {k.shape} does not match features {d.shape} at d={ksize}")
    k4 = k.reshape(h, w, c, ksize * ksize)
    r = ksize // 2
    dp = np.pad(d, ((r, r), (r, r), (0, 0)))
    out = np.zeros_like(d)
    for u in range(ksize):
        for v in range(ksize):
            out += k4[:, :, :, u * ksize + v] * dp[u : u + h, v : v + w]
    return out, (dp, k4, ksize, d.shape)


def fac_bwd(cache, gy: np.ndarray):
    dp, k4, ksize, d_shape = cache
    h, w, c = d_shape
    r = ksize // 2
    gk4 = np.empty_like(k4)
    gdp = np.zeros_like(dp)
    for u in range(ksize):
        for v in range(ksize):
            idx = u * ksize + v
            gk4[:, :, :, idx] = gy * dp[u : u + h, v : v + w]
            gdp[u : u + h, v : v + w] += gy * k4[:, :, :, idx]
    gd = gdp[r : r + h, r : r + w].copy()
    gk = gk4.reshape(h, w, c * ksize * ksize)
    return gd, gk
