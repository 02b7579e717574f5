"""Parameter-owning blocks built on the functional kernels.

Blocks cache whatever their backward pass needs on forward and accumulate
parameter gradients in place, so a trainer can sum gradients over a batch
before stepping. All blocks process one H x W x C image at a time.
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from . import ops


class Param:
    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)

    def __repr__(self):
        return f"Param({self.name}, shape={self.value.shape})"


class ParamStore:
    """Named parameters in deterministic registration order."""

    def __init__(self):
        self._params: dict[str, Param] = {}

    def register(self, name: str, value: np.ndarray) -> Param:
        if name in self._params:
            raise ValidationError(f"duplicate parameter name {name!r}")
        p = Param(name, value)
        self._params[name] = p
        return p

    def zero_grads(self):
        for p in self._params.values():
            p.grad[...] = 0.0

    def items(self):
        return self._params.items()

    def __getitem__(self, name: str) -> Param:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self):
        return len(self._params)

    def names(self):
        return list(self._params.keys())

    def num_values(self) -> int:
        return sum(p.value.size for p in self._params.values())


class Identity:
    def forward(self, x):
        return x

    def backward(self, gy):
        return gy


class Conv2d:
    def __init__(
        self,
        store: ParamStore,
        name: str,
        cin: int,
        cout: int,
        k: int,
        rng: np.random.Generator,
        stride: int = 1,
        pad_mode: str = "zero",
        dtype=np.float32,
        weight_scale: float = 1.0,
        bias_init: np.ndarray | None = None,
    ):
        std = weight_scale * np.sqrt(2.0 / (k * k * cin))
        w = (rng.standard_normal((k, k, cin, cout)) * std).astype(dtype)
        b = np.zeros(cout, dtype=dtype) if bias_init is None else bias_init.astype(dtype)
        self.w = store.register(f"{name}.w", w)
        self.b = store.register(f"{name}.b", b)
        self.stride = stride
        self.pad_mode = pad_mode
        self._cache = None

    def forward(self, x):
        y, self._cache = ops.conv2d_fwd(x, self.w.value, self.b.value, self.stride, self.pad_mode)
        return y

    def backward(self, gy):
        gx, gw, gb = ops.conv2d_bwd(self._cache, gy)
        self.w.grad += gw
        self.b.grad += gb
        return gx


class ReLU:
    def forward(self, x):
        y, self._mask = ops.relu_fwd(x)
        return y

    def backward(self, gy):
        return ops.relu_bwd(self._mask, gy)


class Sigmoid:
    def forward(self, x):
        y, self._y = ops.sigmoid_fwd(x)
        return y

    def backward(self, gy):
        return ops.sigmoid_bwd(self._y, gy)


class ResidualBlock:
    """x + conv(relu(conv(x))), width-preserving.

    The closing conv starts at zero so the block is an identity at init;
    without normalization layers this keeps deep stacks from blowing up.
    """

    def __init__(self, store, name, c, rng, dtype=np.float32):
        self.c1 = Conv2d(store, f"{name}.c1", c, c, 3, rng, dtype=dtype)
        self.c2 = Conv2d(store, f"{name}.c2", c, c, 3, rng, dtype=dtype, weight_scale=0.0)
        self.act = ReLU()

    def forward(self, x):
        return x + self.c2.forward(self.act.forward(self.c1.forward(x)))

    def backward(self, gy):
        return gy + self.c1.backward(self.act.backward(self.c2.backward(gy)))


class ResidualDown:
    """Stride-2 conv-relu-conv main path plus a stride-2 1x1 skip."""

    def __init__(self, store, name, cin, cout, rng, dtype=np.float32):
        self.c1 = Conv2d(store, f"{name}.c1", cin, cout, 3, rng, stride=2, dtype=dtype)
        self.c2 = Conv2d(store, f"{name}.c2", cout, cout, 3, rng, dtype=dtype, weight_scale=0.0)
        self.skip = Conv2d(store, f"{name}.skip", cin, cout, 1, rng, stride=2, dtype=dtype)
        self.act = ReLU()

    def forward(self, x):
        main = self.c2.forward(self.act.forward(self.c1.forward(x)))
        return main + self.skip.forward(x)

    def backward(self, gy):
        gx = self.skip.backward(gy)
        gx = gx + self.c1.backward(self.act.backward(self.c2.backward(gy)))
        return gx


class ResidualUp:
    """Bilinear 2x upsample, then conv-relu-conv with a 1x1 skip."""

    def __init__(self, store, name, cin, cout, rng, dtype=np.float32):
        self.c1 = Conv2d(store, f"{name}.c1", cin, cout, 3, rng, dtype=dtype)
        self.c2 = Conv2d(store, f"{name}.c2", cout, cout, 3, rng, dtype=dtype, weight_scale=0.0)
        self.skip = Conv2d(store, f"{name}.skip", cin, cout, 1, rng, dtype=dtype)
        self.act = ReLU()

    def forward(self, x):
        h, w, _ = x.shape
        up, self._up_cache = ops.bilinear_resize_fwd(x, 2 * h, 2 * w)
        main = self.c2.forward(self.act.forward(self.c1.forward(up)))
        return main + self.skip.forward(up)

    def backward(self, gy):
        g_up = self.skip.backward(gy)
        g_up = g_up + self.c1.backward(self.act.backward(self.c2.backward(gy)))
        return ops.bilinear_resize_bwd(self._up_cache, g_up)


class PPM:
    """Pyramid pooling: mean-pool at several bin sizes, 1x1-project each to
    C/4 channels, upsample back, concatenate with the input, fuse by 3x3 conv."""

    def __init__(self, store, name, c, rng, bins=(1, 2, 3, 6), dtype=np.float32):
        if c % 4 != 0 or c < 4:
            raise ValidationError(f"PPM width must be a positive multiple of 4, got {c}")
        self.c = c
        self.bins = tuple(bins)
        self.branches = [
            Conv2d(store, f"{name}.b{b}", c, c // 4, 1, rng, dtype=dtype) for b in self.bins
        ]
        # reflect padding keeps constant inputs constant out to the borders
        self.fuse = Conv2d(store, f"{name}.fuse", 2 * c, c, 3, rng, pad_mode="reflect", dtype=dtype)

    def forward(self, x):
        h, w, _ = x.shape
        self._pool_caches = []
        self._up_caches = []
        feats = [x]
        for b, conv in zip(self.bins, self.branches):
            pooled, pc = ops.adaptive_avg_pool_fwd(x, b)
            z = conv.forward(pooled)
            up, uc = ops.bilinear_resize_fwd(z, h, w)
            self._pool_caches.append(pc)
            self._up_caches.append(uc)
            feats.append(up)
        return self.fuse.forward(np.concatenate(feats, axis=2))

    def backward(self, gy):
        gcat = self.fuse.backward(gy)
        c = self.c
        gx = gcat[:, :, :c].copy()
        off = c
        step = c // 4
        for conv, pc, uc in zip(self.branches, self._pool_caches, self._up_caches):
            gz = ops.bilinear_resize_bwd(uc, np.ascontiguousarray(gcat[:, :, off : off + step]))
            gpooled = conv.backward(gz)
            gx += ops.adaptive_avg_pool_bwd(pc, gpooled)
            off += step
        return gx


class CurveEstimator:
    """Three 3x3 convs (ReLU between) followed by a sigmoid: F -> A in (0,1)."""

    def __init__(self, store, name, c, n, rng, dtype=np.float32):
        self.c1 = Conv2d(store, f"{name}.c1", c, c, 3, rng, dtype=dtype)
        self.c2 = Conv2d(store, f"{name}.c2", c, c, 3, rng, dtype=dtype)
        self.c3 = Conv2d(store, f"{name}.c3", c, n, 3, rng, dtype=dtype)
        self.a1, self.a2 = ReLU(), ReLU()
        self.out = Sigmoid()

    def forward(self, x):
        t = self.a1.forward(self.c1.forward(x))
        t = self.a2.forward(self.c2.forward(t))
        return self.out.forward(self.c3.forward(t))

    def backward(self, gy):
        g = self.c3.backward(self.out.backward(gy))
        g = self.c1.backward(self.a1.backward(self.c2.backward(self.a2.backward(g))))
        return g


class CurveActivation:
    """Learnable concave-down activation: estimate per-pixel curve parameters
    from the feature map, then apply the iterated quadratic curve to it."""

    def __init__(self, store, name, c, n, rng, dtype=np.float32):
        self.estimator = CurveEstimator(store, f"{name}.est", c, n, rng, dtype=dtype)
        self.last_a = None

    def forward(self, x):
        a = self.estimator.forward(x)
        self.last_a = a
        y, self._cache = ops.curve_apply_fwd(x, a)
        return y

    def backward(self, gy):
        gf, ga = ops.curve_apply_bwd(self._cache, gy)
        return gf + self.estimator.backward(ga)


class FilterBankHead:
    """Predicts a per-pixel filter bank from enhanced features: three 3x3
    convs with ReLUs, then a 1x1 expansion to C * d^2 channels.

    The expansion starts near a delta filter (small weights, center-tap bias)
    so the downstream dynamic convolution begins as an identity.
    """

    def __init__(self, store, name, c, d, rng, dtype=np.float32):
        self.c_feat = c
        self.d = d
        self.c1 = Conv2d(store, f"{name}.c1", c, c, 3, rng, dtype=dtype)
        self.c2 = Conv2d(store, f"{name}.c2", c, c, 3, rng, dtype=dtype)
        self.c3 = Conv2d(store, f"{name}.c3", c, c, 3, rng, dtype=dtype)
        bias = np.zeros(c * d * d, dtype=dtype)
        bias[np.arange(c) * d * d + (d * d) // 2] = 1.0
        self.expand = Conv2d(
            store, f"{name}.expand", c, c * d * d, 1, rng,
            dtype=dtype, weight_scale=0.1, bias_init=bias,
        )
        self.a1, self.a2, self.a3 = ReLU(), ReLU(), ReLU()

    def forward(self, e):
        t = self.a1.forward(self.c1.forward(e))
        t = self.a2.forward(self.c2.forward(t))
        t = self.a3.forward(self.c3.forward(t))
        return self.expand.forward(t)

    def backward(self, gk):
        g = self.a3.backward(self.expand.backward(gk))
        g = self.a2.backward(self.c3.backward(g))
        g = self.a1.backward(self.c2.backward(g))
        return self.c1.backward(g)


class FilterAdaptiveSkip:
    """Filter-adaptive skip: transform decoder features with kernels
    predicted from the enhanced encoder features at the same scale."""

    def __init__(self, store, name, c, d, rng, dtype=np.float32):
        self.head = FilterBankHead(store, name, c, d, rng, dtype=dtype)
        self.d = d

    def forward(self, dec, enh):
        k = self.head.forward(enh)
        y, self._cache = ops.fac_fwd(dec, k, self.d)
        return y

    def backward(self, gy):
        gd, gk = ops.fac_bwd(self._cache, gy)
        ge = self.head.backward(gk)
        return gd, ge


class ConcatSkip:
    """Plain skip for ablation: concatenate and fuse with a 1x1 conv."""

    def __init__(self, store, name, c, rng, dtype=np.float32):
        self.c = c
        self.fuse = Conv2d(store, f"{name}.fuse", 2 * c, c, 1, rng, dtype=dtype)

    def forward(self, dec, enh):
        return self.fuse.forward(np.concatenate([dec, enh], axis=2))

    def backward(self, gy):
        gcat = self.fuse.backward(gy)
        c = self.c
        return np.ascontiguousarray(gcat[:, :, :c]), np.ascontiguousarray(gcat[:, :, c:])
