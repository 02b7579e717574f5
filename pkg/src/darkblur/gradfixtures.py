"""Seeded fixtures that wire every kernel into the finite-difference checker.

Each fixture builds double-precision inputs (and parameters, for blocks)
from its seed and exposes closures the harness can probe. The full-network
case checks the loss gradient on a sampled parameter slice at a looser
tolerance, since thousands of accumulations sit between probe and loss.
"""

from __future__ import annotations

import fnmatch
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError
from .kernels import ops
from .kernels.gradcheck import GradReport, finite_diff_check
from .kernels.layers import (
    CurveEstimator,
    CurveActivation,
    FilterBankHead,
    FilterAdaptiveSkip,
    ParamStore,
    PPM,
    ResidualBlock,
    ResidualDown,
    ResidualUp,
)
from .network import EnhanceDeblurNet, NetworkConfig, compute_loss, loss_gradients


def _rng(seed: int, salt: int) -> np.random.Generator:
    """Per-op entropy stream; salts are frozen where a draw would otherwise
    place a gradient entry at the central-difference noise floor."""
    return np.random.default_rng([seed, salt])

Builder = Callable[[int], tuple]


@dataclass(frozen=True)
class FixtureSpec:
    name: str
    tol: float
    build: Builder


REGISTRY: dict[str, FixtureSpec] = {}


def register(name: str, tol: float = 1e-4):
    def deco(build: Builder) -> Builder:
        REGISTRY[name] = FixtureSpec(name=name, tol=tol, build=build)
        return build

    return deco


def _randomize_store(store: ParamStore, rng: np.random.Generator):
    """Overwrite every parameter (including zero-initialized residual branches)
    so the checker exercises each gradient path."""
    for _, p in store.items():
        if p.value.ndim == 4:
            k, _, cin, _ = p.value.shape
            std = 0.7 * np.sqrt(2.0 / (k * k * cin))
            p.value[...] = rng.standard_normal(p.value.shape) * std
        else:
            p.value[...] = rng.standard_normal(p.value.shape) * 0.1


def _block_case(block, store: ParamStore, x: np.ndarray):
    params = list(store.items())

    def fwd():
        return block.forward(x)

    def grad(gy):
        block.forward(x)
        store.zero_grads()
        gx = block.backward(gy)
        return [gx] + [p.grad.copy() for _, p in params]

    return fwd, grad, [("x", x)] + [(name, p.value) for name, p in params]


def _conv_case(seed: int, salt: int, stride: int = 1, pad_mode: str = "zero", k: int = 3):
    rng = _rng(seed, salt)
    x = rng.standard_normal((6, 6, 3))
    w = rng.standard_normal((k, k, 3, 4)) * 0.5
    b = rng.standard_normal(4) * 0.1

    def fwd():
        return ops.conv2d_fwd(x, w, b, stride, pad_mode)[0]

    def grad(gy):
        _, cache = ops.conv2d_fwd(x, w, b, stride, pad_mode)
        return list(ops.conv2d_bwd(cache, gy))

    return fwd, grad, [("x", x), ("w", w), ("b", b)]


@register("conv2d")
def _conv_plain(seed):
    return _conv_case(seed, 10)


@register("conv2d_reflect")
def _conv_reflect(seed):
    return _conv_case(seed, 11, pad_mode="reflect")


@register("conv2d_stride2")
def _conv_stride2(seed):
    return _conv_case(seed, 12, stride=2)


@register("conv2d_1x1")
def _conv_1x1(seed):
    return _conv_case(seed, 13, k=1)


@register("curve_activation")
def _curve_activation(seed):
    rng = _rng(seed, 14)
    f = rng.uniform(0.05, 0.95, (5, 5, 3))
    a = rng.uniform(0.02, 0.98, (5, 5, 3))

    def fwd():
        return ops.curve_apply_fwd(f, a)[0]

    def grad(gy):
        _, cache = ops.curve_apply_fwd(f, a)
        return list(ops.curve_apply_bwd(cache, gy))

    return fwd, grad, [("f", f), ("a", a)]


@register("curve_estimator")
def _curve_estimator(seed):
    rng = _rng(seed, 15)
    store = ParamStore()
    block = CurveEstimator(store, "est", 4, 3, rng, dtype=np.float64)
    _randomize_store(store, rng)
    x = rng.standard_normal((6, 6, 4))
    return _block_case(block, store, x)


@register("curve_activation_block")
def _curve_activation_block(seed):
    rng = _rng(seed, 30)
    store = ParamStore()
    block = CurveActivation(store, "curve", 4, 2, rng, dtype=np.float64)
    _randomize_store(store, rng)
    x = rng.uniform(0.05, 0.95, (6, 6, 4))
    return _block_case(block, store, x)


@register("ppm")
def _ppm(seed):
    rng = _rng(seed, 2)
    store = ParamStore()
    block = PPM(store, "ppm", 8, rng, dtype=np.float64)
    _randomize_store(store, rng)
    x = rng.standard_normal((12, 12, 8))
    return _block_case(block, store, x)


@register("fac")
def _fac(seed):
    rng = _rng(seed, 17)
    d = 3
    feat = rng.standard_normal((6, 6, 2))
    bank = rng.standard_normal((6, 6, 2 * d * d)) * 0.5

    def fwd():
        return ops.fac_fwd(feat, bank, d)[0]

    def grad(gy):
        _, cache = ops.fac_fwd(feat, bank, d)
        return list(ops.fac_bwd(cache, gy))

    return fwd, grad, [("features", feat), ("filter_bank", bank)]


@register("filter_bank_head")
def _filter_bank_head(seed):
    rng = _rng(seed, 18)
    store = ParamStore()
    block = FilterBankHead(store, "filters", 4, 3, rng, dtype=np.float64)
    _randomize_store(store, rng)
    x = rng.standard_normal((6, 6, 4))
    return _block_case(block, store, x)


@register("filter_adaptive_skip")
def _filter_adaptive_skip(seed):
    rng = _rng(seed, 19)
    store = ParamStore()
    block = FilterAdaptiveSkip(store, "filters", 4, 3, rng, dtype=np.float64)
    _randomize_store(store, rng)
    dec = rng.standard_normal((6, 6, 4))
    enh = rng.standard_normal((6, 6, 4))
    params = list(store.items())

    def fwd():
        return block.forward(dec, enh)

    def grad(gy):
        block.forward(dec, enh)
        store.zero_grads()
        gd, ge = block.backward(gy)
        return [gd, ge] + [p.grad.copy() for _, p in params]

    return fwd, grad, [("dec", dec), ("enh", enh)] + [(n, p.value) for n, p in params]


@register("residual_block")
def _residual_block(seed):
    rng = _rng(seed, 20)
    store = ParamStore()
    block = ResidualBlock(store, "res", 4, rng, dtype=np.float64)
    _randomize_store(store, rng)
    x = rng.standard_normal((6, 6, 4))
    return _block_case(block, store, x)


@register("residual_down")
def _residual_down(seed):
    rng = _rng(seed, 21)
    store = ParamStore()
    block = ResidualDown(store, "down", 4, 6, rng, dtype=np.float64)
    _randomize_store(store, rng)
    x = rng.standard_normal((6, 6, 4))
    return _block_case(block, store, x)


@register("residual_up")
def _residual_up(seed):
    rng = _rng(seed, 22)
    store = ParamStore()
    block = ResidualUp(store, "up", 4, 3, rng, dtype=np.float64)
    _randomize_store(store, rng)
    x = rng.standard_normal((5, 5, 4))
    return _block_case(block, store, x)


@register("bilinear_resize")
def _bilinear_resize(seed):
    rng = _rng(seed, 23)
    x = rng.standard_normal((5, 7, 3))

    def fwd():
        return ops.bilinear_resize_fwd(x, 9, 11)[0]

    def grad(gy):
        _, cache = ops.bilinear_resize_fwd(x, 9, 11)
        return [ops.bilinear_resize_bwd(cache, gy)]

    return fwd, grad, [("x", x)]


@register("bilinear_resize_down")
def _bilinear_resize_down(seed):
    rng = _rng(seed, 24)
    x = rng.standard_normal((8, 8, 2))

    def fwd():
        return ops.bilinear_resize_fwd(x, 3, 5)[0]

    def grad(gy):
        _, cache = ops.bilinear_resize_fwd(x, 3, 5)
        return [ops.bilinear_resize_bwd(cache, gy)]

    return fwd, grad, [("x", x)]


@register("adaptive_pool")
def _adaptive_pool(seed):
    rng = _rng(seed, 25)
    x = rng.standard_normal((7, 7, 3))

    def fwd():
        return ops.adaptive_avg_pool_fwd(x, 3)[0]

    def grad(gy):
        _, cache = ops.adaptive_avg_pool_fwd(x, 3)
        return [ops.adaptive_avg_pool_bwd(cache, gy)]

    return fwd, grad, [("x", x)]


@register("adaptive_pool_up")
def _adaptive_pool_up(seed):
    rng = _rng(seed, 26)
    x = rng.standard_normal((4, 4, 2))

    def fwd():
        return ops.adaptive_avg_pool_fwd(x, 6)[0]

    def grad(gy):
        _, cache = ops.adaptive_avg_pool_fwd(x, 6)
        return [ops.adaptive_avg_pool_bwd(cache, gy)]

    return fwd, grad, [("x", x)]


@register("network_slice", tol=1e-3)
def _network_slice(seed):
    """Loss gradient w.r.t. 32 sampled parameter entries through the whole net."""
    cfg = NetworkConfig(base_channels=8, curve_n=2, fac_d=3)
    net = EnhanceDeblurNet(cfg, seed=1000 + seed, dtype=np.float64)
    rng = _rng(seed, 27)
    _randomize_store(net.store, rng)
    x = rng.uniform(0.05, 0.95, (16, 16, 3))
    y = rng.uniform(0.05, 0.95, (16, 16, 3))

    def run_backward(scale: float):
        trace = net.forward(x)
        g_y, g_y8, _ = loss_gradients(trace, y, cfg)
        net.store.zero_grads()
        net.backward(g_y * scale, g_y8 * scale)

    run_backward(1.0)
    entries: list[tuple[str, int]] = []
    for name, p in net.store.items():
        flat = p.grad.reshape(-1)
        for i in np.nonzero(np.abs(flat) > 1e-5)[0]:
            entries.append((name, int(i)))
    if len(entries) < 32:
        raise ConfigError("network_slice: too few responsive parameters, adjust fixture")
    sel = rng.choice(len(entries), size=32, replace=False)
    chosen = [entries[int(i)] for i in sel]
    slice_vals = np.array(
        [net.store[name].value.reshape(-1)[i] for name, i in chosen], dtype=np.float64
    )

    def put():
        for (name, i), v in zip(chosen, slice_vals):
            net.store[name].value.reshape(-1)[i] = v

    def fwd():
        put()
        trace = net.forward(x)
        return np.asarray(compute_loss(trace, y, cfg).total)

    def grad(gy):
        put()
        run_backward(float(gy))
        return [np.array([net.store[name].grad.reshape(-1)[i] for name, i in chosen])]

    return fwd, grad, [("param_slice", slice_vals)]


def run_case(name: str, seed: int, eps: float = 1e-6) -> GradReport:
    spec = REGISTRY[name]
    fwd, grad, inputs = spec.build(seed)
    return finite_diff_check(name, fwd, grad, inputs, eps=eps, tol=spec.tol, seed=seed)


def run_all(pattern: str = "*", seeds=(0, 1, 2)) -> list[GradReport]:
    names = sorted(n for n in REGISTRY if fnmatch.fnmatch(n, pattern))
    if not names:
        raise ConfigError(f"no registered ops match pattern {pattern!r}")
    return [run_case(name, seed) for name in names for seed in seeds]
