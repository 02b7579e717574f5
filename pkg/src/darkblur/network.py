"""Encoder-decoder restoration network with filter-adaptive skip connections.

The encoder embeds a low-light blurry image into normal-light feature space
(residual blocks, stride-2 downsampling, pyramid pooling, curve activation
at each of three scales); the decoder removes blur, guided at every scale
by dynamic per-pixel filters predicted from the enhanced encoder features.
An auxiliary image head at the 1/8 scale supervises the enhancement half.
Training is plain single-process numpy with hand-written backprop and Adam.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .colorcore import Domain, ImageF, load_image
from .errors import ConfigError, ShapeError, TrainingDivergedError
from .kernels import ops
from .kernels.layers import (
    ConcatSkip,
    Conv2d,
    CurveActivation,
    FilterAdaptiveSkip,
    Identity,
    ParamStore,
    PPM,
    ResidualBlock,
    ResidualDown,
    ResidualUp,
)
from .kernels.tensorio import load_tensor, save_tensor

SKIP_MODES = ("filters", "concat")


@dataclass(frozen=True)
class NetworkConfig:
    base_channels: int = 16
    scales: int = 3
    curve_n: int = 3
    fac_d: int = 5
    use_ppm: bool = True
    use_curve_activation: bool = True
    skip_mode: str = "filters"
    use_enh_loss: bool = True
    lambda_per: float = 0.01
    lambda_en: float = 0.8
    lambda_deb: float = 1.0

    def __post_init__(self):
        if self.scales != 3:
            raise ConfigError(f"the architecture is fixed at 3 scales, got {self.scales}")
        if self.curve_n < 1:
            raise ConfigError(f"curve_n must be >= 1, got {self.curve_n}")
        if self.fac_d < 1 or self.fac_d % 2 == 0:
            raise ConfigError(f"fac_d must be odd, got {self.fac_d}")
        if self.skip_mode not in SKIP_MODES:
            raise ConfigError(f"skip_mode must be one of {SKIP_MODES}, got {self.skip_mode!r}")
        if self.base_channels % 4 != 0 or self.base_channels < 4:
            raise ConfigError(f"base_channels must be a positive multiple of 4, got {self.base_channels}")

    @property
    def widths(self) -> tuple[int, int, int]:
        return (self.base_channels, 2 * self.base_channels, 4 * self.base_channels)


@dataclass
class ForwardTrace:
    """Everything the loss and an inspector need from one forward pass."""

    y_hat: np.ndarray
    y_hat_ds8: np.ndarray
    enhanced: list[np.ndarray]
    curve_maps: list[np.ndarray | None]


class EnhanceDeblurNet:
    """Three-scale enhancement encoder + deblurring decoder, no batch axis."""

    def __init__(self, cfg: NetworkConfig, seed: int = 0, dtype=np.float32):
        self.cfg = cfg
        self.dtype = dtype
        self.store = ParamStore()
        rng = np.random.default_rng(seed)
        w = cfg.widths
        self.enc_in = (w[0], w[1], w[2])
        self.enc_out = (w[1], w[2], w[2])

        self.head = Conv2d(self.store, "head", 3, w[0], 3, rng, dtype=dtype)
        self.enc_res, self.enc_down, self.enc_ppm, self.enc_curve = [], [], [], []
        for s in range(3):
            self.enc_res.append(ResidualBlock(self.store, f"enc{s}.res", self.enc_in[s], rng, dtype=dtype))
            self.enc_down.append(
                ResidualDown(self.store, f"enc{s}.down", self.enc_in[s], self.enc_out[s], rng, dtype=dtype)
            )
            self.enc_ppm.append(
                PPM(self.store, f"enc{s}.ppm", self.enc_out[s], rng, dtype=dtype)
                if cfg.use_ppm
                else Identity()
            )
            self.enc_curve.append(
                CurveActivation(self.store, f"enc{s}.curve", self.enc_out[s], cfg.curve_n, rng, dtype=dtype)
                if cfg.use_curve_activation
                else Identity()
            )
        self.inter = Conv2d(self.store, "inter", self.enc_out[2], 3, 3, rng, dtype=dtype)

        self.dec_skip, self.dec_res_a, self.dec_res_b, self.dec_up = {}, {}, {}, {}
        for s in (2, 1, 0):  # decoder execution order, deepest first
            c = self.enc_out[s]
            if cfg.skip_mode == "filters":
                self.dec_skip[s] = FilterAdaptiveSkip(self.store, f"dec{s}.filters", c, cfg.fac_d, rng, dtype=dtype)
            else:
                self.dec_skip[s] = ConcatSkip(self.store, f"dec{s}.cat", c, rng, dtype=dtype)
            self.dec_res_a[s] = ResidualBlock(self.store, f"dec{s}.resa", c, rng, dtype=dtype)
            self.dec_res_b[s] = ResidualBlock(self.store, f"dec{s}.resb", c, rng, dtype=dtype)
            self.dec_up[s] = ResidualUp(self.store, f"dec{s}.up", c, self.enc_in[s], rng, dtype=dtype)
        self.tail = Conv2d(self.store, "tail", w[0], 3, 3, rng, dtype=dtype)

    def forward(self, x: np.ndarray) -> ForwardTrace:
        if x.ndim != 3 or x.shape[2] != 3:
            raise ShapeError(f"input must be H x W x 3, got {x.shape}")
        if x.shape[0] % 8 or x.shape[1] % 8:
            raise ShapeError(
                f"spatial dims must be divisible by 8, got {x.shape[:2]}; pad reflectively and crop back"
            )
        x = x.astype(self.dtype, copy=False)
        t = self.head.forward(x)
        enhanced, curve_maps = [], []
        for s in range(3):
            t = self.enc_res[s].forward(t)
            t = self.enc_down[s].forward(t)
            t = self.enc_ppm[s].forward(t)
            t = self.enc_curve[s].forward(t)
            enhanced.append(t)
            curve_maps.append(getattr(self.enc_curve[s], "last_a", None))
        y8 = self.inter.forward(enhanced[2])
        d = enhanced[2]
        for s in (2, 1, 0):
            d = self.dec_skip[s].forward(d, enhanced[s])
            d = self.dec_res_a[s].forward(d)
            d = self.dec_res_b[s].forward(d)
            d = self.dec_up[s].forward(d)
        y = self.tail.forward(d)
        return ForwardTrace(y_hat=y, y_hat_ds8=y8, enhanced=enhanced, curve_maps=curve_maps)

    def backward(self, g_y: np.ndarray, g_y8: np.ndarray):
        """Accumulate parameter gradients; expects caches from the last forward."""
        g = self.tail.backward(g_y.astype(self.dtype, copy=False))
        g_enh = {0: None, 1: None, 2: None}
        for s in (0, 1, 2):  # reverse of decoder execution order
            g = self.dec_up[s].backward(g)
            g = self.dec_res_b[s].backward(g)
            g = self.dec_res_a[s].backward(g)
            g, ge = self.dec_skip[s].backward(g)
            g_enh[s] = ge
        # gradient w.r.t. the bottleneck enhanced features: decoder entry,
        # deepest skip, and the intermediate image head all contribute
        g = g + g_enh[2] + self.inter.backward(g_y8.astype(self.dtype, copy=False))
        for s in (2, 1, 0):
            g = self.enc_curve[s].backward(g)
            g = self.enc_ppm[s].backward(g)
            g = self.enc_down[s].backward(g)
            g = self.enc_res[s].backward(g)
            if s > 0:
                g = g + g_enh[s - 1]
        return self.head.backward(g)


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


@dataclass
class LossParts:
    total: float
    l_en: float
    l_deb: float
    l_per: float = 0.0


def downsample8(y: np.ndarray) -> np.ndarray:
    h, w, _ = y.shape
    if h % 8 or w % 8:
        raise ShapeError(f"target dims must be divisible by 8, got {y.shape[:2]}")
    return ops.bilinear_resize_fwd(y, h // 8, w // 8)[0]


def compute_loss(trace: ForwardTrace, y: np.ndarray, cfg: NetworkConfig, perceptual=None) -> LossParts:
    """Weighted L1 at full scale and at the 1/8-scale enhancement head.

    ``perceptual`` is a pluggable hook (y_hat, y) -> (value, grad_wrt_y_hat);
    it is off by default and contributes through lambda_per when provided.
    """
    if trace.y_hat.shape != y.shape:
        raise ShapeError(f"prediction {trace.y_hat.shape} vs target {y.shape}")
    y8 = downsample8(y.astype(trace.y_hat_ds8.dtype, copy=False))
    l_deb = float(np.mean(np.abs(trace.y_hat - y)))
    l_en = float(np.mean(np.abs(trace.y_hat_ds8 - y8))) if cfg.use_enh_loss else 0.0
    l_per = 0.0
    if perceptual is not None:
        l_per = float(perceptual(trace.y_hat, y)[0])
    total = cfg.lambda_en * l_en + cfg.lambda_deb * l_deb + cfg.lambda_per * l_per
    return LossParts(total=total, l_en=l_en, l_deb=l_deb, l_per=l_per)


def loss_gradients(trace: ForwardTrace, y: np.ndarray, cfg: NetworkConfig, perceptual=None):
    """(d total / d y_hat, d total / d y_hat_ds8, parts)."""
    parts = compute_loss(trace, y, cfg, perceptual)
    n_full = trace.y_hat.size
    g_y = cfg.lambda_deb * np.sign(trace.y_hat - y) / n_full
    if cfg.use_enh_loss:
        y8 = downsample8(y.astype(trace.y_hat_ds8.dtype, copy=False))
        g_y8 = cfg.lambda_en * np.sign(trace.y_hat_ds8 - y8) / trace.y_hat_ds8.size
    else:
        g_y8 = np.zeros_like(trace.y_hat_ds8)
    if perceptual is not None:
        g_y = g_y + cfg.lambda_per * perceptual(trace.y_hat, y)[1]
    return g_y, g_y8, parts


# ---------------------------------------------------------------------------
# optimization
# ---------------------------------------------------------------------------


class Adam:
    def __init__(self, store: ParamStore, beta1: float = 0.9, beta2: float = 0.99, eps: float = 1e-8):
        self.store = store
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {name: np.zeros_like(p.value) for name, p in store.items()}
        self.v = {name: np.zeros_like(p.value) for name, p in store.items()}

    def step(self, lr: float):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for name, p in self.store.items():
            g = p.grad
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.value -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def cosine_lr(lr0: float, t: int, total: int) -> float:
    """Cosine annealing from lr0 at t=0 to 0 at t=total."""
    if total <= 0:
        return lr0
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * t / total))


def check_finite_grads(store: ParamStore):
    for name, p in store.items():
        if not np.all(np.isfinite(p.grad)):
            raise TrainingDivergedError(f"non-finite gradient in {name}", param_name=name)


def backward_and_step(
    net: EnhanceDeblurNet, trace: ForwardTrace, y: np.ndarray, opt: Adam, lr: float, perceptual=None
) -> LossParts:
    """Single-sample update: full backprop from the last forward, then Adam."""
    g_y, g_y8, parts = loss_gradients(trace, y, net.cfg, perceptual)
    net.store.zero_grads()
    net.backward(g_y, g_y8)
    check_finite_grads(net.store)
    opt.step(lr)
    return parts


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def config_hash(cfg: NetworkConfig) -> str:
    text = repr(cfg).encode()
    return hashlib.blake2b(text, digest_size=8).hexdigest()


_CFG_FIELDS = (
    ("base_channels", int),
    ("scales", int),
    ("curve_n", int),
    ("fac_d", int),
    ("use_ppm", bool),
    ("use_curve_activation", bool),
    ("skip_mode", str),
    ("use_enh_loss", bool),
    ("lambda_per", float),
    ("lambda_en", float),
    ("lambda_deb", float),
)


def save_checkpoint(ckpt_dir: str | Path, net: EnhanceDeblurNet, opt: Adam, step: int):
    ckpt = Path(ckpt_dir)
    (ckpt / "params").mkdir(parents=True, exist_ok=True)
    (ckpt / "adam").mkdir(parents=True, exist_ok=True)
    for name, p in net.store.items():
        save_tensor(ckpt / "params" / f"{name}.tnsr", p.value)
        save_tensor(ckpt / "adam" / f"m.{name}.tnsr", opt.m[name])
        save_tensor(ckpt / "adam" / f"v.{name}.tnsr", opt.v[name])
    lines = [f"step = {step}", f"adam_t = {opt.t}", f"config_hash = {config_hash(net.cfg)}"]
    for fname, _ in _CFG_FIELDS:
        lines.append(f"net.{fname} = {getattr(net.cfg, fname)}")
    (ckpt / "manifest.txt").write_text("\n".join(lines) + "\n")


def load_checkpoint(ckpt_dir: str | Path) -> tuple[NetworkConfig, int, int, dict, dict, dict]:
    """Returns (cfg, step, adam_t, params, adam_m, adam_v) from a checkpoint dir."""
    ckpt = Path(ckpt_dir)
    manifest = ckpt / "manifest.txt"
    if not manifest.is_file():
        raise ConfigError(f"{ckpt}: not a checkpoint (missing manifest.txt)")
    kv: dict[str, str] = {}
    for line in manifest.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{manifest}: malformed line {line!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        kv[key] = val
    try:
        fields = {}
        for fname, ftype in _CFG_FIELDS:
            raw = kv[f"net.{fname}"]
            fields[fname] = raw.lower() == "true" if ftype is bool else ftype(raw)
        cfg = NetworkConfig(**fields)
        step = int(kv["step"])
        adam_t = int(kv["adam_t"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{manifest}: missing or malformed entry ({exc})") from exc
    if kv.get("config_hash") != config_hash(cfg):
        raise ConfigError(f"{ckpt}: config hash mismatch, checkpoint inconsistent")
    params, adam_m, adam_v = {}, {}, {}
    for path in sorted((ckpt / "params").glob("*.tnsr")):
        params[path.name[: -len(".tnsr")]] = load_tensor(path)
    for path in sorted((ckpt / "adam").glob("*.tnsr")):
        target = adam_m if path.name.startswith("m.") else adam_v
        target[path.name[2 : -len(".tnsr")]] = load_tensor(path)
    return cfg, step, adam_t, params, adam_m, adam_v


def restore_into(net: EnhanceDeblurNet, opt: Adam, params: dict, adam_m: dict, adam_v: dict, adam_t: int):
    names = set(net.store.names())
    missing = names - set(params)
    extra = set(params) - names
    if missing or extra:
        raise ConfigError(f"checkpoint does not match network: missing={sorted(missing)}, extra={sorted(extra)}")
    for name, p in net.store.items():
        if params[name].shape != p.value.shape:
            raise ConfigError(f"checkpoint tensor {name} has shape {params[name].shape}, expected {p.value.shape}")
        p.value[...] = params[name].astype(p.value.dtype)
        opt.m[name][...] = adam_m[name].astype(p.value.dtype)
        opt.v[name][...] = adam_v[name].astype(p.value.dtype)
    opt.t = adam_t


# ---------------------------------------------------------------------------
# toy training
# ---------------------------------------------------------------------------


@dataclass
class TrainSettings:
    steps: int = 500
    batch: int = 4
    patch: int = 32
    lr: float = 1e-3
    augment: bool = True


def load_pair_dir(dataset_dir: str | Path) -> list[tuple[np.ndarray, np.ndarray]]:
    """Load (low_blur, gt) float32 arrays from the paired-PNG layout."""
    root = Path(dataset_dir)
    low_dir, gt_dir = root / "low_blur", root / "gt"
    if not low_dir.is_dir() or not gt_dir.is_dir():
        raise ConfigError(f"{root}: expected low_blur/ and gt/ subdirectories")
    pairs = []
    for low_path in sorted(low_dir.glob("*.png")):
        gt_path = gt_dir / low_path.name
        if not gt_path.is_file():
            raise ConfigError(f"missing ground truth for {low_path.name}")
        pairs.append((load_image(low_path).data, load_image(gt_path).data))
    if not pairs:
        raise ConfigError(f"{root}: no training pairs found")
    return pairs


def _crop_and_augment(low, gt, patch, augment, rng):
    h, w, _ = low.shape
    if patch < min(h, w):
        top = int(rng.integers(0, h - patch + 1))
        left = int(rng.integers(0, w - patch + 1))
        low = low[top : top + patch, left : left + patch]
        gt = gt[top : top + patch, left : left + patch]
    if augment:
        k = int(rng.integers(0, 4))
        if k:
            low = np.rot90(low, k, axes=(0, 1))
            gt = np.rot90(gt, k, axes=(0, 1))
        if rng.random() < 0.5:
            low = np.flip(low, axis=1)
            gt = np.flip(gt, axis=1)
    return np.ascontiguousarray(low), np.ascontiguousarray(gt)


def train_toy(
    dataset_dir: str | Path,
    cfg: NetworkConfig,
    settings: TrainSettings,
    seed: int,
    out_dir: str | Path,
    resume: bool = False,
    perceptual=None,
) -> list[dict]:
    """Deterministic toy-scale training: loss CSV plus a final checkpoint.

    Batch gradients are the average of per-sample gradients accumulated in a
    fixed order, so runs with the same seed are byte-identical.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pairs = load_pair_dir(dataset_dir)

    net = EnhanceDeblurNet(cfg, seed=seed)
    opt = Adam(net.store)
    start_step = 0
    ckpt_dir = out / "checkpoint"
    if resume:
        loaded_cfg, step, adam_t, params, m, v = load_checkpoint(ckpt_dir)
        if config_hash(loaded_cfg) != config_hash(cfg):
            raise ConfigError("resume config does not match checkpoint config")
        restore_into(net, opt, params, m, v, adam_t)
        start_step = step

    total_steps = start_step + settings.steps
    rng = np.random.default_rng(np.random.SeedSequence([seed, start_step]))
    rows: list[dict] = []
    csv_path = out / "loss.csv"
    mode = "a" if (resume and csv_path.exists()) else "w"
    with open(csv_path, mode, newline="") as fh:
        writer = csv.writer(fh)
        if mode == "w":
            writer.writerow(["step", "lr", "L_en", "L_deb", "total"])
        for t in range(start_step, total_steps):
            lr_t = cosine_lr(settings.lr, t, total_steps)
            net.store.zero_grads()
            sums = {"total": 0.0, "l_en": 0.0, "l_deb": 0.0}
            scale = 1.0 / settings.batch
            for _ in range(settings.batch):
                idx = int(rng.integers(0, len(pairs)))
                low, gt = _crop_and_augment(pairs[idx][0], pairs[idx][1], settings.patch, settings.augment, rng)
                trace = net.forward(low)
                g_y, g_y8, parts = loss_gradients(trace, gt, cfg, perceptual)
                net.backward(g_y * scale, g_y8 * scale)
                sums["total"] += parts.total
                sums["l_en"] += parts.l_en
                sums["l_deb"] += parts.l_deb
            check_finite_grads(net.store)
            opt.step(lr_t)
            row = {
                "step": t,
                "lr": lr_t,
                "L_en": sums["l_en"] * scale,
                "L_deb": sums["l_deb"] * scale,
                "total": sums["total"] * scale,
            }
            rows.append(row)
            writer.writerow(
                [t, f"{lr_t:.9e}", f"{row['L_en']:.9e}", f"{row['L_deb']:.9e}", f"{row['total']:.9e}"]
            )
    save_checkpoint(ckpt_dir, net, opt, total_steps)
    return rows


# ---------------------------------------------------------------------------
# inference
# ---------------------------------------------------------------------------


def _pad_to_multiple8(x: np.ndarray) -> tuple[np.ndarray, int, int]:
    h, w, _ = x.shape
    ph = (-h) % 8
    pw = (-w) % 8
    if ph or pw:
        x = np.pad(x, ((0, ph), (0, pw), (0, 0)), mode="reflect")
    return x, h, w


def infer_image(img: ImageF, ckpt_dir: str | Path) -> tuple[ImageF, ForwardTrace]:
    """Run a checkpointed network on one sRGB image (padded to /8, cropped back)."""
    cfg, _, adam_t, params, m, v = load_checkpoint(ckpt_dir)
    net = EnhanceDeblurNet(cfg, seed=0)
    opt = Adam(net.store)
    restore_into(net, opt, params, m, v, adam_t)
    x, h, w = _pad_to_multiple8(img.data)
    trace = net.forward(x)
    y = np.clip(trace.y_hat[:h, :w], 0.0, 1.0).astype(np.float32)
    return ImageF(y, Domain.SRGB), trace
