"""Flat "key = value" configuration with dotted section prefixes.

The format is deliberately dumb: one key per line, '#' comments, no nesting,
so configs diff cleanly and parse without dependencies. Unknown keys are
rejected; load -> serialize -> load is the identity on effective settings.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .blursynth import BlurConfig, DarkenConfig, DegradeConfig
from .errors import ConfigError
from .network import NetworkConfig, TrainSettings


@dataclass
class PipelineConfig:
    seed: int = 7
    input_dir: str = ""
    output_dir: str = ""

    synth_window: int = 7
    synth_interp_factor: int = 8
    synth_r_min: float = 20.0
    synth_r_max: float = 100.0
    synth_delta: float = 98.0
    synth_duty_cycle: float = 0.8
    synth_clipping_reverse: bool = True

    darken_enabled: bool = True
    darken_target_min: float = 0.05
    darken_target_max: float = 0.3
    darken_iterations: int = 3
    darken_smoothness: float = 32.0
    darken_base_level: float = -0.5
    darken_amplitude: float = 0.25

    degrade_defocus_prob: float = 0.5
    degrade_sigma_min: float = 0.5
    degrade_sigma_max: float = 2.0
    degrade_beta_min: float = 0.5
    degrade_beta_max: float = 2.0
    degrade_kernel_size: int = 11
    degrade_noise_prob: float = 0.5
    degrade_read_sigma_min: float = 0.002
    degrade_read_sigma_max: float = 0.02
    degrade_shot_gain_min: float = 0.0
    degrade_shot_gain_max: float = 0.01

    net_base_channels: int = 16
    net_curve_n: int = 3
    net_fac_d: int = 5
    net_use_ppm: bool = True
    net_use_curve_activation: bool = True
    net_skip_mode: str = "filters"
    net_use_enh_loss: bool = True
    net_lambda_per: float = 0.01
    net_lambda_en: float = 0.8
    net_lambda_deb: float = 1.0

    train_steps: int = 500
    train_batch: int = 4
    train_patch: int = 32
    train_lr: float = 1e-3
    train_augment: bool = True

    def blur_config(self) -> BlurConfig:
        return BlurConfig(
            window=self.synth_window,
            interp_factor=self.synth_interp_factor,
            r_range=(self.synth_r_min, self.synth_r_max),
            delta=self.synth_delta,
            duty_cycle=self.synth_duty_cycle,
            clipping_reverse_enabled=self.synth_clipping_reverse,
        )

    def darken_config(self) -> DarkenConfig:
        return DarkenConfig(
            target_range=(self.darken_target_min, self.darken_target_max),
            iterations=self.darken_iterations,
            smoothness=self.darken_smoothness,
            base_level=self.darken_base_level,
            amplitude=self.darken_amplitude,
            enabled=self.darken_enabled,
        )

    def degrade_config(self) -> DegradeConfig:
        return DegradeConfig(
            defocus_prob=self.degrade_defocus_prob,
            sigma_range=(self.degrade_sigma_min, self.degrade_sigma_max),
            beta_range=(self.degrade_beta_min, self.degrade_beta_max),
            kernel_size=self.degrade_kernel_size,
            noise_prob=self.degrade_noise_prob,
            read_sigma_range=(self.degrade_read_sigma_min, self.degrade_read_sigma_max),
            shot_gain_range=(self.degrade_shot_gain_min, self.degrade_shot_gain_max),
        )

    def net_config(self) -> NetworkConfig:
        return NetworkConfig(
            base_channels=self.net_base_channels,
            curve_n=self.net_curve_n,
            fac_d=self.net_fac_d,
            use_ppm=self.net_use_ppm,
            use_curve_activation=self.net_use_curve_activation,
            skip_mode=self.net_skip_mode,
            use_enh_loss=self.net_use_enh_loss,
            lambda_per=self.net_lambda_per,
            lambda_en=self.net_lambda_en,
            lambda_deb=self.net_lambda_deb,
        )

    def train_settings(self) -> TrainSettings:
        return TrainSettings(
            steps=self.train_steps,
            batch=self.train_batch,
            patch=self.train_patch,
            lr=self.train_lr,
            augment=self.train_augment,
        )

    def validate(self):
        """Cross-field checks; raises ConfigError on the first inconsistency."""
        self.blur_config()
        self.darken_config()
        self.degrade_config()
        self.net_config()
        if self.train_steps < 1 or self.train_batch < 1 or self.train_patch < 16:
            raise ConfigError("train.steps, train.batch must be >= 1 and train.patch >= 16")
        if self.train_patch % 8:
            raise ConfigError(f"train.patch must be divisible by 8, got {self.train_patch}")
        if not 0.0 < self.darken_target_min <= self.darken_target_max < 1.0:
            raise ConfigError("darken target range must satisfy 0 < min <= max < 1")


# dotted config key -> dataclass attribute
_KEY_MAP: dict[str, str] = {}
for f in fields(PipelineConfig):
    name = f.name
    if name == "seed":
        key = "seed"
    elif name in ("input_dir", "output_dir"):
        key = f"paths.{name[:-4]}"  # paths.input / paths.output
    else:
        section, rest = name.split("_", 1)
        key = f"{section}.{rest}"
    _KEY_MAP[key] = name

_TYPE_MAP = {f.name: f.type for f in fields(PipelineConfig)}


def _parse_value(key: str, attr: str, raw: str):
    ftype = _TYPE_MAP[attr]
    if ftype == "bool":
        low = raw.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from exc
    return raw


def load_config(path: str | Path) -> PipelineConfig:
    cfg = PipelineConfig()
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _KEY_MAP:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        attr = _KEY_MAP[key]
        setattr(cfg, attr, _parse_value(key, attr, raw))
    cfg.validate()
    return cfg


def serialize_config(cfg: PipelineConfig) -> str:
    lines = []
    for key, attr in _KEY_MAP.items():
        value = getattr(cfg, attr)
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"
