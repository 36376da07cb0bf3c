"""Human-readable key-value configuration files.

Format: one ``key = value`` per line, ``#`` comments, blank lines ignored.
Values parse as bool/int/float/string, or comma-separated lists thereof.
Every default of the training and inference stack can be overridden; the
CLI merges file values with command-line flags (flags win).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import TubervolError


class ConfigError(TubervolError):
    pass


def _parse_scalar(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null"):
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_value(text: str):
    if "," in text:
        return tuple(_parse_scalar(p) for p in text.split(",") if p.strip())
    return _parse_scalar(text)


def load_config_file(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, text = line.split("=", 1)
        values[key.strip()] = parse_value(text)
    return values


@dataclass
class RunConfig:
    """Defaults for the whole pipeline; any key can appear in the file."""

    # data
    n_tubers: int = 30
    frames_per_tuber: tuple = (20, 30)
    n_shape_augment: int = 10
    augment_frames: bool = True
    # sdf sampling
    n_surface_samples: int = 16384
    n_uniform_samples: int = 4096
    sdf_noise_sigma: float = 0.025
    sdf_clamp: float = 0.1
    # decoder
    latent_size: int = 32
    decoder_hidden: int = 512
    decoder_epochs: int = 1001
    decoder_lr: float = 5e-4
    decoder_snapshot_interval: int = 10
    samples_per_shape: int = 3072
    select_snapshot: str = "final"
    # encoder
    encoder_epochs: int = 100
    encoder_lr: float = 1e-4
    batch_size: int = 16
    # reconstruction
    grid_resolution: int = 40
    subdivision_iterations: int = 1
    refine_surface: bool = True
    # latent optimization (decoder-only route)
    opt_iterations: int = 300
    opt_lr: float = 5e-3
    seed: int = 0

    def apply(self, overrides: dict) -> "RunConfig":
        known = {f.name for f in fields(self)}
        for key, value in overrides.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            current = getattr(self, key)
            if isinstance(current, tuple) and not isinstance(value, tuple):
                value = (value,)
            setattr(self, key, value)
        return self

    @classmethod
    def from_file(cls, path=None, **overrides) -> "RunConfig":
        cfg = cls()
        if path:
            cfg.apply(load_config_file(path))
        cfg.apply({k: v for k, v in overrides.items() if v is not None})
        return cfg
