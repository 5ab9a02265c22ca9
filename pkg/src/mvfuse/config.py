"""Run configuration: flat key-value config files plus CLI overrides.

Config files hold one `key = value` pair per line with `#` comments.
Unknown keys are rejected. Every parameter has a default; the scale
parameters (views, spacing, exponents, z_far, grid sizes, threshold,
steps, fusion window) default to the reference operating point.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields

from .errors import ConfigError


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.replace(",", " ").split())


@dataclass
class RunConfig:
    mesh: str = "sphere"            # "sphere" or a path to an ASCII OBJ
    sphere_level: int = 2
    coarse_subdiv: int = 1
    fine_subdiv: int = 3
    views: int = 9
    view_spacing_deg: float = 40.0
    elevation_deg: float = 0.0
    camera_distance: float = 2.5
    fov_deg: float = 50.0
    latent_size: int = 32
    channels: int = 4
    image_size: int = 128
    steps: int = 50
    schedule_kind: str = "linear"
    fusion: str = "mvar_va"         # baseline | mvar | mvar_va
    fusion_fraction: float = 0.9
    jnp: bool = True
    grid_sizes: tuple[float, ...] = (0.34, 0.25)
    tau_b: float = 2.0
    tau_d: float = 2.0
    tau_w: float = 3.0
    tau_f: float = 6.0
    z_far: float = 5.0
    conflict_lambda: float = 0.005  # config key: lambda
    dilate_kernel: int = 8
    pixel_views: tuple[float, ...] = (0.0, 80.0, 160.0, 280.0)
    target: str = "checker"
    perturbation: float = 0.0
    predictor_memory: float = 0.0
    seed: int = 0
    pooled_va: bool = False
    fuse_renoised: bool = False
    out_dir: str = "out"

    def validate(self) -> "RunConfig":
        if self.views < 1:
            raise ConfigError("views must be >= 1")
        if self.steps < 2:
            raise ConfigError("steps must be >= 2")
        if not 0.0 <= self.fusion_fraction <= 1.0:
            raise ConfigError("fusion_fraction must lie in [0, 1]")
        if self.fusion not in ("baseline", "mvar", "mvar_va"):
            raise ConfigError("fusion must be baseline, mvar, or mvar_va")
        if self.z_far <= 0:
            raise ConfigError("z_far must be positive")
        if self.channels < 1:
            raise ConfigError("channels must be >= 1")
        if len(self.grid_sizes) != 2 or min(self.grid_sizes) <= 0:
            raise ConfigError("grid_sizes needs two positive values")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.conflict_lambda < 0:
            raise ConfigError("lambda must be >= 0")
        return self


# config-file key -> dataclass attribute (identical unless stated)
KEY_TO_FIELD = {
    **{f.name: f.name for f in fields(RunConfig)},
    "lambda": "conflict_lambda",
}
del KEY_TO_FIELD["conflict_lambda"]

_PARSERS = {
    bool: _parse_bool,
    int: lambda s: int(s.strip()),
    float: lambda s: float(s.strip()),
    str: lambda s: s.strip(),
    tuple: _parse_floats,
}


def parse_value(field_name: str, text: str):
    default = getattr(RunConfig(), field_name)
    return _PARSERS[type(default) if not isinstance(default, tuple) else tuple](text)


def load_config(path: str | os.PathLike) -> RunConfig:
    cfg = RunConfig()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (p.strip() for p in line.split("=", 1))
            if key not in KEY_TO_FIELD:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            field_name = KEY_TO_FIELD[key]
            try:
                setattr(cfg, field_name, parse_value(field_name, value))
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return cfg.validate()
