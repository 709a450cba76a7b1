"""Tracker configuration and its key-value file format.

Config files are TOML; nested keys may be written dotted::

    template_size = 64
    lambda_m = 0.1
    scale_steps = [0.975, 1.0, 1.025]
    redetect.enabled = true
    redetect.lambda = 2.0
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from .errors import ParameterError
from .imaging import FEATURE_NORMS
from .redetect import RedetectConfig

NORMALIZATIONS = ("none", "template")


@dataclass(frozen=True)
class TrackerConfig:
    template_size: int = 64
    pad_factor: float = 2.0
    cell_size: int = 2
    features: str = "gradient"
    feature_norm: str = "unit"
    lambda_m: float = 0.1
    lambda_w: float = 0.1
    # Gaussian weighting of the suppression region, as a fraction of template_size
    suppression_sigma: float = 0.5
    scale_steps: tuple[float, ...] = (0.975, 1.0, 1.025)
    scale_penalty: float = 0.97
    lambda_u: float = 0.01
    sharing: bool = True
    view_fusion: bool = True
    normalization: str = "none"
    # parabolic refinement of the response peak between cells
    subcell_peak: bool = True
    redetect: RedetectConfig = field(default_factory=RedetectConfig)

    def __post_init__(self):
        if self.cell_size < 1:
            raise ParameterError(f"cell_size must be >= 1, got {self.cell_size}")
        if self.template_size <= 0 or self.template_size % self.cell_size:
            raise ParameterError(f"template_size {self.template_size} must be a positive multiple of cell_size")
        if self.pad_factor < 1:
            raise ParameterError(f"pad_factor must be >= 1, got {self.pad_factor}")
        if min(self.lambda_m, self.lambda_w, self.lambda_u) < 0:
            raise ParameterError("regularization weights must be >= 0")
        if not self.scale_steps or min(self.scale_steps) <= 0:
            raise ParameterError(f"scale_steps must be positive, got {self.scale_steps}")
        if not 0 < self.scale_penalty <= 1:
            raise ParameterError(f"scale_penalty must be in (0, 1], got {self.scale_penalty}")
        if self.suppression_sigma <= 0:
            raise ParameterError("suppression_sigma must be positive")
        if self.normalization not in NORMALIZATIONS:
            raise ParameterError(f"normalization must be one of {NORMALIZATIONS}, got {self.normalization!r}")
        if self.feature_norm not in FEATURE_NORMS:
            raise ParameterError(f"feature_norm must be one of {FEATURE_NORMS}, got {self.feature_norm!r}")
        object.__setattr__(self, "scale_steps", tuple(float(s) for s in self.scale_steps))

    def with_ablation(self, redetect: bool | None = None, sharing: bool | None = None,
                      view_fusion: bool | None = None) -> TrackerConfig:
        cfg = self
        if redetect is not None:
            cfg = dataclasses.replace(cfg, redetect=dataclasses.replace(cfg.redetect, enabled=redetect))
        if sharing is not None:
            cfg = dataclasses.replace(cfg, sharing=sharing)
        if view_fusion is not None:
            cfg = dataclasses.replace(cfg, view_fusion=view_fusion)
        return cfg

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["scale_steps"] = list(self.scale_steps)
        rd = d.pop("redetect")
        rd["lambda"] = rd.pop("lambda_")
        d["redetect"] = rd
        return d

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


# Rows of the component ablation: (redetect, template sharing, view-aware fusion)
ABLATION_PRESETS = {
    "dsiam": (False, False, False),
    "redetection": (True, False, False),
    "template-sharing": (False, True, False),
    "asnet-wo-vf": (True, True, False),
    "view-aware-fusion": (False, False, True),
    "asnet-wo-rd": (False, True, True),
    "asnet-wo-ts": (True, False, True),
    "asnet": (True, True, True),
}


def config_from_dict(data: dict) -> TrackerConfig:
    data = dict(data)
    rd = dict(data.pop("redetect", {}) or {})
    if "lambda" in rd:
        rd["lambda_"] = rd.pop("lambda")
    top = {f.name for f in dataclasses.fields(TrackerConfig)} - {"redetect"}
    unknown = sorted(set(data) - top)
    unknown += sorted(f"redetect.{k}" for k in set(rd) - {f.name for f in dataclasses.fields(RedetectConfig)})
    if unknown:
        raise ParameterError(f"unknown config keys: {', '.join(unknown)}")
    try:
        return TrackerConfig(**data, redetect=RedetectConfig(**rd))
    except TypeError as exc:
        raise ParameterError(str(exc)) from None


def load_config(path) -> TrackerConfig:
    path = Path(path)
    try:
        data = tomli.loads(path.read_text())
    except tomli.TOMLDecodeError as exc:
        raise ParameterError(f"{path}: {exc}") from None
    try:
        return config_from_dict(data)
    except ParameterError as exc:
        raise ParameterError(f"{path}: {exc}") from None
