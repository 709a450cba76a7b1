"""Frames, boxes, patch resampling and the pluggable feature embedding.

Frames are plain numpy arrays: ``(H, W, 3)`` uint8 RGB or ``(H, W)`` grayscale.
Feature maps are float arrays of shape ``(rows, cols, channels)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np
from PIL import Image

from .errors import InvalidBoxError, ParameterError, ShapeError

# std below this is treated as a flat channel and zeroed instead of amplified
_FLAT_STD = 1e-6


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixel units. ``(x, y)`` is the top-left corner.

    The box may extend past the frame; only ``w > 0`` and ``h > 0`` are required.
    """

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.x, self.y, self.w, self.h)
        if not all(np.isfinite(vals)):
            raise InvalidBoxError(f"non-finite box {vals}")
        if self.w <= 0 or self.h <= 0:
            raise InvalidBoxError(f"box dimensions must be positive, got w={self.w}, h={self.h}")

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> BoundingBox:
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    @classmethod
    def from_array(cls, a) -> BoundingBox:
        x, y, w, h = (float(v) for v in a)
        return cls(x, y, w, h)

    @property
    def center(self) -> tuple[float, float]:
        return self.x + self.w / 2.0, self.y + self.h / 2.0

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h], dtype=float)


def check_frame(frame: np.ndarray) -> np.ndarray:
    frame = np.asarray(frame)
    if frame.ndim not in (2, 3) or frame.shape[0] == 0 or frame.shape[1] == 0:
        raise ShapeError(f"frame must be (H, W) or (H, W, C) with H, W > 0, got {frame.shape}")
    return frame


def load_frame(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def save_frame(frame: np.ndarray, path) -> None:
    path = Path(path)
    im = Image.fromarray(np.asarray(frame, dtype=np.uint8))
    if path.suffix.lower() == ".png":
        im.save(path, compress_level=1)
    else:
        im.save(path, quality=95)


def _sample_axis(center: float, extent: float, n: int, limit: int):
    # pixel i spans [i, i+1); sample centers of n equal bins across the region
    step = extent / n
    pos = center - extent / 2.0 + (np.arange(n) + 0.5) * step - 0.5
    pos = np.clip(pos, 0.0, limit - 1)
    i0 = np.floor(pos).astype(np.intp)
    i1 = np.minimum(i0 + 1, limit - 1)
    t = pos - i0
    return i0, i1, t


def crop_resample(frame: np.ndarray, center: tuple[float, float], region_wh: tuple[float, float],
                  out_hw: tuple[int, int]) -> np.ndarray:
    """Bilinearly resample the region of size ``region_wh`` centered at ``center``.

    Sample coordinates are clamped to the frame, so out-of-frame content is edge
    replication and no index ever leaves the buffer. Returns float64 in the
    frame's intensity scale.
    """
    frame = check_frame(frame)
    out_h, out_w = int(out_hw[0]), int(out_hw[1])
    if out_h <= 0 or out_w <= 0:
        raise ParameterError(f"output size must be positive, got {out_hw}")
    H, W = frame.shape[:2]
    x0, x1, tx = _sample_axis(center[0], region_wh[0], out_w, W)
    y0, y1, ty = _sample_axis(center[1], region_wh[1], out_h, H)
    extra = (None,) * (frame.ndim - 2)
    ty = ty[(slice(None), None, *extra)]
    tx = tx[(None, slice(None), *extra)]
    # gather the four neighbours on the output grid before converting, so the
    # cost does not depend on the frame size
    top, bot = frame.take(y0, axis=0), frame.take(y1, axis=0)
    f = np.float64
    tl, tr = top.take(x0, axis=1).astype(f), top.take(x1, axis=1).astype(f)
    bl, br = bot.take(x0, axis=1).astype(f), bot.take(x1, axis=1).astype(f)
    upper = tl + (tr - tl) * tx
    lower = bl + (br - bl) * tx
    return upper + (lower - upper) * ty


def extract_patch(frame: np.ndarray, box: BoundingBox, pad_factor: float, out_size: int) -> np.ndarray:
    """Square ``out_size`` patch of the ``pad_factor``-enlarged box region."""
    if not isinstance(box, BoundingBox):
        box = BoundingBox.from_array(box)
    if pad_factor < 1:
        raise ParameterError(f"pad_factor must be >= 1, got {pad_factor}")
    return crop_resample(frame, box.center, (pad_factor * box.w, pad_factor * box.h), (out_size, out_size))


class FeatureExtractor(Protocol):
    kind: str
    cell_size: int
    channels: int

    def extract(self, patch: np.ndarray) -> np.ndarray: ...


def _to_gray(patch: np.ndarray) -> np.ndarray:
    patch = np.asarray(patch, dtype=np.float64)
    if patch.ndim == 3:
        patch = patch.mean(axis=2)
    return patch / 255.0


def _pool(x: np.ndarray, cell: int) -> np.ndarray:
    if cell == 1:
        return x
    h, w = x.shape[:2]
    return x.reshape(h // cell, cell, w // cell, cell, *x.shape[2:]).mean(axis=(1, 3))


FEATURE_NORMS = ("unit", "center", "none")


def channel_stats(feat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return feat.mean(axis=(0, 1), keepdims=True), feat.std(axis=(0, 1), keepdims=True)


def _standardize(feat: np.ndarray, norm: str = "unit", stats=None) -> np.ndarray:
    if norm == "none":
        return feat
    mean, std = channel_stats(feat) if stats is None else stats
    centered = feat - mean
    flat = std < _FLAT_STD
    if norm == "center":
        return np.where(flat, 0.0, centered)
    return np.where(flat, 0.0, centered / np.where(flat, 1.0, std))


def image_gradients(gray: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central differences with edge replication: (d/dx, d/dy)."""
    p = np.pad(gray, 1, mode="edge")
    gx = (p[1:-1, 2:] - p[1:-1, :-2]) / 2.0
    gy = (p[2:, 1:-1] - p[:-2, 1:-1]) / 2.0
    return gx, gy


@dataclass(frozen=True)
class GradientFeatures:
    """Grayscale, d/dx, d/dy and gradient magnitude, averaged over square cells.

    ``norm`` is applied per channel over the map: ``"center"`` subtracts the
    mean, ``"unit"`` also scales to unit variance, ``"none"`` leaves raw values.
    Flat channels become all-zero under both normalizations.
    """

    cell_size: int = 2
    norm: str = "unit"
    kind: str = "gradient"
    channels: int = 4

    def __post_init__(self):
        if self.norm not in FEATURE_NORMS:
            raise ParameterError(f"feature norm must be one of {FEATURE_NORMS}, got {self.norm!r}")

    def raw(self, patch: np.ndarray) -> np.ndarray:
        gray = _to_gray(patch)
        gx, gy = image_gradients(gray)
        mag = np.hypot(gx, gy)
        return _pool(np.stack([gray - gray.mean(), gx, gy, mag], axis=-1), self.cell_size)

    def extract(self, patch: np.ndarray) -> np.ndarray:
        return _standardize(self.raw(patch), self.norm)

    def extract_with_stats(self, patch: np.ndarray, stats=None):
        """Like ``extract`` but normalizing with ``stats`` when given; returns (features, stats used)."""
        feat = self.raw(patch)
        stats = channel_stats(feat) if stats is None else stats
        return _standardize(feat, self.norm, stats), stats


@dataclass(frozen=True)
class IntensityFeatures:
    """Single raw-intensity channel in [0, 1]; no centering, so the DC bin is kept."""

    cell_size: int = 1
    kind: str = "intensity"
    channels: int = 1

    def extract(self, patch: np.ndarray) -> np.ndarray:
        return _pool(_to_gray(patch)[..., None], self.cell_size)


EXTRACTORS = {"gradient": GradientFeatures, "intensity": IntensityFeatures}


def make_extractor(kind: str = "gradient", cell_size: int = 2, norm: str = "unit") -> FeatureExtractor:
    try:
        cls = EXTRACTORS[kind]
    except KeyError:
        raise ParameterError(f"unknown feature extractor {kind!r}; known: {sorted(EXTRACTORS)}") from None
    if cls is GradientFeatures:
        return cls(cell_size=cell_size, norm=norm)
    return cls(cell_size=cell_size)


def embed(patch: np.ndarray, extractor: FeatureExtractor) -> np.ndarray:
    patch = np.asarray(patch)
    h, w = patch.shape[:2]
    c = extractor.cell_size
    if c < 1 or h % c or w % c:
        raise ShapeError(f"patch {h}x{w} not divisible by cell_size {c}")
    feat = extractor.extract(patch)
    if not np.all(np.isfinite(feat)):
        raise ShapeError("feature map contains non-finite values")
    return feat


def embed_with_stats(patch: np.ndarray, extractor: FeatureExtractor, stats=None):
    """Embed with normalization statistics carried over from another patch.

    Used across a scale pyramid so every level is normalized like the unity
    level. Extractors without ``extract_with_stats`` fall back to ``embed`` and
    return ``None`` stats.
    """
    if not hasattr(extractor, "extract_with_stats"):
        return embed(patch, extractor), None
    patch = np.asarray(patch)
    h, w = patch.shape[:2]
    c = extractor.cell_size
    if c < 1 or h % c or w % c:
        raise ShapeError(f"patch {h}x{w} not divisible by cell_size {c}")
    feat, stats = extractor.extract_with_stats(patch, stats)
    if not np.all(np.isfinite(feat)):
        raise ShapeError("feature map contains non-finite values")
    return feat, stats


def cosine_window(h: int, w: int) -> np.ndarray:
    """Separable Hann window of shape ``(h, w, 1)``."""
    if h <= 0 or w <= 0:
        raise ParameterError(f"window size must be positive, got {h}x{w}")
    return np.outer(np.hanning(h), np.hanning(w))[..., None]


def gaussian_weight_map(h: int, w: int, sigma: float) -> np.ndarray:
    """Isotropic Gaussian of shape ``(h, w, 1)`` centered at ``((h-1)/2, (w-1)/2)``."""
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    r = np.arange(h) - (h - 1) / 2.0
    c = np.arange(w) - (w - 1) / 2.0
    d2 = r[:, None] ** 2 + c[None, :] ** 2
    return np.exp(-d2 / (2.0 * sigma**2))[..., None]


@dataclass(frozen=True)
class SearchGeometry:
    """Where a search patch is cut from a frame and how its cells map back.

    ``region_wh`` is in frame pixels, ``out_hw`` in patch pixels.
    """

    center: tuple[float, float]
    region_wh: tuple[float, float]
    out_hw: tuple[int, int]
    cell_size: int

    @property
    def map_shape(self) -> tuple[int, int]:
        return self.out_hw[0] // self.cell_size, self.out_hw[1] // self.cell_size

    @property
    def cell_pixels(self) -> tuple[float, float]:
        """Frame pixels per feature cell along (x, y)."""
        return (self.region_wh[0] / self.out_hw[1] * self.cell_size,
                self.region_wh[1] / self.out_hw[0] * self.cell_size)

    def crop(self, frame: np.ndarray) -> np.ndarray:
        return crop_resample(frame, self.center, self.region_wh, self.out_hw)


def search_geometry(box: BoundingBox, pad_factor: float, template_size: int, cell_size: int,
                    frame_shape=None, full_frame: bool = False) -> SearchGeometry:
    """Search region around ``box`` sampled at the template's pixel density.

    The box maps to ``template_size`` patch pixels per side, so features of the
    region line up cell-for-cell with the template. With ``frame_shape`` the
    region is capped at the frame extent and shifted to stay inside it.
    """
    kx = template_size / box.w
    ky = template_size / box.h
    out_w = cell_size * max(1, round(pad_factor * template_size / cell_size))
    out_h = out_w
    cx, cy = box.center
    if frame_shape is not None:
        H, W = frame_shape[:2]
        max_w = max(template_size, cell_size * int(W * kx // cell_size))
        max_h = max(template_size, cell_size * int(H * ky // cell_size))
        if full_frame:
            out_w, out_h = max_w, max_h
        out_w, out_h = min(out_w, max_w), min(out_h, max_h)
        rw, rh = out_w / kx, out_h / ky
        if out_w == max_w:
            cx = W / 2.0 if rw >= W else float(np.clip(cx, rw / 2.0, W - rw / 2.0))
        if out_h == max_h:
            cy = H / 2.0 if rh >= H else float(np.clip(cy, rh / 2.0, H - rh / 2.0))
    return SearchGeometry((cx, cy), (out_w / kx, out_h / ky), (out_h, out_w), cell_size)
