"""Frequency-domain kernels: circular convolution, the two closed-form ridge
solves for the variation and suppression transforms, and template/search
cross-correlation.

Convention: unnormalized forward DFT, 1/N on the inverse (numpy default),
applied over the two spatial axes of ``(rows, cols, channels)`` arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ParameterError, ShapeError, SingularSystemError

# |F|^2 below this fraction of the channel's largest bin counts as a zero bin
_SINGULAR_RTOL = 1e-20


def fft2(x: np.ndarray) -> np.ndarray:
    return np.fft.fft2(x, axes=(0, 1))


def ifft2(X: np.ndarray) -> np.ndarray:
    return np.fft.ifft2(X, axes=(0, 1)).real


def impulse(shape) -> np.ndarray:
    """Unit impulse at the origin of every channel (identity of circular convolution)."""
    d = np.zeros(shape)
    d[0, 0, ...] = 1.0
    return d


def _as3d(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[..., None]
    if x.ndim != 3:
        raise ShapeError(f"expected (rows, cols[, channels]) array, got shape {x.shape}")
    return x


def circular_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    return ifft2(fft2(a) * fft2(b))


def ridge_filter_spectrum(source: np.ndarray, target: np.ndarray, lam: float) -> np.ndarray:
    """Per-bin minimizer of |X*S - T|^2 + lam*|X|^2, i.e. conj(S)T / (|S|^2 + lam)."""
    if lam < 0:
        raise ParameterError(f"regularization must be >= 0, got {lam}")
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if source.shape != target.shape:
        raise ShapeError(f"shape mismatch {source.shape} vs {target.shape}")
    S = fft2(source)
    T = fft2(target)
    power = (S * S.conj()).real
    if lam == 0:
        peak = power.max(axis=(0, 1), keepdims=True)
        if np.any(peak == 0) or np.any(power <= _SINGULAR_RTOL * peak):
            raise SingularSystemError("zero frequency bin in the source features with no regularization")
    return S.conj() * T / (power + lam)


def solve_variation_transform(f1: np.ndarray, f_prev: np.ndarray, lambda_m: float) -> np.ndarray:
    """Filter M minimizing ||M (*) f1 - f_prev||^2 + lambda_m ||M||^2, per channel."""
    return ifft2(ridge_filter_spectrum(f1, f_prev, lambda_m))


def solve_suppression_transform(f_region: np.ndarray, f_weighted_region: np.ndarray,
                                lambda_w: float) -> np.ndarray:
    """Filter W mapping region features onto their Gaussian-weighted counterpart."""
    return ifft2(ridge_filter_spectrum(f_region, f_weighted_region, lambda_w))


@dataclass
class ResponseMap:
    """Correlation score surface; the zero-displacement bin is ``(rows // 2, cols // 2)``."""

    values: np.ndarray
    scale: float = 1.0
    geometry: Any = None  # SearchGeometry the map was computed on, when known
    peak_value: float = field(init=False)
    peak_pos: tuple[int, int] = field(init=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        idx = int(np.argmax(self.values))  # row-major first on ties
        r, c = divmod(idx, self.values.shape[1])
        self.peak_pos = (r, c)
        self.peak_value = float(self.values[r, c])

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def center(self) -> tuple[int, int]:
        return self.values.shape[0] // 2, self.values.shape[1] // 2

    def scaled(self, factor: float) -> ResponseMap:
        return ResponseMap(self.values * factor, self.scale, self.geometry)


def pad_template(template: np.ndarray, search_shape) -> np.ndarray:
    """Zero-pad ``template`` to ``search_shape`` with its top-left at ((H-h)//2, (W-w)//2)."""
    template = _as3d(template)
    H, W = search_shape[:2]
    h, w = template.shape[:2]
    if h > H or w > W:
        raise ShapeError(f"template {h}x{w} larger than search {H}x{W}")
    out = np.zeros((H, W, template.shape[2]))
    top, left = (H - h) // 2, (W - w) // 2
    out[top:top + h, left:left + w] = template
    return out


def template_spectrum(template: np.ndarray, search_shape) -> np.ndarray:
    """Conjugated spectrum of the padded template, reusable across search regions."""
    return fft2(pad_template(template, search_shape)).conj()


def correlate_spectra(template_conj: np.ndarray, search_hat: np.ndarray) -> ResponseMap:
    if template_conj.shape != search_hat.shape:
        raise ShapeError(f"spectrum shape mismatch {template_conj.shape} vs {search_hat.shape}")
    H, W = search_hat.shape[:2]
    raw = np.fft.ifft2((template_conj * search_hat).sum(axis=2)).real
    return ResponseMap(np.roll(raw, (H // 2, W // 2), axis=(0, 1)))


def correlate(template: np.ndarray, search: np.ndarray) -> ResponseMap:
    """Channel-summed circular cross-correlation at search resolution.

    ``values[H//2 + dr, W//2 + dc] = sum t[i, j] * s[top + i + dr, left + j + dc]``
    with indices taken modulo the search size, so a template cut from the
    center of the search region peaks at the center bin.
    """
    template = _as3d(template)
    search = _as3d(search)
    if template.shape[2] != search.shape[2]:
        raise ShapeError(f"channel mismatch {template.shape[2]} vs {search.shape[2]}")
    return correlate_spectra(template_spectrum(template, search.shape), fft2(search))
