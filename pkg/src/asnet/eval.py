"""One-pass evaluation: success/precision curves, and the multi-view fusion
scores AFS (online one-hot view selection) and IFS (per-frame best view).

Ground-truth rows that are all-NaN mark the target out of view; such frames are
left out of every denominator.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import ATTRIBUTE_NAMES
from .errors import AlignmentError, InvalidWeightsError, ParameterError
from .imaging import BoundingBox

IOU_THRESHOLDS = np.linspace(0.0, 1.0, 101)
CLE_THRESHOLDS = np.arange(0, 51, dtype=float)
PRECISION_PIXELS = 20.0


@dataclass
class Trajectory:
    """Per-frame boxes ``(n, 4)``, peak scores ``(n,)`` and optional selected view ``(n,)``."""

    boxes: np.ndarray
    scores: np.ndarray
    selected_view: np.ndarray | None = None

    def __post_init__(self):
        self.boxes = np.asarray(self.boxes, dtype=float).reshape(-1, 4)
        self.scores = np.asarray(self.scores, dtype=float).reshape(-1)
        if len(self.scores) != len(self.boxes):
            raise AlignmentError(f"{len(self.boxes)} boxes but {len(self.scores)} scores")
        if self.selected_view is not None:
            self.selected_view = np.asarray(self.selected_view, dtype=int).reshape(-1)
            if len(self.selected_view) != len(self.boxes):
                raise AlignmentError("selected_view length differs from trajectory length")

    def __len__(self) -> int:
        return len(self.boxes)

    def box(self, i: int) -> BoundingBox:
        return BoundingBox.from_array(self.boxes[i])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        sel_eq = (self.selected_view is None and other.selected_view is None) or (
            self.selected_view is not None and other.selected_view is not None
            and np.array_equal(self.selected_view, other.selected_view))
        return (np.array_equal(self.boxes, other.boxes) and np.array_equal(self.scores, other.scores)
                and sel_eq)


@dataclass
class EvalCurve:
    thresholds: np.ndarray
    values: np.ndarray
    auc: float

    def at(self, threshold: float) -> float:
        idx = np.flatnonzero(np.isclose(self.thresholds, threshold))
        if not len(idx):
            raise ParameterError(f"threshold {threshold} not on the curve grid")
        return float(self.values[idx[0]])


def _boxes(x) -> np.ndarray:
    if isinstance(x, Trajectory):
        return x.boxes
    if isinstance(x, BoundingBox):
        return x.as_array()[None]
    if len(x) and isinstance(x[0], BoundingBox):
        return np.array([b.as_array() for b in x])
    return np.asarray(x, dtype=float).reshape(-1, 4)


def _aligned(traj, gt) -> tuple[np.ndarray, np.ndarray]:
    a, b = _boxes(traj), _boxes(gt)
    if len(a) != len(b):
        raise AlignmentError(f"trajectory has {len(a)} frames, ground truth {len(b)}")
    return a, b


def ious(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float).reshape(-1, 4)
    b = np.asarray(b, dtype=float).reshape(-1, 4)
    ix = np.minimum(a[:, 0] + a[:, 2], b[:, 0] + b[:, 2]) - np.maximum(a[:, 0], b[:, 0])
    iy = np.minimum(a[:, 1] + a[:, 3], b[:, 1] + b[:, 3]) - np.maximum(a[:, 1], b[:, 1])
    inter = np.clip(ix, 0, None) * np.clip(iy, 0, None)
    union = a[:, 2] * a[:, 3] + b[:, 2] * b[:, 3] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.clip(inter / union, 0.0, 1.0)


def center_errors(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float).reshape(-1, 4)
    b = np.asarray(b, dtype=float).reshape(-1, 4)
    dx = (a[:, 0] + a[:, 2] / 2) - (b[:, 0] + b[:, 2] / 2)
    dy = (a[:, 1] + a[:, 3] / 2) - (b[:, 1] + b[:, 3] / 2)
    return np.hypot(dx, dy)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    return float(ious(_boxes(a), _boxes(b))[0])


def center_error(a: BoundingBox, b: BoundingBox) -> float:
    return float(center_errors(_boxes(a), _boxes(b))[0])


def in_view(gt: np.ndarray) -> np.ndarray:
    return ~np.isnan(np.asarray(gt, dtype=float).reshape(-1, 4)).any(axis=1)


def success_curve(traj, gt) -> EvalCurve:
    """Fraction of in-view frames with IoU strictly above each threshold in 0..1."""
    a, b = _aligned(traj, gt)
    ok = in_view(b)
    o = ious(a[ok], b[ok])
    if len(o):
        values = (o[None, :] > IOU_THRESHOLDS[:, None]).mean(axis=1)
    else:
        values = np.zeros_like(IOU_THRESHOLDS)
    return EvalCurve(IOU_THRESHOLDS.copy(), values, float(values.mean()))


def precision_curve(traj, gt) -> EvalCurve:
    """Fraction of in-view frames with center error at most each threshold in 0..50 px."""
    a, b = _aligned(traj, gt)
    ok = in_view(b)
    e = center_errors(a[ok], b[ok])
    if len(e):
        values = (e[None, :] <= CLE_THRESHOLDS[:, None]).mean(axis=1)
    else:
        values = np.zeros_like(CLE_THRESHOLDS)
    return EvalCurve(CLE_THRESHOLDS.copy(), values, float(values.mean()))


def frame_scores(traj, gt, mode: str = "success") -> np.ndarray:
    """Per-frame s(h, y): IoU (``success``) or the 20 px hit indicator (``precision``).

    Out-of-view frames are NaN.
    """
    a, b = _aligned(traj, gt)
    ok = in_view(b)
    out = np.full(len(a), np.nan)
    if mode == "success":
        out[ok] = ious(a[ok], b[ok])
    elif mode == "precision":
        out[ok] = (center_errors(a[ok], b[ok]) <= PRECISION_PIXELS).astype(float)
    else:
        raise ParameterError(f"unknown score mode {mode!r}")
    return out


def _score_matrix(per_view_scores) -> np.ndarray:
    try:
        s = np.asarray(per_view_scores, dtype=float)
    except ValueError:
        raise AlignmentError("per-view score rows have different lengths") from None
    if s.ndim != 2:
        raise AlignmentError(f"expected a (views, frames) score matrix, got shape {s.shape}")
    return s


def selection_weights(selected, n_views: int) -> np.ndarray:
    """One-hot ``(n, V)`` weights from per-frame selected view indices."""
    sel = np.asarray(selected, dtype=int).reshape(-1)
    if np.any((sel < 0) | (sel >= n_views)):
        raise InvalidWeightsError(f"selected view outside [0, {n_views})")
    w = np.zeros((len(sel), n_views))
    w[np.arange(len(sel)), sel] = 1.0
    return w


def afs(per_view_scores, weights) -> float:
    """Automatic fusion score: mean over frames of the selected view's frame score.

    ``per_view_scores`` is ``(V, n)``; ``weights`` is ``(n, V)`` with one-hot rows.
    Frames where every view is out of view are skipped; an out-of-view selected
    view scores 0.
    """
    s = _score_matrix(per_view_scores)
    w = np.asarray(weights, dtype=float)
    if w.shape != (s.shape[1], s.shape[0]):
        raise AlignmentError(f"weights shape {w.shape} does not match scores {s.shape}")
    if not (np.all((w == 0) | (w == 1)) and np.all(w.sum(axis=1) == 1)):
        raise InvalidWeightsError("every frame's weight row must be one-hot")
    keep = ~np.isnan(s).all(axis=0)
    if not keep.any():
        return float("nan")
    picked = (np.nan_to_num(s, nan=0.0).T * w).sum(axis=1)
    return float(picked[keep].mean())


def ifs(per_view_scores) -> float:
    """Ideal fusion score: mean over frames of the best view's frame score."""
    s = _score_matrix(per_view_scores)
    keep = ~np.isnan(s).all(axis=0)
    if not keep.any():
        return float("nan")
    return float(np.nan_to_num(s[:, keep], nan=0.0).max(axis=0).mean())


def _attribute_flags(item) -> dict:
    attrs = getattr(item, "attributes", item)
    if hasattr(attrs, "flags"):
        return dict(attrs.flags)
    return dict(attrs)


def attribute_breakdown(results, flags=None) -> dict:
    """Average each metric over the groups carrying each attribute.

    ``results`` is a sequence of ``(group_or_attributes, metrics_dict)``. Rows of
    attributes with no matching group are ``None``.
    """
    names = list(ATTRIBUTE_NAMES) if flags is None else list(flags)
    unknown = [n for n in names if n not in ATTRIBUTE_NAMES]
    if unknown:
        raise ParameterError(f"unknown attribute(s): {unknown}; known: {list(ATTRIBUTE_NAMES)}")
    table = {}
    for name in names:
        subset = [m for g, m in results if _attribute_flags(g).get(name)]
        if not subset:
            table[name] = None
            continue
        keys = sorted(set().union(*(m.keys() for m in subset)))
        row = {}
        for k in keys:
            vals = [m[k] for m in subset if m.get(k) is not None and np.isfinite(m[k])]
            row[k] = float(np.mean(vals)) if vals else None
        row["groups"] = len(subset)
        table[name] = row
    return table
