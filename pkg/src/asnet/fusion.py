"""Agent sharing across views.

For every view k and every view v the search region of k is correlated with
v's adapted template. The V maps are blended with weights learned per frame by
ridge regression of k's own adapted template on the features of the V
candidate targets, and the view with the highest fused peak is selected as the
group result. Each view keeps its own state; positions are never copied
between views.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import TrackerConfig
from .errors import ParameterError, ShapeError, SingularSystemError, SynchronizationError, TrackingError
from .eval import Trajectory
from .freqsolve import ResponseMap, circular_convolve
from .imaging import BoundingBox, FeatureExtractor, embed, extract_patch
from .tracker import (DroneTrackerState, advance, compute_own_response, fail_frame, first_frame_score, init_tracker,
                      locate, scale_responses, select_scale, track_updated, update_transforms)

log = logging.getLogger(__name__)


@dataclass
class AgentGroupState:
    views: list[DroneTrackerState]
    weights: list[np.ndarray]
    selected_view: int
    frame_index: int = 0
    prev_frames: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def n_views(self) -> int:
        return len(self.views)


def learn_fusion_weights(tracked_feats: Sequence[np.ndarray], target: np.ndarray, lambda_u: float) -> np.ndarray:
    """Ridge weights ``u`` minimizing ||D u - y||^2 + lambda_u ||u||^2.

    Columns of D are the row-major flattened ``tracked_feats``; y is ``target`` flattened.
    """
    if lambda_u < 0:
        raise ParameterError(f"lambda_u must be >= 0, got {lambda_u}")
    if not len(tracked_feats):
        raise ParameterError("need at least one feature map")
    shape = np.shape(target)
    if any(np.shape(f) != shape for f in tracked_feats):
        raise ShapeError("all feature maps must match the target shape")
    D = np.stack([np.asarray(f, dtype=np.float64).ravel() for f in tracked_feats], axis=1)
    y = np.asarray(target, dtype=np.float64).ravel()
    gram = D.T @ D + lambda_u * np.eye(D.shape[1])
    if lambda_u == 0 and (not np.all(np.isfinite(gram)) or np.linalg.cond(gram) > 1e12):
        raise SingularSystemError("normal equations are singular without regularization")
    try:
        return np.linalg.solve(gram, D.T @ y)
    except np.linalg.LinAlgError:
        raise SingularSystemError("normal equations are singular") from None


def fuse_responses(maps: Sequence[ResponseMap], u) -> ResponseMap:
    u = np.asarray(u, dtype=np.float64).ravel()
    if len(maps) != len(u):
        raise ShapeError(f"{len(maps)} maps for {len(u)} weights")
    shape = maps[0].shape
    if any(m.shape != shape for m in maps):
        raise ShapeError("response maps differ in shape")
    values = np.zeros(shape)
    for weight, m in zip(u, maps):
        values = values + weight * m.values
    return ResponseMap(values, maps[0].scale, maps[0].geometry)


def select_best_view(fused_scores: Sequence[float]) -> int:
    """Index of the largest score; ties go to the lowest index."""
    if len(fused_scores) == 0:
        raise ParameterError("no view scores to select from")
    return int(np.argmax(np.asarray(fused_scores, dtype=float)))


def cross_response(k_state: DroneTrackerState, v_template: tuple[np.ndarray, np.ndarray],
                   frame_k: np.ndarray) -> ResponseMap:
    """Response of view k's search region to view v's adapted template ``(F1_v, M_v)``."""
    f1_v, m_v = v_template
    if np.shape(f1_v) != k_state.template_features.shape:
        raise ShapeError(f"template shape {np.shape(f1_v)} differs from {k_state.template_features.shape}")
    levels = scale_responses(k_state, frame_k, [k_state.adapted_template(), circular_convolve(m_v, f1_v)])
    return select_scale(levels, lambda maps: maps[1].values, k_state.config.scale_penalty)


class _SharedResponder:
    """Fused response for view ``own`` given every view's adapted template."""

    def __init__(self, templates: list[np.ndarray], own: int, lambda_u: float):
        self.templates = templates
        self.own = own
        self.lambda_u = lambda_u
        self.last_weights: np.ndarray | None = None

    def __call__(self, state: DroneTrackerState, frame: np.ndarray) -> ResponseMap:
        cfg = state.config
        levels = scale_responses(state, frame, self.templates, own=self.own)
        unity = min(levels, key=lambda lvl: abs(lvl.scale - 1.0))
        cols = []
        for m in unity.maps:
            box, _ = locate(state, m, unity.geometry, 1.0)
            cols.append(embed(extract_patch(frame, box, 1.0, cfg.template_size), state.extractor))
        u = learn_fusion_weights(cols, self.templates[self.own], self.lambda_u)
        self.last_weights = u
        return select_scale(levels, lambda maps: fuse_responses(maps, u).values, cfg.scale_penalty)


def _sharing_active(cfg: TrackerConfig, n_views: int) -> bool:
    return cfg.sharing and n_views > 1


def _one_hot(k: int, n: int) -> np.ndarray:
    u = np.zeros(n)
    u[k] = 1.0
    return u


def init_group(frames: Sequence[np.ndarray], boxes: Sequence[BoundingBox], cfg: TrackerConfig | None = None,
               extractor: FeatureExtractor | None = None) -> tuple[AgentGroupState, list[float]]:
    """Initialize every view on its first frame; returns the state and first-frame scores."""
    cfg = cfg or TrackerConfig()
    if len(frames) != len(boxes) or not len(frames):
        raise SynchronizationError(f"{len(frames)} frames for {len(boxes)} initial boxes")
    V = len(frames)
    views = [init_tracker(f, b, extractor, cfg, drone_id=k) for k, (f, b) in enumerate(zip(frames, boxes))]
    shape = views[0].template_features.shape
    if any(v.template_features.shape != shape for v in views):
        raise ShapeError("views disagree on template feature shape")
    templates = [v.adapted_template() for v in views]
    scores, weights = [], []
    for k, (state, frame) in enumerate(zip(views, frames)):
        if _sharing_active(cfg, V):
            responder = _SharedResponder(templates, k, cfg.lambda_u)
            scores.append(first_frame_score(state, frame, responder))
            weights.append(responder.last_weights)
        else:
            scores.append(first_frame_score(state, frame))
            weights.append(_one_hot(k, V))
    views = [advance(s, s.current_box, sc, 0) for s, sc in zip(views, scores)]
    selected = select_best_view(scores) if cfg.view_fusion else -1
    return AgentGroupState(views, weights, selected, 0, list(frames)), scores


def step_group(group: AgentGroupState, frames: Sequence[np.ndarray]
               ) -> tuple[AgentGroupState, list[BoundingBox], BoundingBox | None, list[float]]:
    """Advance every view by one synchronized frame and select the group result.

    ``selected_box`` is the chosen view's box in that view's image coordinates,
    or ``None`` when view-aware fusion is disabled.
    """
    V = group.n_views
    if len(frames) != V or any(f is None for f in frames):
        raise SynchronizationError(f"expected {V} synchronized frames, got {len(frames)}")
    cfg = group.views[0].config
    updated, failed = [], []
    for state, prev in zip(group.views, group.prev_frames):
        try:
            updated.append(update_transforms(state, prev))
            failed.append(None)
        except (TrackingError, FloatingPointError) as exc:
            updated.append(state)
            failed.append(exc)
    templates = [s.adapted_template() for s in updated]

    new_views, boxes, scores, weights = [], [], [], []
    for k, (state, frame) in enumerate(zip(updated, frames)):
        if failed[k] is not None:
            state, box, score = fail_frame(state, failed[k])
            u = group.weights[k]
        elif _sharing_active(cfg, V):
            responder = _SharedResponder(templates, k, cfg.lambda_u)
            state, box, score = track_updated(state, frame, responder)
            u = responder.last_weights if responder.last_weights is not None else group.weights[k]
        else:
            state, box, score = track_updated(state, frame, compute_own_response)
            u = _one_hot(k, V)
        new_views.append(state)
        boxes.append(box)
        scores.append(score)
        weights.append(u)

    selected = select_best_view(scores) if cfg.view_fusion else -1
    group = AgentGroupState(new_views, weights, selected, group.frame_index + 1, list(frames))
    return group, boxes, (boxes[selected] if selected >= 0 else None), scores


@dataclass
class GroupRun:
    trajectories: list[Trajectory]
    selected: np.ndarray  # (n,), -1 when view fusion is off
    weights: np.ndarray  # (n, V, V): row k holds view k's fusion weights
    seconds: float = 0.0

    @property
    def fps(self) -> float:
        n = len(self.selected)
        return n / self.seconds if self.seconds > 0 else float("inf")


def run_group(view_frames: Sequence[Sequence[np.ndarray]], init_boxes: Sequence[BoundingBox],
              cfg: TrackerConfig | None = None, extractor: FeatureExtractor | None = None) -> GroupRun:
    """Track all views over synchronized frame streams."""
    cfg = cfg or TrackerConfig()
    V = len(view_frames)
    n = len(view_frames[0]) if V else 0
    if V == 0 or n == 0:
        raise ParameterError("need at least one view with at least one frame")
    if any(len(f) != n for f in view_frames):
        raise SynchronizationError(f"views have frame counts {[len(f) for f in view_frames]}")
    boxes = [b if isinstance(b, BoundingBox) else BoundingBox.from_array(b) for b in init_boxes]
    t0 = time.perf_counter()
    first = [vf[0] for vf in view_frames]
    group, scores = init_group(first, boxes, cfg, extractor)
    all_boxes = [[b.as_array()] for b in boxes]
    all_scores = [[s] for s in scores]
    selected = [group.selected_view]
    weights = [np.array(group.weights)]
    for t in range(1, n):
        group, step_boxes, _, step_scores = step_group(group, [vf[t] for vf in view_frames])
        for k in range(V):
            all_boxes[k].append(step_boxes[k].as_array())
            all_scores[k].append(step_scores[k])
        selected.append(group.selected_view)
        weights.append(np.array(group.weights))
    seconds = time.perf_counter() - t0
    sel = np.array(selected, dtype=int)
    trajs = [Trajectory(np.array(all_boxes[k]), np.array(all_scores[k]), sel if cfg.view_fusion else None)
             for k in range(V)]
    return GroupRun(trajs, sel, np.array(weights), seconds)
