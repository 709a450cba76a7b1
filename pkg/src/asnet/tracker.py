"""Single-view base tracker.

Each frame the two transforms are re-solved from the previous frame's result:
the variation transform adapts the fixed first-frame template toward the
latest target appearance, the suppression transform emphasizes the
target-centered part of the search region. The response is the correlation of
the adapted template with the suppressed, windowed search features, evaluated
over a small scale pyramid.
"""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .config import TrackerConfig
from .errors import InvalidBoxError, TrackingError
from .eval import Trajectory
from .freqsolve import (ResponseMap, circular_convolve, correlate_spectra, fft2, impulse,
                        solve_suppression_transform, solve_variation_transform, template_spectrum)
from .imaging import (BoundingBox, FeatureExtractor, SearchGeometry, check_frame, cosine_window, embed,
                      embed_with_stats,
                      extract_patch, gaussian_weight_map, make_extractor, search_geometry)
from .redetect import ScoreHistory, expand_search, should_redetect, threshold

log = logging.getLogger(__name__)

# tracked box dims stay within this factor range of the initial box
_MIN_SCALE, _MAX_SCALE = 0.2, 5.0


@dataclass
class DroneTrackerState:
    drone_id: int
    config: TrackerConfig
    extractor: FeatureExtractor
    template_features: np.ndarray
    variation_transform: np.ndarray
    suppression_transform: np.ndarray
    current_box: BoundingBox
    init_box: BoundingBox
    frame_shape: tuple[int, ...]
    score_history: ScoreHistory
    frame_index: int = 0
    current_scale: float = 1.0
    running_max: float = 0.0
    border_peak: bool = False
    # last frame ended in an unconfirmed re-detection
    lost: bool = False

    def adapted_template(self) -> np.ndarray:
        return circular_convolve(self.variation_transform, self.template_features)

    def copy(self) -> DroneTrackerState:
        return dataclasses.replace(self, score_history=self.score_history.copy())


@dataclass
class ScaleResponses:
    """Raw per-template response maps at one pyramid level (no scale penalty)."""

    scale: float
    geometry: SearchGeometry
    maps: list[ResponseMap]


def default_geometry(state: DroneTrackerState, box: BoundingBox | None = None) -> SearchGeometry:
    cfg = state.config
    return search_geometry(box or state.current_box, cfg.pad_factor, cfg.template_size, cfg.cell_size)


def init_tracker(frame: np.ndarray, gt_box: BoundingBox, extractor: FeatureExtractor | None = None,
                 cfg: TrackerConfig | None = None, drone_id: int = 0) -> DroneTrackerState:
    cfg = cfg or TrackerConfig()
    extractor = extractor or make_extractor(cfg.features, cfg.cell_size, cfg.feature_norm)
    if not isinstance(gt_box, BoundingBox):
        gt_box = BoundingBox.from_array(gt_box)
    frame = check_frame(frame)
    f1 = embed(extract_patch(frame, gt_box, 1.0, cfg.template_size), extractor)
    state = DroneTrackerState(
        drone_id=drone_id, config=cfg, extractor=extractor, template_features=f1,
        variation_transform=impulse(f1.shape), suppression_transform=None, current_box=gt_box,
        init_box=gt_box, frame_shape=frame.shape, score_history=ScoreHistory(cfg.redetect.q))
    geo = default_geometry(state)
    state.suppression_transform = impulse((*geo.map_shape, f1.shape[2]))
    return state


def update_transforms(state: DroneTrackerState, prev_frame: np.ndarray) -> DroneTrackerState:
    """Re-solve both transforms from the target tracked in ``prev_frame``.

    A lost state has no trustworthy target crop, so both transforms fall back
    to the identity and the search uses the first-frame template as is.
    """
    cfg = state.config
    if state.lost:
        return dataclasses.replace(state, variation_transform=impulse(state.template_features.shape),
                                   suppression_transform=impulse(state.suppression_transform.shape))
    box = state.current_box
    f_prev = embed(extract_patch(prev_frame, box, 1.0, cfg.template_size), state.extractor)
    m = solve_variation_transform(state.template_features, f_prev, cfg.lambda_m)

    geo = default_geometry(state)
    region = geo.crop(prev_frame)
    weights = gaussian_weight_map(*geo.out_hw, cfg.suppression_sigma * cfg.template_size)
    if region.ndim == 2:
        weights = weights[..., 0]
    f_region = embed(region, state.extractor)
    f_weighted = embed(region * weights, state.extractor)
    w = solve_suppression_transform(f_region, f_weighted, cfg.lambda_w)
    return dataclasses.replace(state, variation_transform=m, suppression_transform=w)


def search_spectrum(state: DroneTrackerState, frame: np.ndarray, geo: SearchGeometry,
                    suppress: bool = True, stats=None) -> np.ndarray:
    """Spectrum of the search features, windowed and (optionally) suppressed."""
    feat, _ = _search_features(state, frame, geo, stats)
    if not suppress:
        return fft2(feat)
    return _suppressed_spectrum(state, feat)


def _search_features(state: DroneTrackerState, frame: np.ndarray, geo: SearchGeometry, stats=None):
    return embed_with_stats(geo.crop(frame), state.extractor, stats)


def _suppressed_spectrum(state: DroneTrackerState, feat: np.ndarray) -> np.ndarray:
    feat = feat * cosine_window(*feat.shape[:2])
    return fft2(state.suppression_transform) * fft2(feat)


def _scaled_box(box: BoundingBox, s: float) -> BoundingBox:
    cx, cy = box.center
    return BoundingBox.from_center(cx, cy, box.w * s, box.h * s)


def _norm(state: DroneTrackerState, own_template: np.ndarray) -> float:
    if state.config.normalization == "template":
        energy = float(np.sum(own_template**2))
        return 1.0 / energy if energy > 0 else 1.0
    return 1.0


def scale_responses(state: DroneTrackerState, frame: np.ndarray, templates: Sequence[np.ndarray],
                    own: int = 0) -> list[ScaleResponses]:
    """Responses of every template at every pyramid level, unity scale first.

    ``templates[own]`` must be the state's own adapted template.
    """
    frame = check_frame(frame)
    cfg = state.config
    scales = sorted(cfg.scale_steps, key=lambda s: (abs(s - 1.0), s))
    norm = _norm(state, templates[own])
    out = []
    spectra = stats = None
    for s in scales:
        geo = default_geometry(state, _scaled_box(state.current_box, s))
        # every level reuses the unity level's feature statistics so that the
        # extra background in larger regions does not inflate their scores
        feat, stats = _search_features(state, frame, geo, stats)
        s_hat = _suppressed_spectrum(state, feat)
        if spectra is None:
            spectra = [template_spectrum(t, s_hat.shape) for t in templates]
        maps = [correlate_spectra(t_hat, s_hat) for t_hat in spectra]
        if norm != 1.0:
            maps = [m.scaled(norm) for m in maps]
        out.append(ScaleResponses(s, geo, maps))
    return out


def select_scale(levels: Sequence[ScaleResponses], combine: Callable[[list[ResponseMap]], np.ndarray],
                 penalty: float) -> ResponseMap:
    """Best pyramid level after combining its maps; off-unity levels are damped by ``penalty``.

    Levels are compared by their parabola-refined peak heights, so a level
    whose cell grid happens to sit on the target does not win by sampling phase
    alone. Ties keep the earlier level, and levels arrive unity-first.
    """
    best, best_height = None, -np.inf
    for lvl in levels:
        values = combine(lvl.maps)
        if lvl.scale != 1.0:
            values = values * penalty
        resp = ResponseMap(values, lvl.scale, lvl.geometry)
        height = refined_peak_value(resp)
        if best is None or height > best_height:
            best, best_height = resp, height
    return best


def _own_only(maps: list[ResponseMap]) -> np.ndarray:
    return maps[0].values


def compute_own_response(state: DroneTrackerState, frame: np.ndarray) -> ResponseMap:
    """Own-template response at the best scale; ``.scale`` and ``.geometry`` are attached."""
    levels = scale_responses(state, frame, [state.adapted_template()])
    return select_scale(levels, _own_only, state.config.scale_penalty)


def on_border(response: ResponseMap) -> bool:
    r, c = response.peak_pos
    H, W = response.shape
    return r in (0, H - 1) or c in (0, W - 1)


def _parabola_vertex(left: float, mid: float, right: float) -> float:
    curv = left - 2.0 * mid + right
    if curv >= 0:
        return 0.0
    return float(np.clip(0.5 * (left - right) / curv, -0.5, 0.5))


def subcell_offset(response: ResponseMap) -> tuple[float, float]:
    """Fractional (row, col) offset of the peak from a 3-point parabola fit per axis.

    Neighbours wrap around the map. A symmetric or non-concave neighbourhood gives 0.
    """
    v = response.values
    H, W = v.shape
    r, c = response.peak_pos
    dr = _parabola_vertex(v[(r - 1) % H, c], v[r, c], v[(r + 1) % H, c])
    dc = _parabola_vertex(v[r, (c - 1) % W], v[r, c], v[r, (c + 1) % W])
    return dr, dc


def refined_peak_value(response: ResponseMap) -> float:
    """Peak height interpolated by the same per-axis parabolas as ``subcell_offset``."""
    v = response.values
    H, W = v.shape
    r, c = response.peak_pos
    m = v[r, c]
    height = m
    for a, b in ((v[(r - 1) % H, c], v[(r + 1) % H, c]), (v[r, (c - 1) % W], v[r, (c + 1) % W])):
        curv = a - 2.0 * m + b
        if curv < 0:
            height -= (a - b) ** 2 / (8.0 * curv)
    return float(height)


def locate(state: DroneTrackerState, response: ResponseMap,
           geometry: SearchGeometry | None = None, scale: float | None = None) -> tuple[BoundingBox, float]:
    """Map the response peak back to a frame-coordinate box and its score."""
    if geometry is None:
        geometry = response.geometry or default_geometry(state)
    if scale is None:
        scale = response.scale
    r, c = response.peak_pos
    if state.config.subcell_peak:
        dr, dc = subcell_offset(response)
        r, c = r + dr, c + dc
    r0, c0 = response.center
    px, py = geometry.cell_pixels
    cx = geometry.center[0] + (c - c0) * px
    cy = geometry.center[1] + (r - r0) * py
    if state.frame_shape is not None:
        H, W = state.frame_shape[:2]
        cx = float(np.clip(cx, 0.0, W))
        cy = float(np.clip(cy, 0.0, H))
    init = state.init_box
    w = float(np.clip(state.current_box.w * scale, _MIN_SCALE * init.w, _MAX_SCALE * init.w))
    h = float(np.clip(state.current_box.h * scale, _MIN_SCALE * init.h, _MAX_SCALE * init.h))
    return BoundingBox.from_center(cx, cy, w, h), response.peak_value


Responder = Callable[[DroneTrackerState, np.ndarray], ResponseMap]


def redetect(state: DroneTrackerState, frame: np.ndarray, omega: float, floor: float,
             respond: Responder = compute_own_response) -> tuple[BoundingBox, float, bool] | None:
    """Local-to-global recovery.

    Each expansion step proposes the peak of a plain (unwindowed, unsuppressed)
    correlation over an enlarged region; the proposal is then re-scored with the
    regular pipeline so its score is comparable to the history. The first
    proposal clearing both thresholds is returned with ``recovered=True``;
    otherwise the best-scoring proposal is returned with ``recovered=False``.
    """
    rcfg = state.config.redetect
    template = state.adapted_template()
    H, W = state.frame_shape[:2]
    best = None
    for step in range(1, rcfg.max_expansions + 2):
        geo = expand_search(state, step, rcfg)
        s_hat = search_spectrum(state, frame, geo, suppress=False)
        coarse = correlate_spectra(template_spectrum(template, s_hat.shape), s_hat)
        cand, _ = locate(state, coarse, geo, 1.0)
        probe = dataclasses.replace(state, current_box=cand)
        box, score = locate(probe, respond(probe, frame))
        if score >= omega and score >= floor:
            log.debug("view %d frame %d: recovered at expansion step %d (score %.4g)",
                      state.drone_id, state.frame_index + 1, step, score)
            return box, score, True
        if best is None or score > best[1]:
            best = (box, score, False)
        if geo.region_wh[0] >= W - 1e-6 and geo.region_wh[1] >= H - 1e-6:
            break
    return best


def advance(state: DroneTrackerState, box: BoundingBox, score: float, frame_index: int,
            record: bool = True) -> DroneTrackerState:
    """Move to ``box``; ``record=False`` leaves the score out of the loss history."""
    history = state.score_history.copy()
    if record:
        history.push(score)
    return dataclasses.replace(
        state, current_box=box, current_scale=box.w / state.init_box.w, score_history=history,
        running_max=max(state.running_max, score), frame_index=frame_index)


def track_frame(state: DroneTrackerState, prev_frame: np.ndarray, frame: np.ndarray,
                respond: Responder = compute_own_response) -> tuple[DroneTrackerState, BoundingBox, float]:
    """One tracking step from frame t-1 to frame t.

    A failing frame keeps the previous box with score 0.
    """
    try:
        state = update_transforms(state, prev_frame)
    except (TrackingError, FloatingPointError) as exc:
        return fail_frame(state, exc)
    return track_updated(state, frame, respond)


def fail_frame(state: DroneTrackerState, exc: Exception) -> tuple[DroneTrackerState, BoundingBox, float]:
    index = state.frame_index + 1
    log.warning("view %d frame %d: tracking failed (%s); keeping previous box", state.drone_id, index, exc)
    box = state.current_box
    return advance(state, box, 0.0, index), box, 0.0


def track_updated(state: DroneTrackerState, frame: np.ndarray,
                  respond: Responder = compute_own_response) -> tuple[DroneTrackerState, BoundingBox, float]:
    """Respond, locate and (if enabled) re-detect, for a state whose transforms are current.

    When re-detection runs without clearing the thresholds the state is marked
    lost: the best proposal is kept if it beats the local peak, and the score
    stays out of the history so the threshold keeps describing the last
    confirmed frames.
    """
    lost = False
    try:
        resp = respond(state, frame)
        box, score = locate(state, resp)
        border = on_border(resp)
        rcfg = state.config.redetect
        recovered = False
        if rcfg.enabled:
            hist = state.score_history
            omega = threshold(hist, rcfg.lambda_, rcfg.min_rel_std) if hist.full else -np.inf
            floor = rcfg.t_score * state.running_max
            if border or should_redetect(score, omega, floor):
                found = redetect(state, frame, omega, floor, respond)
                if found is not None and (found[2] or found[1] > score):
                    box, score, recovered = found
                lost = not recovered and (score < omega or score < floor)
                if lost:
                    # a scale picked on clutter means nothing; keep the last size
                    cx, cy = box.center
                    box = BoundingBox.from_center(cx, cy, state.current_box.w, state.current_box.h)
    except (TrackingError, FloatingPointError) as exc:
        return fail_frame(state, exc)
    state = dataclasses.replace(state, border_peak=border and not recovered, lost=lost)
    if recovered:
        state.score_history = ScoreHistory(state.score_history.q)
    return advance(state, box, score, state.frame_index + 1, record=not lost), box, score


def first_frame_score(state: DroneTrackerState, frame: np.ndarray, respond: Responder = compute_own_response) -> float:
    return respond(state, frame).peak_value


def track_sequence(frames: Sequence[np.ndarray], gt0: BoundingBox, cfg: TrackerConfig | None = None,
                   extractor: FeatureExtractor | None = None) -> Trajectory:
    if len(frames) < 1:
        raise InvalidBoxError("need at least one frame")
    cfg = cfg or TrackerConfig()
    if not isinstance(gt0, BoundingBox):
        gt0 = BoundingBox.from_array(gt0)
    it = iter(frames)
    prev = next(it)
    state = init_tracker(prev, gt0, extractor, cfg)
    score = first_frame_score(state, prev)
    state = advance(state, gt0, score, 0)
    boxes, scores = [gt0.as_array()], [score]
    for frame in it:
        state, box, score = track_frame(state, prev, frame)
        boxes.append(box.as_array())
        scores.append(score)
        prev = frame
    return Trajectory(np.array(boxes), np.array(scores))
