"""Target-loss detection from recent peak scores and local-to-global search expansion."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .imaging import SearchGeometry, search_geometry


@dataclass(frozen=True)
class RedetectConfig:
    enabled: bool = True
    lambda_: float = 2.0
    t_score: float = 0.05  # fraction of the running maximum score
    q: int = 5
    expand_factor: float = 1.5
    max_expansions: int = 3
    # lower bound on the score spread used by the tracker, relative to the mean
    min_rel_std: float = 0.01

    def __post_init__(self):
        if not self.lambda_ >= 0:
            raise ParameterError(f"redetect.lambda must be >= 0, got {self.lambda_}")
        if not self.expand_factor > 1:
            raise ParameterError(f"redetect.expand_factor must be > 1, got {self.expand_factor}")
        if self.q < 1:
            raise ParameterError(f"redetect.q must be >= 1, got {self.q}")
        if self.min_rel_std < 0:
            raise ParameterError(f"redetect.min_rel_std must be >= 0, got {self.min_rel_std}")
        if self.max_expansions < 0:
            raise ParameterError(f"redetect.max_expansions must be >= 0, got {self.max_expansions}")


class ScoreHistory:
    """Ring buffer of the last ``q`` peak scores with population statistics."""

    def __init__(self, q: int, scores=()):
        if q < 1:
            raise ParameterError(f"history capacity must be >= 1, got {q}")
        self.q = q
        self._buf: deque[float] = deque((float(s) for s in scores), maxlen=q)

    def push(self, score: float) -> None:
        self._buf.append(float(score))

    def clear(self) -> None:
        self._buf.clear()

    def __len__(self) -> int:
        return len(self._buf)

    @property
    def full(self) -> bool:
        return len(self._buf) == self.q

    @property
    def scores(self) -> list[float]:
        return list(self._buf)

    @property
    def mean(self) -> float:
        return float(np.mean(self._buf)) if self._buf else float("nan")

    @property
    def std(self) -> float:
        return float(np.std(self._buf)) if self._buf else float("nan")

    def copy(self) -> ScoreHistory:
        return ScoreHistory(self.q, self._buf)

    def __eq__(self, other) -> bool:
        return isinstance(other, ScoreHistory) and self.q == other.q and self.scores == other.scores

    def __repr__(self) -> str:
        return f"ScoreHistory(q={self.q}, scores={self.scores})"


def threshold(history: ScoreHistory, lambda_: float, min_rel_std: float = 0.0) -> float:
    """Loss threshold: mean minus ``lambda_`` standard deviations of the buffered scores.

    ``min_rel_std`` floors the deviation at that fraction of ``|mean|``, so a
    run of near-identical scores does not put the threshold right at the mean.
    """
    if len(history) == 0:
        raise ParameterError("threshold of an empty score history")
    mu = history.mean
    return mu - lambda_ * max(history.std, min_rel_std * abs(mu))


def should_redetect(score: float, omega: float, t_score: float) -> bool:
    return bool(score < omega or score < t_score)


def expanded_pad(base_pad: float, step: int, cfg: RedetectConfig) -> float:
    if step < 1:
        raise ParameterError(f"expansion step must be >= 1, got {step}")
    return base_pad * cfg.expand_factor**step


def expand_search(state, step: int, cfg: RedetectConfig) -> SearchGeometry:
    """Search geometry for expansion ``step`` around the state's current box.

    Steps ``1..max_expansions`` grow the default pad geometrically; any later
    step covers the whole frame. The region never exceeds the frame.
    """
    tcfg = state.config
    full = step > cfg.max_expansions
    pad = expanded_pad(tcfg.pad_factor, min(step, max(cfg.max_expansions, 1)), cfg)
    return search_geometry(state.current_box, pad, tcfg.template_size, tcfg.cell_size,
                           state.frame_shape, full_frame=full)
