"""Dataset layout, results files and the synthetic multi-view scene generator.

On-disk group layout::

    <group>/attributes.txt            ten 0/1 flags, order of ATTRIBUTE_NAMES
    <group>/drone<K>/img000001.png    frames (png or jpg), 1-based ordinals
    <group>/drone<K>/groundtruth.txt  one "x,y,w,h" line per frame; NaN,NaN,NaN,NaN = out of view
    <group>/drone<K>/occlusion.txt    optional, one 0/1/2 per frame (none/partial/full)

Results file: a single ``#`` header line, then one ``frame,view,x,y,w,h,score,selected``
row per view per frame (frames 0-based, ``selected`` = -1 when no view was selected).
"""
from __future__ import annotations

import dataclasses
import math
import re
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli
from scipy import ndimage

from .errors import DatasetError, ParameterError
from .imaging import load_frame, save_frame

ATTRIBUTE_NAMES = ("DAY", "NIGHT", "CM", "POC", "FOC", "OV", "SO", "VC", "IV", "LR")
FRAME_EXTS = (".png", ".jpg", ".jpeg")
NO_OCCLUSION, PARTIAL_OCCLUSION, FULL_OCCLUSION = 0, 1, 2
# a target smaller than this many pixels counts as low resolution ...
_TINY_TARGET_PIXELS = 400
# ... when it is tiny in more than this many frames
_LR_MIN_FRAMES = 50

_VIEW_DIR = re.compile(r"^drone(\d+)$")


@dataclass(frozen=True)
class AttributeSet:
    flags: dict

    def __post_init__(self):
        flags = {name: int(bool(self.flags.get(name, 0))) for name in ATTRIBUTE_NAMES}
        extra = set(self.flags) - set(ATTRIBUTE_NAMES)
        if extra:
            raise ParameterError(f"unknown attribute(s) {sorted(extra)}")
        if flags["DAY"] and flags["NIGHT"]:
            raise ParameterError("DAY and NIGHT are mutually exclusive")
        object.__setattr__(self, "flags", flags)

    @classmethod
    def from_list(cls, values) -> AttributeSet:
        return cls(dict(zip(ATTRIBUTE_NAMES, values)))

    def as_list(self) -> list[int]:
        return [self.flags[n] for n in ATTRIBUTE_NAMES]

    def __getitem__(self, name: str) -> int:
        return self.flags[name]


class FrameList(Sequence):
    """Frames of one view; loaded from disk on access unless held in memory."""

    def __init__(self, paths=None, arrays=None):
        if (paths is None) == (arrays is None):
            raise ValueError("give exactly one of paths or arrays")
        self.paths = None if paths is None else [Path(p) for p in paths]
        self._arrays = arrays

    def __len__(self) -> int:
        return len(self.paths) if self.paths is not None else len(self._arrays)

    def __getitem__(self, i):
        if isinstance(i, slice):
            if self.paths is not None:
                return FrameList(paths=self.paths[i])
            return FrameList(arrays=self._arrays[i])
        if self._arrays is not None:
            return self._arrays[i]
        return load_frame(self.paths[i])


@dataclass
class ViewSequence:
    name: str
    frames: FrameList
    groundtruth: np.ndarray  # (n, 4), NaN rows = out of view
    occlusion: np.ndarray | None = None  # (n,) NO/PARTIAL/FULL_OCCLUSION

    def __len__(self) -> int:
        return len(self.frames)


@dataclass
class GroupSequence:
    group_id: str
    views: list[ViewSequence]
    attributes: AttributeSet

    def __post_init__(self):
        counts = [len(v) for v in self.views]
        if not counts:
            raise DatasetError(f"group {self.group_id}: no views")
        if len(set(counts)) != 1:
            detail = ", ".join(f"{v.name} has {len(v)}" for v in self.views)
            raise DatasetError(f"group {self.group_id}: views are not synchronized ({detail} frames)")
        for v in self.views:
            if len(v.groundtruth) != len(v):
                raise DatasetError(f"group {self.group_id}/{v.name}: {len(v.groundtruth)} ground-truth "
                                   f"rows for {len(v)} frames")

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def n_frames(self) -> int:
        return len(self.views[0])


# --- dataset reading ---------------------------------------------------------

def _parse_box_line(line: str, where: str) -> list[float]:
    parts = [p.strip() for p in line.replace("\t", ",").split(",")]
    if len(parts) != 4:
        raise DatasetError(f"{where}: expected 4 comma-separated values, got {line!r}")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise DatasetError(f"{where}: non-numeric value in {line!r}") from None
    nan = [math.isnan(v) for v in vals]
    if any(nan):
        if not all(nan):
            raise DatasetError(f"{where}: partially missing box {line!r}")
        return vals
    if any(math.isinf(v) for v in vals) or vals[2] <= 0 or vals[3] <= 0:
        raise DatasetError(f"{where}: invalid box {line!r} (need finite values and positive w, h)")
    return vals


def read_groundtruth(path) -> np.ndarray:
    path = Path(path)
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            raise DatasetError(f"{path}:{lineno}: empty line")
        rows.append(_parse_box_line(line, f"{path}:{lineno}"))
    return np.array(rows, dtype=float).reshape(-1, 4)


def write_groundtruth(path, boxes) -> None:
    lines = []
    for b in np.asarray(boxes, dtype=float).reshape(-1, 4):
        lines.append("NaN,NaN,NaN,NaN" if np.isnan(b).any() else ",".join(repr(float(v)) for v in b))
    Path(path).write_text("".join(line + "\n" for line in lines))


def read_attributes(path) -> AttributeSet:
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if len(lines) != 1:
        raise DatasetError(f"{path}: expected a single line of {len(ATTRIBUTE_NAMES)} flags")
    parts = [p.strip() for p in lines[0].split(",")]
    if len(parts) != len(ATTRIBUTE_NAMES) or any(p not in ("0", "1") for p in parts):
        raise DatasetError(f"{path}:1: expected {len(ATTRIBUTE_NAMES)} comma-separated 0/1 flags, "
                           f"got {lines[0]!r}")
    try:
        return AttributeSet.from_list(int(p) for p in parts)
    except ParameterError as exc:
        raise DatasetError(f"{path}:1: {exc}") from None


def read_occlusion(path, n: int) -> np.ndarray:
    path = Path(path)
    vals = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        s = line.strip()
        if s not in ("0", "1", "2"):
            raise DatasetError(f"{path}:{lineno}: expected 0, 1 or 2, got {line!r}")
        vals.append(int(s))
    if len(vals) != n:
        raise DatasetError(f"{path}: {len(vals)} occlusion rows for {n} frames")
    return np.array(vals, dtype=int)


def view_dirs(group_dir: Path) -> list[Path]:
    found = []
    for p in group_dir.iterdir():
        m = _VIEW_DIR.match(p.name)
        if m and p.is_dir():
            found.append((int(m.group(1)), p))
    return [p for _, p in sorted(found)]


def load_group(path) -> GroupSequence:
    root = Path(path)
    if not root.is_dir():
        raise DatasetError(f"{root}: group directory not found")
    dirs = view_dirs(root)
    if not dirs:
        raise DatasetError(f"{root}: no drone<K> view directories")
    attr_path = root / "attributes.txt"
    if not attr_path.is_file():
        raise DatasetError(f"{attr_path}: missing attribute file")
    attributes = read_attributes(attr_path)
    views = []
    for d in dirs:
        frames = sorted(p for p in d.iterdir() if p.name.startswith("img") and p.suffix.lower() in FRAME_EXTS)
        gt_path = d / "groundtruth.txt"
        if not gt_path.is_file():
            raise DatasetError(f"{gt_path}: missing ground truth")
        gt = read_groundtruth(gt_path)
        if len(gt) != len(frames):
            raise DatasetError(f"{gt_path}: {len(gt)} ground-truth lines but {len(frames)} frames in {d}")
        occ_path = d / "occlusion.txt"
        occ = read_occlusion(occ_path, len(frames)) if occ_path.is_file() else None
        views.append(ViewSequence(d.name, FrameList(paths=frames), gt, occ))
    return GroupSequence(root.name, views, attributes)


def list_groups(dataset_root) -> list[str]:
    root = Path(dataset_root)
    if not root.is_dir():
        raise DatasetError(f"{root}: dataset root not found")
    return sorted(p.name for p in root.iterdir() if p.is_dir() and (p / "attributes.txt").exists())


def save_group(group: GroupSequence, root) -> Path:
    """Write ``group`` (frames as PNG) under ``root/<group_id>``."""
    out = Path(root) / group.group_id
    out.mkdir(parents=True, exist_ok=True)
    (out / "attributes.txt").write_text(",".join(str(v) for v in group.attributes.as_list()) + "\n")
    for k, view in enumerate(group.views, 1):
        d = out / f"drone{k}"
        d.mkdir(exist_ok=True)
        for i, frame in enumerate(view.frames, 1):
            save_frame(frame, d / f"img{i:06d}.png")
        write_groundtruth(d / "groundtruth.txt", view.groundtruth)
        if view.occlusion is not None:
            (d / "occlusion.txt").write_text("".join(f"{int(v)}\n" for v in view.occlusion))
    return out


# --- results files -----------------------------------------------------------

@dataclass
class ResultsFile:
    sequence_id: str
    config_fingerprint: str
    boxes: np.ndarray  # (V, n, 4)
    scores: np.ndarray  # (V, n)
    selected: np.ndarray  # (n,), -1 = none

    def __post_init__(self):
        self.boxes = np.asarray(self.boxes, dtype=float).reshape(len(self.boxes), -1, 4)
        self.scores = np.asarray(self.scores, dtype=float).reshape(self.boxes.shape[:2])
        self.selected = np.asarray(self.selected, dtype=int).reshape(-1)
        if len(self.selected) != self.boxes.shape[1]:
            raise DatasetError("selected-view column length differs from frame count")

    @property
    def n_views(self) -> int:
        return self.boxes.shape[0]

    @property
    def n_frames(self) -> int:
        return self.boxes.shape[1]

    @property
    def has_selection(self) -> bool:
        return self.n_frames > 0 and bool(np.all(self.selected >= 0))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ResultsFile):
            return NotImplemented
        return (self.sequence_id == other.sequence_id and self.config_fingerprint == other.config_fingerprint
                and self.boxes.shape == other.boxes.shape and np.array_equal(self.boxes, other.boxes)
                and np.array_equal(self.scores, other.scores) and np.array_equal(self.selected, other.selected))


def _results_header(res: ResultsFile) -> str:
    return (f"# sequence={res.sequence_id} config={res.config_fingerprint} "
            f"views={res.n_views} frames={res.n_frames}\n")


def save_results(traj_per_view, selections, path, sequence_id: str = "", config_fingerprint: str = "") -> ResultsFile:
    """Write per-view trajectories and per-frame selections; boxes keep 2 decimals."""
    if isinstance(traj_per_view, ResultsFile):
        res = traj_per_view
    else:
        trajs = list(traj_per_view)
        n = len(trajs[0]) if trajs else 0
        if any(len(t) != n for t in trajs):
            raise DatasetError("trajectories are not aligned")
        sel = np.full(n, -1) if selections is None else np.asarray(selections, dtype=int)
        boxes = np.round(np.array([t.boxes for t in trajs]).reshape(len(trajs), n, 4), 2)
        scores = np.array([t.scores for t in trajs]).reshape(len(trajs), n)
        res = ResultsFile(sequence_id, config_fingerprint, boxes, scores, sel)
    lines = [_results_header(res)]
    for i in range(res.n_frames):
        for v in range(res.n_views):
            x, y, w, h = res.boxes[v, i]
            lines.append(f"{i},{v},{x:.2f},{y:.2f},{w:.2f},{h:.2f},{float(res.scores[v, i])!r},{res.selected[i]}\n")
    Path(path).write_text("".join(lines))
    return res


_HEADER = re.compile(r"^# sequence=(\S*) config=(\S*) views=(\d+) frames=(\d+)$")


def load_results(path) -> ResultsFile:
    path = Path(path)
    text = path.read_text().splitlines()
    if not text:
        raise DatasetError(f"{path}: empty results file")
    m = _HEADER.match(text[0])
    if not m:
        raise DatasetError(f"{path}:1: malformed header {text[0]!r}")
    seq, fp, V, n = m.group(1), m.group(2), int(m.group(3)), int(m.group(4))
    boxes = np.full((V, n, 4), np.nan)
    scores = np.full((V, n), np.nan)
    selected = np.full(n, -2)
    seen = np.zeros((V, n), dtype=bool)
    for lineno, line in enumerate(text[1:], 2):
        parts = line.split(",")
        where = f"{path}:{lineno}"
        if len(parts) != 8:
            raise DatasetError(f"{where}: expected 8 fields, got {len(parts)}")
        try:
            i, v = int(parts[0]), int(parts[1])
            box = [float(p) for p in parts[2:6]]
            score = float(parts[6])
            sel = int(parts[7])
        except ValueError:
            raise DatasetError(f"{where}: malformed row {line!r}") from None
        if not (0 <= i < n and 0 <= v < V):
            raise DatasetError(f"{where}: frame/view index out of range")
        if seen[v, i]:
            raise DatasetError(f"{where}: duplicate row for frame {i} view {v}")
        if selected[i] != -2 and selected[i] != sel:
            raise DatasetError(f"{where}: inconsistent selected view for frame {i}")
        if not (sel == -1 or 0 <= sel < V):
            raise DatasetError(f"{where}: selected view {sel} out of range")
        seen[v, i] = True
        boxes[v, i] = box
        scores[v, i] = score
        selected[i] = sel
    if not seen.all():
        raise DatasetError(f"{path}: expected {V * n} rows, got {int(seen.sum())}")
    return ResultsFile(seq, fp, boxes, scores, selected)


# --- synthetic scenes --------------------------------------------------------

@dataclass
class Occlusion:
    view: int
    start: int
    end: int  # inclusive
    kind: str = "full"  # or "partial"


@dataclass
class SynthConfig:
    """Scene description. Positions are world coordinates, which coincide with
    view 0's pixel grid when its transform is the identity.

    ``view_transforms`` holds one world->view affine ``[a, b, tx, c, d, ty]``
    per view; ``noise`` and ``illumination_drift`` may be scalars or per-view.
    """

    group_id: str = "synth"
    views: int = 2
    frames: int = 100
    width: int = 640
    height: int = 360
    target_size: tuple[float, float] = (40.0, 40.0)
    start: tuple[float, float] | None = None  # target center, default frame center
    velocity: tuple[float, float] = (0.0, 0.0)
    jumps: list = field(default_factory=list)  # [(frame, dx, dy)]
    view_transforms: list | None = None
    occlusions: list = field(default_factory=list)
    illumination_drift: float | list = 0.0  # intensity gain reached at the last frame, minus 1
    noise: float | list = 2.0
    seed: int = 0

    def __post_init__(self):
        self.target_size = tuple(float(v) for v in self.target_size)
        self.velocity = tuple(float(v) for v in self.velocity)
        if self.start is not None:
            self.start = tuple(float(v) for v in self.start)
        self.jumps = [tuple(j) for j in self.jumps]
        self.occlusions = [o if isinstance(o, Occlusion) else Occlusion(**o) if isinstance(o, dict) else Occlusion(*o)
                           for o in self.occlusions]
        if self.views < 1 or self.frames < 1 or self.width < 1 or self.height < 1:
            raise ParameterError("views, frames, width and height must be positive")
        if min(self.target_size) <= 0:
            raise ParameterError("target_size must be positive")
        if self.view_transforms is not None and len(self.view_transforms) != self.views:
            raise ParameterError(f"{len(self.view_transforms)} view transforms for {self.views} views")
        for o in self.occlusions:
            if not (0 <= o.view < self.views):
                raise ParameterError(f"occlusion view {o.view} out of range")
            if not (0 <= o.start <= o.end < self.frames):
                raise ParameterError(f"occlusion window ({o.start}, {o.end}) outside 0..{self.frames - 1}")
            if o.kind not in ("full", "partial"):
                raise ParameterError(f"occlusion kind must be 'full' or 'partial', got {o.kind!r}")
        for j in self.jumps:
            if len(j) != 3 or not (0 < j[0] < self.frames):
                raise ParameterError(f"jump {j} must be (frame in 1..frames-1, dx, dy)")

    def per_view(self, value) -> list[float]:
        if isinstance(value, (int, float)):
            return [float(value)] * self.views
        if len(value) != self.views:
            raise ParameterError(f"expected {self.views} per-view values, got {len(value)}")
        return [float(v) for v in value]

    def transforms(self) -> list[np.ndarray]:
        if self.view_transforms is None:
            return [np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]) for _ in range(self.views)]
        return [np.asarray(t, dtype=float).reshape(2, 3) for t in self.view_transforms]

    @classmethod
    def from_dict(cls, data: dict) -> SynthConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ParameterError(f"unknown synth config keys: {unknown}")
        return cls(**data)

    @classmethod
    def from_toml(cls, path) -> SynthConfig:
        path = Path(path)
        try:
            data = tomli.loads(path.read_text())
        except tomli.TOMLDecodeError as exc:
            raise ParameterError(f"{path}: {exc}") from None
        return cls.from_dict(data)


FIXTURE_DIR = Path(__file__).with_name("fixtures")
FIXTURES = ("static", "linear_motion", "jump", "occlusion_one_view", "illumination_drift")


def fixture_config(name: str, seed: int | None = None) -> SynthConfig:
    """Named scenario from the bundled fixture configs, optionally reseeded."""
    path = FIXTURE_DIR / f"{name}.toml"
    if name not in FIXTURES or not path.is_file():
        raise ParameterError(f"unknown fixture {name!r}; known: {list(FIXTURES)}")
    cfg = SynthConfig.from_toml(path)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed, group_id=f"{cfg.group_id}_s{seed}")
    return cfg


def target_centers(cfg: SynthConfig) -> np.ndarray:
    """World-space target centers per frame: constant velocity, reflected at the
    frame border, plus instantaneous jumps."""
    w, h = cfg.target_size
    lo = np.array([w / 2, h / 2])
    hi = np.array([cfg.width - w / 2, cfg.height - h / 2])
    pos = np.array(cfg.start if cfg.start is not None else (cfg.width / 2, cfg.height / 2), dtype=float)
    vel = np.array(cfg.velocity, dtype=float)
    jumps = {}
    for f, dx, dy in cfg.jumps:
        jumps[int(f)] = jumps.get(int(f), np.zeros(2)) + (dx, dy)
    out = np.empty((cfg.frames, 2))
    for t in range(cfg.frames):
        if t > 0:
            pos = pos + vel
            for a in range(2):
                if hi[a] > lo[a]:
                    if pos[a] < lo[a]:
                        pos[a] = 2 * lo[a] - pos[a]
                        vel[a] = -vel[a]
                    elif pos[a] > hi[a]:
                        pos[a] = 2 * hi[a] - pos[a]
                        vel[a] = -vel[a]
            if t in jumps:
                pos = pos + jumps[t]
        out[t] = pos
    return out


def _texture(rng: np.random.Generator, shape, sigma: float, lo: float, hi: float) -> np.ndarray:
    noise = rng.standard_normal(shape)
    smooth = ndimage.gaussian_filter(noise, sigma=(sigma, sigma, 0), mode="wrap")
    smooth -= smooth.min()
    smooth /= max(smooth.max(), 1e-12)
    return lo + (hi - lo) * smooth


def _affine_bbox(A: np.ndarray, rect) -> tuple[float, float, float, float]:
    x0, y0, x1, y1 = rect
    corners = np.array([[x0, y0, 1], [x1, y0, 1], [x0, y1, 1], [x1, y1, 1]], dtype=float)
    p = corners @ A.T
    xs, ys = p[:, 0], p[:, 1]
    return xs.min(), ys.min(), xs.max() - xs.min(), ys.max() - ys.min()


@dataclass
class _Scene:
    cfg: SynthConfig
    background: np.ndarray  # world texture (H + 2m, W + 2m, 3)
    margin: int
    target: np.ndarray  # small texture (k, k, 3)


def _make_scene(cfg: SynthConfig) -> _Scene:
    rng = np.random.default_rng(cfg.seed)
    margin = 256
    bg = _texture(rng, (cfg.height + 2 * margin, cfg.width + 2 * margin, 3), 6.0, 50.0, 200.0)
    target = rng.uniform(0.0, 255.0, size=(6, 6, 3))
    return _Scene(cfg, bg, margin, target)


def _sample(img: np.ndarray, ys: np.ndarray, xs: np.ndarray, mode: str) -> np.ndarray:
    return np.stack([ndimage.map_coordinates(img[..., c], [ys, xs], order=1, mode=mode)
                     for c in range(img.shape[2])], axis=-1)


def _render_background(scene: _Scene, A: np.ndarray) -> np.ndarray:
    cfg = scene.cfg
    Ainv = np.linalg.inv(np.vstack([A, [0, 0, 1]]))[:2]
    yy, xx = np.mgrid[0:cfg.height, 0:cfg.width].astype(float)
    # pixel centers at +0.5 in continuous coordinates
    wx = Ainv[0, 0] * (xx + 0.5) + Ainv[0, 1] * (yy + 0.5) + Ainv[0, 2]
    wy = Ainv[1, 0] * (xx + 0.5) + Ainv[1, 1] * (yy + 0.5) + Ainv[1, 2]
    return _sample(scene.background, wy - 0.5 + scene.margin, wx - 0.5 + scene.margin, "mirror")


def _draw_target(img: np.ndarray, scene: _Scene, A: np.ndarray, rect, visible_fraction: float) -> None:
    cfg = scene.cfg
    x, y, w, h = _affine_bbox(A, rect)
    c0, c1 = max(int(math.floor(x)), 0), min(int(math.ceil(x + w)), cfg.width)
    r0, r1 = max(int(math.floor(y)), 0), min(int(math.ceil(y + h)), cfg.height)
    if c1 <= c0 or r1 <= r0:
        return
    Ainv = np.linalg.inv(np.vstack([A, [0, 0, 1]]))[:2]
    yy, xx = np.mgrid[r0:r1, c0:c1].astype(float) + 0.5
    wx = Ainv[0, 0] * xx + Ainv[0, 1] * yy + Ainv[0, 2]
    wy = Ainv[1, 0] * xx + Ainv[1, 1] * yy + Ainv[1, 2]
    u = (wx - rect[0]) / (rect[2] - rect[0])
    v = (wy - rect[1]) / (rect[3] - rect[1])
    inside = (u >= 0) & (u < visible_fraction) & (v >= 0) & (v < 1)
    if not inside.any():
        return
    k = scene.target.shape[0]
    # nearest-cell lookup keeps the pattern blocky and high-contrast
    iu = np.clip((u[inside] * k).astype(int), 0, k - 1)
    iv = np.clip((v[inside] * k).astype(int), 0, k - 1)
    patch = img[r0:r1, c0:c1]
    patch[inside] = scene.target[iv, iu]


def render_group(cfg: SynthConfig) -> GroupSequence:
    """Render the scene in memory; ground truth is the exact projected target box."""
    scene = _make_scene(cfg)
    centers = target_centers(cfg)
    tw, th = cfg.target_size
    transforms = cfg.transforms()
    noise = cfg.per_view(cfg.noise)
    drift = cfg.per_view(cfg.illumination_drift)
    views = []
    any_ov = False
    tiny_frames = 0
    for k, A in enumerate(transforms):
        base = _render_background(scene, A)
        occ = np.zeros(cfg.frames, dtype=int)
        for o in cfg.occlusions:
            if o.view == k:
                occ[o.start:o.end + 1] = FULL_OCCLUSION if o.kind == "full" else PARTIAL_OCCLUSION
        frames, gt = [], []
        for t in range(cfg.frames):
            cx, cy = centers[t]
            rect = (cx - tw / 2, cy - th / 2, cx + tw / 2, cy + th / 2)
            img = base.copy()
            if occ[t] != FULL_OCCLUSION:
                _draw_target(img, scene, A, rect, 0.5 if occ[t] == PARTIAL_OCCLUSION else 1.0)
            gain = 1.0 + drift[k] * (t / max(cfg.frames - 1, 1))
            img = img * gain
            if noise[k] > 0:
                img = img + np.random.default_rng([cfg.seed, k, t]).normal(0.0, noise[k], img.shape)
            frames.append(np.clip(np.rint(img), 0, 255).astype(np.uint8))
            bx, by, bw, bh = _affine_bbox(A, rect)
            if bx + bw <= 0 or by + bh <= 0 or bx >= cfg.width or by >= cfg.height:
                gt.append([np.nan] * 4)
                any_ov = True
            else:
                gt.append([bx, by, bw, bh])
                if bw * bh < _TINY_TARGET_PIXELS:
                    tiny_frames += 1
        views.append(ViewSequence(f"drone{k + 1}", FrameList(arrays=frames), np.array(gt), occ))
    identity = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    attrs = AttributeSet({
        "DAY": 1,
        "POC": any(o.kind == "partial" for o in cfg.occlusions),
        "FOC": any(o.kind == "full" for o in cfg.occlusions),
        "OV": any_ov,
        "VC": any(not np.allclose(A[:, :2], identity[:, :2]) for A in transforms),
        "IV": any(d != 0 for d in drift),
        "LR": tiny_frames > _LR_MIN_FRAMES,
    })
    return GroupSequence(cfg.group_id, views, attrs)


def synth_group(cfg: SynthConfig, out_dir=None) -> GroupSequence:
    """Render ``cfg``; with ``out_dir`` also write it in the dataset layout."""
    group = render_group(cfg)
    if out_dir is not None:
        save_group(group, out_dir)
    return group
