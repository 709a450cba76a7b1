"""Command-line harness: ``asnet track``, ``asnet eval`` and ``asnet synth``.

Exit codes: 0 success, 1 some groups failed, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import dataclasses
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import ABLATION_PRESETS, TrackerConfig, config_from_dict, load_config
from .dataio import (FIXTURES, GroupSequence, SynthConfig, fixture_config, list_groups, load_group, load_results,
                     save_results, synth_group)
from .errors import DatasetError, ParameterError, TrackingError
from .eval import afs, attribute_breakdown, frame_scores, ifs, precision_curve, selection_weights, success_curve
from .fusion import run_group

log = logging.getLogger("asnet")

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2
METRICS = ("success", "precision", "both")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    dataset: Path
    groups: tuple[str, ...]
    tracker: TrackerConfig
    out: Path
    workers: int = 1
    seed: int = 0


def _selected_groups(dataset: Path, wanted: str | None) -> list[str]:
    available = list_groups(dataset)
    if not wanted:
        return available
    names = [g.strip() for g in wanted.split(",") if g.strip()]
    missing = [g for g in names if g not in available]
    if missing:
        raise UsageError(f"groups not found under {dataset}: {', '.join(missing)}")
    return names


def tracker_config(args) -> TrackerConfig:
    cfg = load_config(args.config) if args.config else TrackerConfig()
    if args.preset:
        rd, ts, vf = ABLATION_PRESETS[args.preset]
        cfg = cfg.with_ablation(redetect=rd, sharing=ts, view_fusion=vf)
    if args.no_redetect:
        cfg = cfg.with_ablation(redetect=False)
    if args.no_sharing:
        cfg = cfg.with_ablation(sharing=False)
    if args.no_view_fusion:
        cfg = cfg.with_ablation(view_fusion=False)
    return cfg


# --- track -------------------------------------------------------------------

def track_group(group: GroupSequence, cfg: TrackerConfig, out_path: Path) -> float:
    """Track one group, write its results file and return the tracking FPS."""
    init = [v.groundtruth[0] for v in group.views]
    if any(np.isnan(b).any() for b in init):
        raise DatasetError(f"group {group.group_id}: target not annotated in the first frame of every view")
    run = run_group([v.frames for v in group.views], init, cfg)
    save_results(run.trajectories, run.selected if cfg.view_fusion else None, out_path,
                 group.group_id, cfg.fingerprint())
    return run.fps


def _track_worker(group_dir: str, cfg_dict: dict, out_path: str) -> tuple[str, float | None, str | None]:
    name = Path(group_dir).name
    try:
        fps = track_group(load_group(group_dir), config_from_dict(cfg_dict), Path(out_path))
        return name, fps, None
    except (TrackingError, OSError, ValueError, FloatingPointError) as exc:
        return name, None, f"{type(exc).__name__}: {exc}"


def cmd_track(run: RunConfig) -> int:
    run.out.mkdir(parents=True, exist_ok=True)
    jobs = [(str(run.dataset / g), run.tracker.to_dict(), str(run.out / f"{g}.txt")) for g in run.groups]
    if run.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=run.workers) as pool:
            outcomes = list(pool.map(_track_worker, *zip(*jobs)))
    else:
        outcomes = [_track_worker(*job) for job in jobs]
    failed = 0
    timing = {}
    for name, fps, err in outcomes:
        if err is None:
            log.info("group %s: %.1f FPS", name, fps)
            timing[name] = fps
        else:
            failed += 1
            log.error("group %s failed: %s", name, err)
    # FPS depends on the machine, so it stays out of the deterministic results files
    (run.out / "timing.json").write_text(json.dumps(
        {"config": run.tracker.to_dict(), "fingerprint": run.tracker.fingerprint(), "seed": run.seed,
         "fps": timing}, indent=2, sort_keys=True) + "\n")
    log.info("%d/%d groups tracked", len(jobs) - failed, len(jobs))
    return EXIT_PARTIAL if failed else EXIT_OK


# --- eval --------------------------------------------------------------------

def evaluate_group(group: GroupSequence, results) -> tuple[dict, list[tuple]]:
    """Metrics for one group plus ``(view, kind, threshold, value)`` curve rows."""
    if results.n_views != group.n_views or results.n_frames != group.n_frames:
        raise DatasetError(f"group {group.group_id}: results are {results.n_views}x{results.n_frames}, "
                           f"ground truth {group.n_views}x{group.n_frames}")
    rows, succ, prec = [], [], []
    per_view = {"success": [], "precision": []}
    for k, view in enumerate(group.views):
        s = success_curve(results.boxes[k], view.groundtruth)
        p = precision_curve(results.boxes[k], view.groundtruth)
        succ.append(s.auc)
        prec.append(p.at(20.0))
        rows += [(k, "success", float(t), float(v)) for t, v in zip(s.thresholds, s.values)]
        rows += [(k, "precision", float(t), float(v)) for t, v in zip(p.thresholds, p.values)]
        for mode in per_view:
            per_view[mode].append(frame_scores(results.boxes[k], view.groundtruth, mode))
    metrics = {"success_auc": float(np.mean(succ)), "precision_20px": float(np.mean(prec)),
               "view_success_auc": succ, "view_precision_20px": prec}
    for mode in per_view:
        scores = np.array(per_view[mode])
        metrics[f"ifs_{mode}"] = ifs(scores)
        sel = results.selected
        metrics[f"afs_{mode}"] = (afs(scores, selection_weights(sel, group.n_views))
                                  if results.has_selection else None)
    return _finite_or_none(metrics), rows


def _finite_or_none(obj):
    """NaN is not valid JSON; undefined metrics are written as null."""
    if isinstance(obj, dict):
        return {k: _finite_or_none(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite_or_none(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _mean(values) -> float | None:
    vals = [v for v in values if v is not None and np.isfinite(v)]
    return float(np.mean(vals)) if vals else None


def cmd_eval(dataset: Path, results_dir: Path, groups: list[str], out: Path, metric: str) -> int:
    out.mkdir(parents=True, exist_ok=True)
    per_group, missing, pairs, curve_rows = {}, [], [], []
    for g in groups:
        path = results_dir / f"{g}.txt"
        if not path.is_file():
            missing.append(g)
            continue
        try:
            group = load_group(dataset / g)
            metrics, rows = evaluate_group(group, load_results(path))
        except DatasetError as exc:
            log.error("group %s skipped: %s", g, exc)
            missing.append(g)
            continue
        per_group[g] = metrics
        pairs.append((group.attributes, metrics))
        curve_rows += [(g, *r) for r in rows]
    if missing:
        log.error("no usable results for: %s", ", ".join(missing))

    kinds = ("success", "precision") if metric == "both" else (metric,)
    with open(out / "curves.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "view", "metric", "threshold", "value"])
        writer.writerows(r for r in curve_rows if r[2] in kinds)

    keys = ["success_auc", "precision_20px", "afs_success", "afs_precision", "ifs_success", "ifs_precision"]
    summary = {k: _mean(m[k] for m in per_group.values()) for k in keys}
    flat = [(a, {k: m[k] for k in keys}) for a, m in pairs]
    summary["per_attribute"] = attribute_breakdown(flat)
    summary["per_group"] = per_group
    summary["missing"] = missing
    (out / "summary.json").write_text(json.dumps(_finite_or_none(summary), indent=2, sort_keys=True,
                                                 allow_nan=False) + "\n")

    cols = [k for k in keys if metric == "both" or metric in k]
    print("group".ljust(24) + "".join(c.rjust(16) for c in cols))
    for g, m in per_group.items():
        print(g.ljust(24) + "".join(_fmt(m[c]).rjust(16) for c in cols))
    print("mean".ljust(24) + "".join(_fmt(summary[c]).rjust(16) for c in cols))
    return EXIT_PARTIAL if missing else EXIT_OK


def _fmt(v) -> str:
    return "-" if v is None else f"{v:.3f}"


# --- synth -------------------------------------------------------------------

def cmd_synth(fixtures: list[str], config_paths: list[Path], out: Path, seed: int | None) -> int:
    configs = [fixture_config(name, seed) for name in fixtures]
    for path in config_paths:
        cfg = SynthConfig.from_toml(path)
        if seed is not None:
            cfg = dataclasses.replace(cfg, seed=seed)
        configs.append(cfg)
    for cfg in configs:
        group = synth_group(cfg, out)
        log.info("wrote %s: %d views x %d frames", out / group.group_id, group.n_views, group.n_frames)
    return EXIT_OK


# --- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="asnet", description="Multi-view single-object tracking harness.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("track", help="track every group of a dataset")
    t.add_argument("--dataset", type=Path, required=True)
    t.add_argument("--groups", help="comma-separated group ids (default: all)")
    t.add_argument("--config", type=Path, help="tracker config (TOML)")
    t.add_argument("--preset", choices=sorted(ABLATION_PRESETS), help="component ablation row")
    t.add_argument("--no-redetect", action="store_true")
    t.add_argument("--no-sharing", action="store_true")
    t.add_argument("--no-view-fusion", action="store_true")
    t.add_argument("--out", type=Path, required=True)
    t.add_argument("--workers", type=int, default=1)
    t.add_argument("--seed", type=int, default=0, help="recorded with the run; tracking itself is deterministic")

    e = sub.add_parser("eval", help="score results files against ground truth")
    e.add_argument("--dataset", type=Path, required=True)
    e.add_argument("--results", type=Path, required=True)
    e.add_argument("--groups")
    e.add_argument("--out", type=Path, required=True)
    e.add_argument("--metric", choices=METRICS, default="both")

    s = sub.add_parser("synth", help="render synthetic groups")
    s.add_argument("--fixture", action="append", default=[], choices=list(FIXTURES) + ["all"])
    s.add_argument("--config", type=Path, action="append", default=[], help="synthetic scene config (TOML)")
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--seed", type=int)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "track":
            if args.workers < 1:
                raise UsageError("--workers must be >= 1")
            run = RunConfig(args.dataset, tuple(_selected_groups(args.dataset, args.groups)),
                            tracker_config(args), args.out, args.workers, args.seed)
            return cmd_track(run)
        if args.command == "eval":
            return cmd_eval(args.dataset, args.results, _selected_groups(args.dataset, args.groups),
                            args.out, args.metric)
        fixtures = list(FIXTURES) if "all" in args.fixture else args.fixture
        if not fixtures and not args.config:
            raise UsageError("synth needs --fixture or --config")
        return cmd_synth(fixtures, args.config, args.out, args.seed)
    except (UsageError, ParameterError, DatasetError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
