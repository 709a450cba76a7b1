"""Run every component-ablation preset over the named synthetic fixtures.

Prints one row per preset with mean success AUC (per-view OPE), AFS and IFS,
and optionally writes the table as CSV.

    python3 scripts/ablation_matrix.py --seeds 1 2 3 --csv ablation.csv
"""
import argparse
import csv
import sys

import numpy as np

from asnet.config import ABLATION_PRESETS, TrackerConfig
from asnet.dataio import FIXTURES, fixture_config, render_group
from asnet.eval import afs, frame_scores, ifs, selection_weights, success_curve
from asnet.fusion import run_group


def evaluate(cfg, group):
    run = run_group([v.frames for v in group.views], [v.groundtruth[0] for v in group.views], cfg)
    ope = [success_curve(t, v.groundtruth).auc for t, v in zip(run.trajectories, group.views)]
    scores = np.array([frame_scores(t, v.groundtruth) for t, v in zip(run.trajectories, group.views)])
    fused = afs(scores, selection_weights(run.selected, group.n_views)) if cfg.view_fusion else np.nan
    return float(np.mean(ope)), fused, ifs(scores), run.fps


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--fixtures", nargs="+", default=list(FIXTURES), choices=FIXTURES)
    p.add_argument("--seeds", nargs="+", type=int, default=[1, 2, 3, 4, 5])
    p.add_argument("--presets", nargs="+", default=list(ABLATION_PRESETS), choices=list(ABLATION_PRESETS))
    p.add_argument("--csv", help="write the table here")
    args = p.parse_args(argv)

    groups = [render_group(fixture_config(f, s)) for f in args.fixtures for s in args.seeds]
    rows = []
    header = ["preset", "redetect", "sharing", "view_fusion", "ope_success", "afs_success", "ifs_success", "fps"]
    print(f"{'preset':20s}{'rd':>4s}{'ts':>4s}{'vf':>4s}{'OPE':>8s}{'AFS':>8s}{'IFS':>8s}{'FPS':>7s}")
    for name in args.presets:
        rd, ts, vf = ABLATION_PRESETS[name]
        cfg = TrackerConfig().with_ablation(redetect=rd, sharing=ts, view_fusion=vf)
        res = np.array([evaluate(cfg, g) for g in groups])
        ope, fused, ideal = res[:, 0].mean(), np.nanmean(res[:, 1]) if vf else np.nan, res[:, 2].mean()
        fps = len(groups) / np.sum(1.0 / res[:, 3])
        rows.append([name, int(rd), int(ts), int(vf), ope, fused, ideal, fps])
        print(f"{name:20s}{int(rd):4d}{int(ts):4d}{int(vf):4d}{ope:8.3f}{fused:8.3f}{ideal:8.3f}{fps:7.1f}",
              flush=True)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
