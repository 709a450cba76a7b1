"""Two-view tracking throughput on 640x360 synthetic input.

FPS is frames over wall-clock time of the tracking loop only; rendering is
excluded. Reports per-seed and pooled FPS for the default configuration.

    python3 scripts/fps_benchmark.py --seeds 1 2 3 --views 2
"""
import argparse
import sys

from asnet.config import ABLATION_PRESETS, TrackerConfig
from asnet.dataio import SynthConfig, render_group
from asnet.fusion import run_group


def scene(seed, views, frames):
    transforms = [[1, 0, 0, 0, 1, 0], [0.9, 0, 40, 0, 0.9, 20], [1.1, 0, -30, 0, 1.1, -20]]
    return SynthConfig(group_id=f"fps_s{seed}", views=views, frames=frames, width=640, height=360,
                       target_size=(40, 40), start=(240, 160), velocity=(1.0, 0.5),
                       view_transforms=transforms[:views], seed=seed)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", nargs="+", type=int, default=[1, 2, 3])
    p.add_argument("--views", type=int, default=2, choices=[1, 2, 3])
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--preset", default="asnet", choices=list(ABLATION_PRESETS))
    args = p.parse_args(argv)
    rd, ts, vf = ABLATION_PRESETS[args.preset]
    cfg = TrackerConfig().with_ablation(redetect=rd, sharing=ts, view_fusion=vf)
    frames = seconds = 0.0
    for seed in args.seeds:
        g = render_group(scene(seed, args.views, args.frames))
        run = run_group([v.frames for v in g.views], [v.groundtruth[0] for v in g.views], cfg)
        frames += len(run.selected)
        seconds += run.seconds
        print(f"seed {seed}: {run.fps:.1f} FPS", flush=True)
    print(f"pooled: {frames / seconds:.1f} FPS ({args.views} views, {args.preset}, 640x360)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
