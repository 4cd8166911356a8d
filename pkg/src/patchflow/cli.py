"""Command-line interface.

Subcommands: ``estimate`` (flow between two images), ``bench`` (correlation
strategy cost table), ``synth`` (synthetic pair + ground truth), ``eval``
(EPE / F1-all), ``viz`` (color-wheel rendering).

Exit codes: 0 success, 1 usage/parameter errors, 2 I/O errors,
3 malformed file formats. All commands are deterministic for a fixed
``--seed-rng``; ``--threads`` (or the PATCHFLOW_THREADS environment
variable) caps worker threads and never changes results.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from . import __version__
from .correlation import cost_report, global_correlation, local_correlation
from .engine import (
    EngineConfig,
    OpCounters,
    RNG_ALGORITHM,
    pm_iterate,
    random_init,
)
from .flowio import (
    FlowFormatError,
    flow_to_color,
    load_image,
    read_flo_file,
    read_kitti_png,
    save_image_gray,
    save_image_rgb,
    write_flo_file,
    write_kitti_png,
)
from .metrics import evaluate
from .pyramid import adaptive_levels, extract_features, run_pyramid
from .synth import rotation_pair, translation_pair, two_layer_pair
from .tensor_core import DimensionError, FlowField, ParameterError, SeedSet

EXIT_USAGE = 1
EXIT_IO = 2
EXIT_FORMAT = 3

SEED_PRESETS = {
    "diag4": ((-1, -1), (1, -1), (-1, 1), (1, 1)),
    "plus4": ((-1, 0), (1, 0), (0, -1), (0, 1)),
    "8": ((-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)),
}


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="patchflow", description=__doc__)
    p.add_argument("--version", action="version", version=f"patchflow {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate optical flow between two images")
    est.add_argument("img1")
    est.add_argument("img2")
    est.add_argument("-o", "--output", required=True, help="output flow file")
    est.add_argument("--format", choices=("flo", "kitti"), default="flo")
    est.add_argument("--iters", type=int, default=6)
    est.add_argument("--radius", type=int, default=2)
    est.add_argument("--seeds", choices=sorted(SEED_PRESETS), default="diag4")
    est.add_argument("--mode", choices=("inverse-exact", "inverse-approx", "propagate"),
                     default="inverse-approx")
    est.add_argument("--schedule", default="4,1",
                     help="comma-separated downscale factors, coarse to fine")
    est.add_argument("--init", help=".flo file used as warm-start initialization")
    est.add_argument("--adaptive", action="store_true",
                     help="derive the schedule from the --init flow magnitude")
    est.add_argument("--search", choices=("flow2d", "stereo1d"), default="flow2d")
    est.add_argument("--seed-rng", type=int, default=0)
    est.add_argument("--d-max", type=float, default=8.0,
                     help="random-init displacement bound at the coarsest level")
    est.add_argument("--median", action="store_true", help="3x3 median filter per iteration")
    est.add_argument("--random-search", action="store_true",
                     help="traditional random search instead of local search")
    est.add_argument("--no-normalize", action="store_true",
                     help="raw dot products instead of cosine similarity")
    est.add_argument("--viz", help="also write a color-wheel PNG here")
    est.add_argument("--trace", help="write per-half-round flows as PREFIX_iterNN.flo")
    est.add_argument("--manifest", help="run manifest path (default: OUTPUT.manifest.json)")
    est.add_argument("--threads", type=int, default=None)

    ben = sub.add_parser("bench", help="correlation strategy cost table")
    ben.add_argument("--sizes", default="64x64", help="comma-separated HxW list")
    ben.add_argument("--strategies", default="local,global,patchmatch")
    ben.add_argument("--d-max", type=int, default=4)
    ben.add_argument("--n-seeds", type=int, default=4)
    ben.add_argument("--radius", type=int, default=2)
    ben.add_argument("--channels", type=int, default=8)
    ben.add_argument("--seed-rng", type=int, default=0)
    ben.add_argument("--threads", type=int, default=None)

    syn = sub.add_parser("synth", help="synthetic image pair with ground-truth flow")
    syn.add_argument("outdir")
    syn.add_argument("--size", default="128x128", help="HxW")
    syn.add_argument("--motion", default="translate:3,-2",
                     help="translate:tx,ty | rotate:deg | "
                          "twolayer:bx,by,fx,fy,x0,y0,w,h")
    syn.add_argument("--seed-rng", type=int, default=0)

    ev = sub.add_parser("eval", help="EPE / F1-all of an estimate against ground truth")
    ev.add_argument("est")
    ev.add_argument("gt")

    viz = sub.add_parser("viz", help="render a flow file with the color wheel")
    viz.add_argument("flow")
    viz.add_argument("output")
    viz.add_argument("--max-norm", type=float, default=None)
    return p


def _read_flow_any(path) -> FlowField:
    if str(path).lower().endswith(".png"):
        with open(path, "rb") as fh:
            return read_kitti_png(fh.read())
    return read_flo_file(path)


def _parse_size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(t) for t in text.lower().split("x"))
    except ValueError as exc:
        raise UsageError(f"bad size {text!r}, expected HxW") from exc
    if h < 1 or w < 1:
        raise UsageError("size must be positive")
    return h, w


def _resolve_threads(arg) -> int:
    if arg is not None:
        return max(1, int(arg))
    env = os.environ.get("PATCHFLOW_THREADS")
    return max(1, int(env)) if env else 1


def _cmd_estimate(args) -> int:
    img1 = load_image(args.img1)
    img2 = load_image(args.img2)
    if img1.shape != img2.shape:
        raise DimensionError(f"image sizes differ: {img1.shape} vs {img2.shape}")
    init = read_flo_file(args.init) if args.init else None
    if args.adaptive:
        if init is None:
            raise UsageError("--adaptive requires --init")
        schedule = adaptive_levels(init, finest_factor=1,
                                   radius=args.radius, iterations=args.iters)
    else:
        try:
            schedule = tuple(int(t) for t in args.schedule.split(","))
        except ValueError as exc:
            raise UsageError(f"bad --schedule {args.schedule!r}") from exc
    cfg = EngineConfig(
        seeds=SeedSet(SEED_PRESETS[args.seeds]),
        radius=args.radius,
        iterations=args.iters,
        mode=args.mode,
        search=args.search,
        median_filter=args.median,
        random_search=args.random_search,
        d_max=args.d_max,
        rng_seed=args.seed_rng,
        normalize=not args.no_normalize,
        schedule=schedule,
    )
    t0 = time.perf_counter()
    flow, diag = run_pyramid(img1, img2, cfg, init=init,
                             collect_traces=args.trace is not None)
    wall_ms = (time.perf_counter() - t0) * 1e3

    if args.format == "kitti":
        with open(args.output, "wb") as fh:
            fh.write(write_kitti_png(flow))
    else:
        write_flo_file(flow, args.output)
    if args.viz:
        save_image_rgb(args.viz, flow_to_color(flow))
    if args.trace:
        idx = 0
        for trace in diag.get("traces", []):
            for snap in trace:
                write_flo_file(snap.flow, f"{args.trace}_iter{idx:02d}.flo")
                idx += 1
        diag.pop("traces", None)

    totals = OpCounters()
    for lvl in diag["levels"]:
        totals.add(OpCounters(**lvl["counters"]))
    manifest = {
        "version": __version__,
        "rng": {"seed": args.seed_rng, "algorithm": RNG_ALGORITHM},
        "threads": _resolve_threads(args.threads),
        "config": {**asdict(cfg), "seeds": list(cfg.seeds.offsets)},
        "wall_ms": wall_ms,
        "levels": diag["levels"],
        "op_counters_total": totals.as_dict(),
        "trace_length_per_level": [lvl["trace_length"] for lvl in diag["levels"]],
        "peak_candidate_entries": max(lvl["peak_candidate_entries"]
                                      for lvl in diag["levels"]),
        "feature_channels": diag["feature_channels"],
    }
    manifest_path = args.manifest or (args.output + ".manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2)
    print(f"wrote {args.output} ({flow.width}x{flow.height}), manifest {manifest_path}")
    return 0


def _bench_row(strategy, h, w, args) -> tuple[dict, str]:
    rng = np.random.default_rng(args.seed_rng)
    f1 = rng.standard_normal((h, w, args.channels)).astype(np.float32)
    f2 = rng.standard_normal((h, w, args.channels)).astype(np.float32)
    budget = 1 << 30  # measure only volumes under 1 GiB
    if strategy == "local":
        rep = cost_report("local", h, w, d_max=args.d_max)
        params = f"d_max={args.d_max}"
        if rep.entries * 4 <= budget:
            t0 = time.perf_counter()
            vol = local_correlation(f1, f2, args.d_max)
            ms = (time.perf_counter() - t0) * 1e3
            return rep.__dict__, f"local,{h},{w},{params},{rep.entries},{vol.scores.nbytes},{ms:.3f}"
        return rep.__dict__, f"local,{h},{w},{params},{rep.entries},{rep.entries * 4},"
    if strategy == "global":
        rep = cost_report("global", h, w)
        params = "levels=1"
        if rep.entries * 4 <= budget:
            t0 = time.perf_counter()
            pyr = global_correlation(f1, f2, num_levels=1)
            ms = (time.perf_counter() - t0) * 1e3
            return rep.__dict__, f"global,{h},{w},{params},{rep.entries},{pyr.levels[0].nbytes},{ms:.3f}"
        return rep.__dict__, f"global,{h},{w},{params},{rep.entries},{rep.entries * 4},"
    if strategy == "patchmatch":
        rep = cost_report("patchmatch", h, w, n_seeds=args.n_seeds, radius=args.radius)
        params = f"n={args.n_seeds};r={args.radius}"
        cfg = EngineConfig(radius=args.radius, iterations=1,
                           rng_seed=args.seed_rng, schedule=(1,))
        init = random_init(h, w, cfg.d_max, args.seed_rng)
        t0 = time.perf_counter()
        pm_iterate(f1, f2, init, cfg)
        ms = (time.perf_counter() - t0) * 1e3
        # candidate scores are float32-equivalent entries; report their bytes
        return rep.__dict__, f"patchmatch,{h},{w},{params},{rep.entries},{rep.entries * 4},{ms:.3f}"
    raise UsageError(f"unknown strategy {strategy!r}")


def _cmd_bench(args) -> int:
    sizes = [_parse_size(t) for t in args.sizes.split(",")]
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    print("strategy,h,w,params,entries,bytes,ms")
    for h, w in sizes:
        for strategy in strategies:
            _, row = _bench_row(strategy, h, w, args)
            print(row)
    return 0


def _cmd_synth(args) -> int:
    h, w = _parse_size(args.size)
    kind, _, spec = args.motion.partition(":")
    try:
        if kind == "translate":
            tx, ty = (float(t) for t in spec.split(","))
            img1, img2, gt = translation_pair(h, w, tx, ty, args.seed_rng)
        elif kind == "rotate":
            img1, img2, gt = rotation_pair(h, w, float(spec), args.seed_rng)
        elif kind == "twolayer":
            vals = [float(t) for t in spec.split(",")]
            if len(vals) != 8:
                raise ValueError("twolayer needs bx,by,fx,fy,x0,y0,w,h")
            img1, img2, gt = two_layer_pair(
                h, w, (vals[0], vals[1]), (vals[2], vals[3]),
                (int(vals[4]), int(vals[5]), int(vals[6]), int(vals[7])),
                args.seed_rng)
        else:
            raise ValueError(f"unknown motion kind {kind!r}")
    except (ValueError, ParameterError) as exc:
        raise UsageError(f"bad --motion {args.motion!r}: {exc}") from exc
    os.makedirs(args.outdir, exist_ok=True)
    save_image_gray(os.path.join(args.outdir, "img1.png"), img1)
    save_image_gray(os.path.join(args.outdir, "img2.png"), img2)
    write_flo_file(gt, os.path.join(args.outdir, "gt.flo"))
    print(f"wrote img1.png img2.png gt.flo to {args.outdir}")
    return 0


def _cmd_eval(args) -> int:
    est = _read_flow_any(args.est)
    gt = _read_flow_any(args.gt)
    print(evaluate(est, gt).to_text())
    return 0


def _cmd_viz(args) -> int:
    flow = _read_flow_any(args.flow)
    save_image_rgb(args.output, flow_to_color(flow, max_norm=args.max_norm))
    print(f"wrote {args.output}")
    return 0


_COMMANDS = {
    "estimate": _cmd_estimate,
    "bench": _cmd_bench,
    "synth": _cmd_synth,
    "eval": _cmd_eval,
    "viz": _cmd_viz,
}


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParameterError, DimensionError, ValueError) as exc:
        if isinstance(exc, FlowFormatError):
            print(f"format error: {exc}", file=sys.stderr)
            return EXIT_FORMAT
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
