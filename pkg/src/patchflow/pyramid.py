"""Classical feature extraction and the multi-scale estimation schedule.

Features replace a learned encoder with hand-crafted descriptors: a 7x7
census transform (48 comparison channels coded +/-1) and/or image gradients
(dx, dy, magnitude). Features are extracted once at full resolution and
average-pooled down to each pyramid level, mirroring how the engine's
coarse levels see pooled versions of the fine features.

The pyramid runs the patchmatch engine coarse to fine. The coarsest level
starts from a downscaled external flow (when provided) or a random field;
every finer level starts from the upsampled result of the previous one.

Census comparison is strict less-than: a neighbor strictly darker than the
center codes +1, otherwise -1 (ties, and therefore constant regions, code
-1 on every channel).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .engine import (
    EngineConfig,
    OpCounters,
    pm_iterate,
    random_init,
)
from .tensor_core import (
    DimensionError,
    FlowField,
    ParameterError,
    average_pool,
    downsample_flow,
    pad_to_multiple,
    upsample_flow,
)

CENSUS_WINDOW = 7
DESCRIPTORS = ("census7", "gradients", "census7+gradients")


@dataclass(frozen=True)
class FeatureConfig:
    """Which descriptor to compute. Channel counts are fixed: census7 has
    48 channels (7x7 window minus the center), gradients 3, combined 51."""

    descriptor: str = "census7+gradients"

    def __post_init__(self):
        if self.descriptor not in DESCRIPTORS:
            raise ParameterError(f"unknown descriptor: {self.descriptor!r}")

    @property
    def channels(self) -> int:
        return {"census7": 48, "gradients": 3, "census7+gradients": 51}[self.descriptor]


def _census7(image: np.ndarray) -> np.ndarray:
    h, w = image.shape
    r = CENSUS_WINDOW // 2
    padded = np.pad(image, r, mode="edge")
    channels = []
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            if dx == 0 and dy == 0:
                continue
            neigh = padded[r + dy:r + dy + h, r + dx:r + dx + w]
            channels.append(np.where(neigh < image, 1.0, -1.0))
    return np.stack(channels, axis=-1).astype(np.float32)


def _gradients(image: np.ndarray) -> np.ndarray:
    gy, gx = np.gradient(image.astype(np.float64))
    mag = np.hypot(gx, gy)
    return np.stack([gx, gy, mag], axis=-1).astype(np.float32)


def extract_features(image, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """Per-pixel descriptor of a grayscale image (H, W) -> (H, W, C).

    Translation-equivariant away from borders by construction.
    """
    image = np.asarray(image, dtype=np.float32)
    if image.ndim == 3:
        raise DimensionError("extract_features expects a grayscale image; "
                             "convert color images to luma first")
    if image.ndim != 2:
        raise DimensionError(f"expected a 2D image, got shape {image.shape}")
    if min(image.shape) < CENSUS_WINDOW and "census7" in cfg.descriptor:
        raise DimensionError(
            f"image {image.shape} smaller than the {CENSUS_WINDOW}x{CENSUS_WINDOW} census window")
    parts = []
    if cfg.descriptor in ("census7", "census7+gradients"):
        parts.append(_census7(image))
    if cfg.descriptor in ("gradients", "census7+gradients"):
        parts.append(_gradients(image))
    return np.concatenate(parts, axis=-1) if len(parts) > 1 else parts[0]


def adaptive_levels(init_flow: FlowField, finest_factor: int,
                    radius: int = 2, iterations: int = 6) -> tuple[int, ...]:
    """Choose pyramid factors from the magnitude of an initial flow.

    Let M be the maximum of |u|, |v| over valid pixels and reach the
    per-level search capability (radius x iterations). The schedule uses the
    smallest k >= 0 with M / 2^k <= reach, with a sampling rate of 2 between
    levels: (finest_factor * 2^k, ..., finest_factor * 2, finest_factor).

    The reach rule ties the coarsest level to the engine's provable search
    extent: a flow within reach at some level can be found there and
    refined on the way down.
    """
    if finest_factor < 1:
        raise ParameterError("finest_factor must be >= 1")
    reach = radius * iterations
    if init_flow.valid.any():
        m = float(max(np.abs(init_flow.u[init_flow.valid]).max(),
                      np.abs(init_flow.v[init_flow.valid]).max()))
    else:
        m = 0.0
    k = 0
    while m / (2 ** k) > reach:
        k += 1
    return tuple(finest_factor * 2 ** i for i in range(k, -1, -1))


def warm_start(prev_flow: FlowField) -> FlowField:
    """Forward-splat a previous frame's flow to initialize the next frame.

    Each source pixel writes its flow to round(x + u, y + v). Collisions
    keep the larger-magnitude flow (faster-moving content wins); pixels
    nothing splats to are zero and marked invalid.
    """
    h, w = prev_flow.shape
    ys, xs = np.nonzero(prev_flow.valid)
    u = prev_flow.u[ys, xs]
    v = prev_flow.v[ys, xs]
    tx = np.rint(xs + u).astype(np.intp)
    ty = np.rint(ys + v).astype(np.intp)
    inside = (tx >= 0) & (tx < w) & (ty >= 0) & (ty < h)
    tx, ty, u, v = tx[inside], ty[inside], u[inside], v[inside]
    # Process in ascending magnitude order so the largest write wins.
    order = np.argsort(u.astype(np.float64) ** 2 + v.astype(np.float64) ** 2,
                       kind="stable")
    tx, ty, u, v = tx[order], ty[order], u[order], v[order]
    out_u = np.zeros((h, w), np.float32)
    out_v = np.zeros((h, w), np.float32)
    valid = np.zeros((h, w), bool)
    out_u[ty, tx] = u
    out_v[ty, tx] = v
    valid[ty, tx] = True
    return FlowField(out_u, out_v, valid)


def run_pyramid(img1, img2, cfg: EngineConfig, init: FlowField | None = None,
                feature_cfg: FeatureConfig = FeatureConfig(),
                collect_traces: bool = False):
    """Estimate flow between two grayscale images over cfg.schedule.

    Returns (flow, diagnostics). The flow is at full image resolution;
    diagnostics carries per-level op counters, wall times, and (optionally)
    the per-level iteration traces.
    """
    img1 = np.asarray(img1, dtype=np.float32)
    img2 = np.asarray(img2, dtype=np.float32)
    if img1.shape != img2.shape:
        raise DimensionError(f"image shapes differ: {img1.shape} vs {img2.shape}")
    schedule = tuple(int(f) for f in cfg.schedule)
    if not schedule or any(f < 1 for f in schedule):
        raise ParameterError("schedule factors must be >= 1")
    if list(schedule) != sorted(schedule, reverse=True) or len(set(schedule)) != len(schedule):
        raise ParameterError("schedule factors must be strictly decreasing")
    h0, w0 = img1.shape
    coarsest = schedule[0]
    img1p = pad_to_multiple(img1, coarsest)
    img2p = pad_to_multiple(img2, coarsest)

    t0 = time.perf_counter()
    feats1 = extract_features(img1p, feature_cfg)
    feats2 = extract_features(img2p, feature_cfg)
    diagnostics = {
        "schedule": schedule,
        "feature_channels": feats1.shape[2],
        "feature_ms": (time.perf_counter() - t0) * 1e3,
        "levels": [],
    }

    flow = None
    prev_factor = None
    traces = []
    for li, factor in enumerate(schedule):
        f1l = average_pool(feats1, factor) if factor > 1 else feats1
        f2l = average_pool(feats2, factor) if factor > 1 else feats2
        hl, wl = f1l.shape[:2]
        if li == 0:
            if init is not None:
                init_p = FlowField(pad_to_multiple(init.u, coarsest),
                                   pad_to_multiple(init.v, coarsest),
                                   pad_to_multiple(init.valid, coarsest))
                flow = init_p if factor == 1 else downsample_flow(init_p, factor)
                # Unfilled splat holes start the engine from zero flow.
                flow = FlowField(flow.u, flow.v)
            else:
                flow = random_init(hl, wl, cfg.d_max, cfg.rng_seed)
        else:
            flow = upsample_flow(flow, prev_factor // factor)
        counters = OpCounters()
        t1 = time.perf_counter()
        flow, trace = pm_iterate(f1l, f2l, flow, _level_cfg(cfg, factor), counters)
        level_ms = (time.perf_counter() - t1) * 1e3
        diagnostics["levels"].append({
            "factor": factor,
            "size": (hl, wl),
            "iterations": cfg.iterations,
            "trace_length": len(trace),
            "ms": level_ms,
            "counters": counters.as_dict(),
            "peak_candidate_entries": hl * wl * (
                (len(cfg.seeds) + 1) + (2 * cfg.radius + 1) ** 2),
        })
        if collect_traces:
            traces.append(trace)
        prev_factor = factor
    if schedule[-1] > 1:
        flow = upsample_flow(flow, schedule[-1])
    flow = FlowField(flow.u[:h0, :w0], flow.v[:h0, :w0], flow.valid[:h0, :w0])
    if collect_traces:
        diagnostics["traces"] = traces
    return flow, diagnostics


def _level_cfg(cfg: EngineConfig, factor: int) -> EngineConfig:
    """Per-level engine config: identical knobs, level-tagged RNG stream."""
    from dataclasses import replace
    return replace(cfg, rng_seed=cfg.rng_seed + factor)
