"""Baseline correlation volumes and closed-form cost accounting.

The local volume scores every displacement in a square window per pixel;
the global pyramid scores all pixel pairs, with coarser levels averaging
the target coordinates over 2^m x 2^m blocks. Both exist as accuracy and
memory baselines for the patchmatch engine, which touches only
h*w*((n+1) + (2r+1)^2) candidates per iteration.

Candidate ordering inside volumes is row-major over displacement: dy is the
outer loop, dx the inner one, both from -d_max to +d_max.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .tensor_core import DimensionError, ParameterError, as_feature_map, shift


@dataclass
class LocalCorrVolume:
    d_max: int
    scores: np.ndarray  # (H, W, (2*d_max+1)**2) float32

    @property
    def height(self) -> int:
        return self.scores.shape[0]

    @property
    def width(self) -> int:
        return self.scores.shape[1]

    @property
    def entries(self) -> int:
        return self.scores.size


@dataclass
class GlobalCorrPyramid:
    levels: list  # levels[m]: (H, W, H/2^m, W/2^m) float32

    @property
    def entries(self) -> int:
        return sum(lv.size for lv in self.levels)


@dataclass
class CostReport:
    strategy: str
    entries: int
    params: dict


def displacement_offsets(d_max: int) -> list[tuple[int, int]]:
    """Candidate (dx, dy) ordering of the local volume: dy outer, dx inner."""
    return [(dx, dy)
            for dy in range(-d_max, d_max + 1)
            for dx in range(-d_max, d_max + 1)]


def local_correlation(f1, f2, d_max: int, normalize: bool = False) -> LocalCorrVolume:
    """Score every displacement d in [-d_max, d_max]^2 at every pixel:
    scores(x, y, d) = F1(x) . F2(x + d), with clamped F2 lookups."""
    f1 = as_feature_map(f1)
    f2 = as_feature_map(f2)
    if f1.shape != f2.shape:
        raise DimensionError(f"shape mismatch: {f1.shape} vs {f2.shape}")
    if d_max < 0:
        raise ParameterError("d_max must be >= 0")
    h, w, _ = f1.shape
    if d_max >= min(h, w):
        raise ParameterError(f"d_max {d_max} >= min map extent {min(h, w)}")
    if normalize:
        from .tensor_core import l2_normalize
        f1 = l2_normalize(f1)
        f2 = l2_normalize(f2)
    f1_64 = f1.astype(np.float64)
    k = (2 * d_max + 1) ** 2
    scores = np.empty((h, w, k), dtype=np.float32)
    for i, (dx, dy) in enumerate(displacement_offsets(d_max)):
        # F2(x + d) is a shift of F2 by -d under the library convention.
        target = shift(f2, (-dx, -dy))
        scores[:, :, i] = np.einsum("ijc,ijc->ij", f1_64, target.astype(np.float64))
    return LocalCorrVolume(d_max=d_max, scores=scores)


def global_correlation(f1, f2, num_levels: int, normalize: bool = False) -> GlobalCorrPyramid:
    """All-pairs dot-product volume plus pooled levels.

    Level 0 holds F1(i,j) . F2(k,l) for every pair; level m averages the
    target coordinates (k, l) over 2^m x 2^m blocks.
    """
    f1 = as_feature_map(f1)
    f2 = as_feature_map(f2)
    if f1.shape != f2.shape:
        raise DimensionError(f"shape mismatch: {f1.shape} vs {f2.shape}")
    if num_levels < 1:
        raise ParameterError("num_levels must be >= 1")
    h, w, _ = f1.shape
    divisor = 2 ** (num_levels - 1)
    if h % divisor or w % divisor:
        raise ParameterError(
            f"dims {(h, w)} must divide 2^(num_levels-1) = {divisor}")
    if normalize:
        from .tensor_core import l2_normalize
        f1 = l2_normalize(f1)
        f2 = l2_normalize(f2)
    level0 = np.einsum("ijc,klc->ijkl", f1.astype(np.float64),
                       f2.astype(np.float64)).astype(np.float32)
    levels = [level0]
    for _ in range(1, num_levels):
        prev = levels[-1]
        hh, ww, hk, wl = prev.shape
        blocks = prev.reshape(hh, ww, hk // 2, 2, wl // 2, 2)
        levels.append(blocks.mean(axis=(3, 5), dtype=np.float64).astype(np.float32))
    return GlobalCorrPyramid(levels=levels)


def cost_report(strategy: str, h: int, w: int, **params) -> CostReport:
    """Exact correlation-entry counts per full construction/iteration.

    local:      h*w*(2*d_max+1)^2
    global:     (h*w)^2                (level 0 of the all-pairs volume)
    patchmatch: h*w*((n+1) + (2r+1)^2) per iteration, counting the current
                flow candidate and the full local-search window
    """
    if h < 1 or w < 1:
        raise ParameterError("dims must be positive")
    if strategy == "local":
        d_max = int(params["d_max"])
        if d_max < 0:
            raise ParameterError("d_max must be >= 0")
        entries = h * w * (2 * d_max + 1) ** 2
        used = {"d_max": d_max}
    elif strategy == "global":
        entries = (h * w) ** 2
        used = {"levels": int(params.get("levels", 1))}
    elif strategy == "patchmatch":
        n = int(params["n_seeds"])
        r = int(params["radius"])
        if n < 1 or r < 1:
            raise ParameterError("n_seeds and radius must be >= 1")
        entries = h * w * ((n + 1) + (2 * r + 1) ** 2)
        used = {"n_seeds": n, "radius": r}
    else:
        raise ParameterError(f"unknown strategy: {strategy!r}")
    return CostReport(strategy=strategy, entries=entries, params=used)


def dump_volume(scores: np.ndarray, strategy: str) -> bytes:
    """Serialize an (H, W, K) score volume for cross-implementation diffing.

    Layout: ASCII header line "CORR <strategy> <h> <w> <k>\\n" followed by
    h*w*k little-endian float32 values, row-major.
    """
    scores = np.asarray(scores, dtype=np.float32)
    if scores.ndim != 3:
        raise DimensionError("expected an (H, W, K) volume")
    h, w, k = scores.shape
    header = f"CORR {strategy} {h} {w} {k}\n".encode("ascii")
    return header + scores.astype("<f4").tobytes(order="C")


def load_volume(data: bytes) -> tuple[str, np.ndarray]:
    """Inverse of :func:`dump_volume`. Returns (strategy, scores)."""
    nl = data.find(b"\n")
    if nl < 0:
        raise ValueError("missing volume header")
    parts = data[:nl].decode("ascii", errors="replace").split()
    if len(parts) != 5 or parts[0] != "CORR":
        raise ValueError("malformed volume header")
    strategy, h, w, k = parts[1], int(parts[2]), int(parts[3]), int(parts[4])
    body = data[nl + 1:]
    expected = h * w * k * 4
    if len(body) != expected:
        raise ValueError(f"volume body has {len(body)} bytes, expected {expected}")
    scores = np.frombuffer(body, dtype="<f4").reshape(h, w, k)
    return strategy, scores
