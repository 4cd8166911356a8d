"""Dense 2D tensor primitives: shift, bilinear warp, correlation, pooling.

Layout conventions used everywhere in this library:

- A feature map is a numpy array of shape (H, W, C), float32, channel-last.
- A flow field stores per-pixel displacements in pixels: ``u`` is the
  x-displacement, ``v`` the y-displacement, both (H, W) float32, plus a
  boolean validity mask.
- ``shift(f, (dx, dy))`` moves content toward positive x/y, i.e. the output
  at (x, y) reads the input at (x - dx, y - dy). Out-of-range sources
  replicate the nearest edge pixel (clamp).
- Bilinear sampling clamps sample coordinates to [0, W-1] x [0, H-1]
  before interpolation. Resampling positions for pooling/upsampling use
  pixel-center (half-pixel) alignment with edge replication: output pixel i
  at scale factor k samples input coordinate (i + 0.5) / k - 0.5.

Scalars are float32; dot products and means accumulate in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DimensionError(ValueError):
    """Shapes or offsets are incompatible with the requested operation."""


class ParameterError(ValueError):
    """A parameter is outside its documented domain."""


#: Default propagation seed offsets: the four diagonal neighbors.
DEFAULT_SEED_OFFSETS = ((-1, -1), (1, -1), (-1, 1), (1, 1))


@dataclass(frozen=True)
class SeedSet:
    """Ordered integer (dx, dy) offsets used by propagation.

    (0, 0) is excluded: the current pixel's own flow is always an implicit
    extra candidate.
    """

    offsets: tuple[tuple[int, int], ...] = DEFAULT_SEED_OFFSETS

    def __post_init__(self):
        offs = tuple((int(dx), int(dy)) for dx, dy in self.offsets)
        if len(set(offs)) != len(offs):
            raise ParameterError("duplicate seed offsets")
        if (0, 0) in offs:
            raise ParameterError("(0, 0) is not a valid seed offset")
        object.__setattr__(self, "offsets", offs)

    def __len__(self):
        return len(self.offsets)

    @property
    def is_symmetric(self) -> bool:
        """True when the set is closed under negation (required by the
        inverse-propagation path)."""
        s = set(self.offsets)
        return all((-dx, -dy) in s for dx, dy in s)

    def negated_index(self) -> dict[int, int]:
        """Map seed index i to the index j with offsets[j] == -offsets[i]."""
        pos = {off: i for i, off in enumerate(self.offsets)}
        try:
            return {i: pos[(-dx, -dy)] for i, (dx, dy) in enumerate(self.offsets)}
        except KeyError as exc:
            raise ParameterError(
                "seed set is not closed under negation; inverse propagation "
                "requires a symmetric seed set"
            ) from exc


@dataclass
class FlowField:
    """Dense displacement field. u = x-displacement, v = y-displacement."""

    u: np.ndarray
    v: np.ndarray
    valid: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float32)
        self.v = np.asarray(self.v, dtype=np.float32)
        if self.u.shape != self.v.shape or self.u.ndim != 2:
            raise DimensionError("u and v must be 2D arrays of equal shape")
        if self.valid is None:
            self.valid = np.ones(self.u.shape, dtype=bool)
        else:
            self.valid = np.asarray(self.valid, dtype=bool)
            if self.valid.shape != self.u.shape:
                raise DimensionError("valid mask shape mismatch")
        if self.valid.any():
            uv = np.stack([self.u[self.valid], self.v[self.valid]])
            if not np.isfinite(uv).all():
                raise ParameterError("flow contains non-finite values on valid pixels")

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def width(self) -> int:
        return self.u.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape

    @classmethod
    def zeros(cls, height: int, width: int) -> "FlowField":
        return cls(np.zeros((height, width), np.float32),
                   np.zeros((height, width), np.float32))

    @classmethod
    def constant(cls, height: int, width: int, u: float, v: float) -> "FlowField":
        return cls(np.full((height, width), u, np.float32),
                   np.full((height, width), v, np.float32))

    def copy(self) -> "FlowField":
        return FlowField(self.u.copy(), self.v.copy(), self.valid.copy())


def as_feature_map(data) -> np.ndarray:
    """Validate and coerce an array to (H, W, C) float32.

    2D input is promoted to a single channel.
    """
    f = np.asarray(data, dtype=np.float32)
    if f.ndim == 2:
        f = f[:, :, None]
    if f.ndim != 3 or min(f.shape) < 1:
        raise DimensionError(f"expected (H, W, C) feature map, got shape {f.shape}")
    if not np.isfinite(f).all():
        raise ParameterError("feature map contains NaN/Inf")
    return np.ascontiguousarray(f)


def _shift_indices(h: int, w: int, dp: tuple[int, int]):
    dx, dy = int(dp[0]), int(dp[1])
    if abs(dx) >= w or abs(dy) >= h:
        raise DimensionError(f"shift offset {dp} exceeds map extent {(w, h)}")
    ys = np.clip(np.arange(h) - dy, 0, h - 1)
    xs = np.clip(np.arange(w) - dx, 0, w - 1)
    return ys, xs


def shift(f, dp: tuple[int, int]):
    """Shift a feature map, plain array, or flow field by an integer offset.

    dp = (1, 1) moves content toward the bottom-right: pixel (1, 1) of the
    output receives the value at (0, 0). Sources outside the map replicate
    the nearest edge pixel.
    """
    if isinstance(f, FlowField):
        ys, xs = _shift_indices(f.height, f.width, dp)
        return FlowField(f.u[ys][:, xs], f.v[ys][:, xs], f.valid[ys][:, xs])
    arr = np.asarray(f)
    if arr.ndim < 2:
        raise DimensionError("shift expects at least a 2D array")
    ys, xs = _shift_indices(arr.shape[0], arr.shape[1], dp)
    return arr[ys][:, xs]


def warp_bilinear(f: np.ndarray, flow: FlowField) -> np.ndarray:
    """Backward-warp ``f`` by ``flow``: output(x, y) samples f at
    (x + u(x,y), y + v(x,y)) with bilinear interpolation, coordinates
    clamped to the map border."""
    f = np.asarray(f)
    squeeze = f.ndim == 2
    if squeeze:
        f = f[:, :, None]
    h, w = f.shape[:2]
    if flow.shape != (h, w):
        raise DimensionError(f"flow shape {flow.shape} != map shape {(h, w)}")
    gx = np.arange(w, dtype=np.float32)[None, :] + flow.u
    gy = np.arange(h, dtype=np.float32)[:, None] + flow.v
    out = sample_bilinear(f, gx, gy)
    return out[:, :, 0] if squeeze else out


def sample_bilinear(f: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Bilinear gather of an (H, W, C) map at float coordinates, clamped."""
    h, w = f.shape[:2]
    gx = np.clip(gx, 0.0, w - 1.0).astype(np.float32)
    gy = np.clip(gy, 0.0, h - 1.0).astype(np.float32)
    x0 = np.minimum(np.floor(gx).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(gy).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (gx - x0.astype(np.float32))[..., None]
    fy = (gy - y0.astype(np.float32))[..., None]
    one = np.float32(1.0)
    top = (one - fx) * f[y0, x0] + fx * f[y0, x1]
    bot = (one - fx) * f[y1, x0] + fx * f[y1, x1]
    return ((one - fy) * top + fy * bot).astype(f.dtype, copy=False)


def l2_normalize(f: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Per-pixel L2 normalization of channel vectors."""
    f = as_feature_map(f)
    norm = np.sqrt(np.einsum("ijc,ijc->ij", f.astype(np.float64), f.astype(np.float64)))
    return (f / np.maximum(norm, eps)[:, :, None]).astype(np.float32)


def correlate(a: np.ndarray, b: np.ndarray, normalize: bool = False) -> np.ndarray:
    """Per-pixel channel dot product, accumulated in float64.

    With ``normalize=True`` both inputs are L2-normalized per pixel first,
    so the result is the cosine similarity in [-1, 1].
    """
    a = as_feature_map(a)
    b = as_feature_map(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    if normalize:
        a = l2_normalize(a)
        b = l2_normalize(b)
    return np.einsum("ijc,ijc->ij", a.astype(np.float64), b.astype(np.float64))


def average_pool(f: np.ndarray, factor: int) -> np.ndarray:
    """Non-overlapping factor x factor mean per channel.

    Height and width must be divisible by ``factor``; use
    :func:`pad_to_multiple` beforehand otherwise.
    """
    if factor < 2:
        raise ParameterError("pooling factor must be >= 2")
    f = as_feature_map(f)
    h, w, c = f.shape
    if h % factor or w % factor:
        raise DimensionError(f"dims {(h, w)} not divisible by factor {factor}")
    blocks = f.reshape(h // factor, factor, w // factor, factor, c)
    return blocks.mean(axis=(1, 3), dtype=np.float64).astype(np.float32)


def pad_to_multiple(f: np.ndarray, factor: int) -> np.ndarray:
    """Replicate-pad the bottom/right edges until H and W divide ``factor``."""
    f = np.asarray(f)
    h, w = f.shape[:2]
    ph = (-h) % factor
    pw = (-w) % factor
    if ph == 0 and pw == 0:
        return f
    pad = [(0, ph), (0, pw)] + [(0, 0)] * (f.ndim - 2)
    return np.pad(f, pad, mode="edge")


def upsample_flow(flow: FlowField, factor: int) -> FlowField:
    """Bilinearly upsample a flow field by an integer factor.

    Displacement values are multiplied by ``factor`` so they stay expressed
    in pixels of the new resolution. Sampling uses pixel-center alignment
    with edge replication; the validity mask is upsampled nearest-neighbor.
    """
    if factor < 2:
        raise ParameterError("upsampling factor must be >= 2")
    h, w = flow.shape
    ho, wo = h * factor, w * factor
    gx = np.clip((np.arange(wo, dtype=np.float32) + 0.5) / factor - 0.5, 0, w - 1)
    gy = np.clip((np.arange(ho, dtype=np.float32) + 0.5) / factor - 0.5, 0, h - 1)
    gxm, gym = np.meshgrid(gx, gy)
    uv = np.stack([flow.u, flow.v], axis=-1)
    up = sample_bilinear(uv, gxm, gym) * np.float32(factor)
    ys = np.arange(ho) // factor
    xs = np.arange(wo) // factor
    valid = flow.valid[ys][:, xs]
    return FlowField(up[:, :, 0], up[:, :, 1], valid)


def downsample_flow(flow: FlowField, factor: int) -> FlowField:
    """Average-pool a flow field by an integer factor, dividing displacement
    values by ``factor``. Pixels pool to valid when at least half of their
    source block is valid; invalid outputs are zeroed."""
    if factor < 2:
        raise ParameterError("downsampling factor must be >= 2")
    u = average_pool(flow.u[:, :, None], factor)[:, :, 0] / np.float32(factor)
    v = average_pool(flow.v[:, :, None], factor)[:, :, 0] / np.float32(factor)
    frac = average_pool(flow.valid.astype(np.float32)[:, :, None], factor)[:, :, 0]
    valid = frac >= 0.5
    u = np.where(valid, u, 0.0).astype(np.float32)
    v = np.where(valid, v, 0.0).astype(np.float32)
    return FlowField(u, v, valid)
