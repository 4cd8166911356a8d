"""Bit-exact flow and image I/O plus color-wheel visualization.

Middlebury ``.flo``: 4-byte magic "PIEH" (the little-endian float32
202021.25), int32 width, int32 height, then width*height interleaved
(u, v) float32 pairs, row-major. The format has no validity channel;
values with magnitude >= 1e9 mark invalid pixels.

KITTI flow PNG: 3-channel 16-bit PNG with u = (ch1 - 2^15)/64,
v = (ch2 - 2^15)/64, valid = (ch3 != 0).
"""

from __future__ import annotations

import struct

import cv2
import numpy as np

from .tensor_core import FlowField

FLO_MAGIC = 202021.25
FLO_MAGIC_BYTES = struct.pack("<f", FLO_MAGIC)  # b"PIEH"
FLO_INVALID = 1e9
_MAX_DIM = 1 << 20


class FlowFormatError(ValueError):
    """Malformed flow file."""


def write_flo(flow: FlowField) -> bytes:
    """Encode a flow field as Middlebury .flo bytes. Invalid pixels are
    written as 1e10 in both components."""
    h, w = flow.shape
    body = np.empty((h, w, 2), dtype="<f4")
    body[:, :, 0] = flow.u
    body[:, :, 1] = flow.v
    if not flow.valid.all():
        body[~flow.valid] = 1e10
    return FLO_MAGIC_BYTES + struct.pack("<ii", w, h) + body.tobytes(order="C")


def read_flo(data: bytes) -> FlowField:
    """Decode Middlebury .flo bytes."""
    if len(data) < 12:
        raise FlowFormatError("file too short for a .flo header")
    if data[:4] != FLO_MAGIC_BYTES:
        raise FlowFormatError("bad .flo magic (expected PIEH / 202021.25)")
    w, h = struct.unpack("<ii", data[4:12])
    if not (1 <= w <= _MAX_DIM and 1 <= h <= _MAX_DIM):
        raise FlowFormatError(f"implausible .flo dimensions {w}x{h}")
    expected = 12 + w * h * 8
    if len(data) != expected:
        raise FlowFormatError(f".flo body has {len(data)} bytes, expected {expected}")
    body = np.frombuffer(data, dtype="<f4", offset=12).reshape(h, w, 2)
    u = body[:, :, 0].copy()
    v = body[:, :, 1].copy()
    valid = (np.abs(u) < FLO_INVALID) & (np.abs(v) < FLO_INVALID) & \
        np.isfinite(u) & np.isfinite(v)
    u[~valid] = 0.0
    v[~valid] = 0.0
    return FlowField(u, v, valid)


def write_flo_file(flow: FlowField, path) -> None:
    with open(path, "wb") as fh:
        fh.write(write_flo(flow))


def read_flo_file(path) -> FlowField:
    with open(path, "rb") as fh:
        return read_flo(fh.read())


def write_kitti_png(flow: FlowField) -> bytes:
    """Encode as KITTI 16-bit flow PNG. Exact for flows on the 1/64 px grid
    within +/-512 px; off-grid values round to nearest."""
    h, w = flow.shape
    enc = np.zeros((h, w, 3), dtype=np.uint16)
    enc[:, :, 0] = np.clip(np.rint(flow.u.astype(np.float64) * 64.0) + 2 ** 15,
                           0, 65535).astype(np.uint16)
    enc[:, :, 1] = np.clip(np.rint(flow.v.astype(np.float64) * 64.0) + 2 ** 15,
                           0, 65535).astype(np.uint16)
    enc[:, :, 2] = flow.valid.astype(np.uint16)
    enc[~flow.valid, 0] = 0
    enc[~flow.valid, 1] = 0
    ok, buf = cv2.imencode(".png", enc[:, :, ::-1])  # RGB channel order on disk
    if not ok:
        raise FlowFormatError("PNG encoding failed")
    return buf.tobytes()


def read_kitti_png(data: bytes) -> FlowField:
    """Decode a KITTI 16-bit flow PNG."""
    arr = cv2.imdecode(np.frombuffer(data, np.uint8), cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise FlowFormatError("not a decodable PNG")
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint16:
        raise FlowFormatError("KITTI flow PNG must be 3-channel 16-bit")
    rgb = arr[:, :, ::-1]
    u = (rgb[:, :, 0].astype(np.float64) - 2 ** 15) / 64.0
    v = (rgb[:, :, 1].astype(np.float64) - 2 ** 15) / 64.0
    valid = rgb[:, :, 2] != 0
    u[~valid] = 0.0
    v[~valid] = 0.0
    return FlowField(u.astype(np.float32), v.astype(np.float32), valid)


def _make_colorwheel() -> np.ndarray:
    """The 55-color Middlebury wheel (RY, YG, GC, CB, BM, MR sectors)."""
    ry, yg, gc, cb, bm, mr = 15, 6, 4, 11, 13, 6
    wheel = np.zeros((ry + yg + gc + cb + bm + mr, 3))
    col = 0
    wheel[0:ry, 0] = 1.0
    wheel[0:ry, 1] = np.arange(ry) / ry
    col += ry
    wheel[col:col + yg, 0] = 1.0 - np.arange(yg) / yg
    wheel[col:col + yg, 1] = 1.0
    col += yg
    wheel[col:col + gc, 1] = 1.0
    wheel[col:col + gc, 2] = np.arange(gc) / gc
    col += gc
    wheel[col:col + cb, 1] = 1.0 - np.arange(cb) / cb
    wheel[col:col + cb, 2] = 1.0
    col += cb
    wheel[col:col + bm, 2] = 1.0
    wheel[col:col + bm, 0] = np.arange(bm) / bm
    col += bm
    wheel[col:col + mr, 2] = 1.0 - np.arange(mr) / mr
    wheel[col:col + mr, 0] = 1.0
    return wheel


_COLORWHEEL = _make_colorwheel()


def flow_to_color(flow: FlowField, max_norm: float | None = None) -> np.ndarray:
    """Middlebury color coding: hue encodes direction, saturation encodes
    magnitude relative to ``max_norm`` (the field's own maximum when None,
    values beyond it saturate). Invalid pixels render black. Returns an
    (H, W, 3) uint8 RGB image; zero flow is white."""
    u = flow.u.astype(np.float64)
    v = flow.v.astype(np.float64)
    rad = np.sqrt(u * u + v * v)
    if max_norm is None:
        max_norm = float(rad[flow.valid].max()) if flow.valid.any() else 0.0
    scale = max_norm if max_norm > 0 else 1.0
    rad = np.minimum(rad / scale, 1.0)
    angle = np.arctan2(-v, -u) / np.pi  # in [-1, 1]
    ncols = _COLORWHEEL.shape[0]
    fk = (angle + 1.0) / 2.0 * (ncols - 1)
    k0 = np.floor(fk).astype(int) % ncols
    k1 = (k0 + 1) % ncols
    f = (fk - np.floor(fk))[..., None]
    col = (1.0 - f) * _COLORWHEEL[k0] + f * _COLORWHEEL[k1]
    col = 1.0 - rad[..., None] * (1.0 - col)
    img = np.clip(col * 255.0 + 0.5, 0, 255).astype(np.uint8)
    img[~flow.valid] = 0
    return img


def load_image(path) -> np.ndarray:
    """Load an 8-bit grayscale/RGB image (PNG, PGM, PPM, ...) as float32
    luma in [0, 255]. Color converts with Rec. 601 weights."""
    arr = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise IOError(f"cannot read image: {path}")
    if arr.ndim == 3:
        if arr.shape[2] == 4:
            arr = arr[:, :, :3]
        b, g, r = arr[:, :, 0], arr[:, :, 1], arr[:, :, 2]
        arr = 0.299 * r + 0.587 * g + 0.114 * b
    return arr.astype(np.float32)


def save_image_gray(path, arr) -> None:
    """Write a float array as an 8-bit grayscale PNG/PGM (values clipped)."""
    img = np.clip(np.asarray(arr), 0, 255).astype(np.uint8)
    if not cv2.imwrite(str(path), img):
        raise IOError(f"cannot write image: {path}")


def save_image_rgb(path, rgb) -> None:
    """Write an (H, W, 3) uint8 RGB array as a PNG."""
    if not cv2.imwrite(str(path), np.asarray(rgb)[:, :, ::-1]):
        raise IOError(f"cannot write image: {path}")
