"""Synthetic image pairs with exact ground-truth flow.

Desk-scale stand-in for real benchmark data: band-limited random textures
moved by a known motion, rendered with the same bilinear sampling the
estimator uses.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .tensor_core import FlowField, ParameterError, sample_bilinear


def band_limited_texture(h: int, w: int, rng_seed: int = 0, sigma: float = 1.5,
                         margin: int = 32, octaves: int = 3) -> np.ndarray:
    """Multi-octave smoothed white noise rescaled to [0, 255], float32.

    Independent noise layers are low-passed at ``sigma``, ``4 * sigma``,
    ``16 * sigma``, ... and summed with amplitude growing with scale
    (roughly the 1/f falloff of natural images), so the texture keeps
    strong structure across scales — a single narrow band would turn
    featureless after a few rounds of downsampling.  ``margin`` extra
    pixels are generated on each side and cropped off so a texture and its
    translated copy agree exactly on the overlap.
    """
    rng = np.random.default_rng(rng_seed)
    shape = (h + 2 * margin, w + 2 * margin)
    big = np.zeros(shape)
    for k in range(octaves):
        layer = gaussian_filter(rng.standard_normal(shape), sigma * 4.0 ** k)
        big += 4.0 ** k * layer / (layer.std() + 1e-12)
    big = (big - big.min()) / (big.max() - big.min() + 1e-12) * 255.0
    return big.astype(np.float32)[margin:margin + h, margin:margin + w]


def _resample(image: np.ndarray, src_x: np.ndarray, src_y: np.ndarray) -> np.ndarray:
    return sample_bilinear(image[:, :, None], src_x, src_y)[:, :, 0]


def translation_pair(h: int, w: int, tx: float, ty: float,
                     rng_seed: int = 0) -> tuple[np.ndarray, np.ndarray, FlowField]:
    """Texture globally translated by (tx, ty): img2(x) = img1(x - t).

    Ground truth flow is the constant (tx, ty). Both frames are crops of
    one larger texture, so the translation introduces no border invention.
    """
    margin = int(np.ceil(max(abs(tx), abs(ty)))) + 2
    big = band_limited_texture(h + 2 * margin, w + 2 * margin, rng_seed)
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float32),
                         np.arange(h, dtype=np.float32))
    img1 = _resample(big, xs + margin, ys + margin)
    img2 = _resample(big, xs + margin - tx, ys + margin - ty)
    gt = FlowField.constant(h, w, tx, ty)
    return img1, img2, gt


def rotation_pair(h: int, w: int, degrees: float,
                  rng_seed: int = 0) -> tuple[np.ndarray, np.ndarray, FlowField]:
    """Texture rotated about the image center. Ground truth maps each pixel
    to its rotated position; pixels whose source leaves the frame are
    marked invalid in the ground truth."""
    theta = np.deg2rad(degrees)
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    img1 = band_limited_texture(h, w, rng_seed)
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64),
                         np.arange(h, dtype=np.float64))
    # img2(p) = img1(c + R^-1 (p - c))
    dx, dy = xs - cx, ys - cy
    src_x = cx + np.cos(theta) * dx + np.sin(theta) * dy
    src_y = cy - np.sin(theta) * dx + np.cos(theta) * dy
    img2 = _resample(img1, src_x.astype(np.float32), src_y.astype(np.float32))
    # flow(p) = R (p - c) + c - p
    fu = (np.cos(theta) * dx - np.sin(theta) * dy) + cx - xs
    fv = (np.sin(theta) * dx + np.cos(theta) * dy) + cy - ys
    tx, ty = xs + fu, ys + fv
    valid = (tx >= 0) & (tx <= w - 1) & (ty >= 0) & (ty <= h - 1)
    return img1, img2, FlowField(fu.astype(np.float32), fv.astype(np.float32), valid)


def two_layer_pair(h: int, w: int, bg: tuple[float, float], fg: tuple[float, float],
                   rect: tuple[int, int, int, int],
                   rng_seed: int = 0) -> tuple[np.ndarray, np.ndarray, FlowField]:
    """Background translation ``bg`` with a foreground rectangle
    (x0, y0, rw, rh) moving by ``fg``. Ground truth is piecewise constant
    over the rectangle; frame 2 composites the moved foreground over the
    translated background."""
    x0, y0, rw, rh = rect
    if rw < 1 or rh < 1 or x0 < 0 or y0 < 0 or x0 + rw > w or y0 + rh > h:
        raise ParameterError(f"rectangle {rect} outside {w}x{h} image")
    img1, img2, _ = translation_pair(h, w, bg[0], bg[1], rng_seed)
    fg_tex = band_limited_texture(rh, rw, rng_seed + 1)
    img1 = img1.copy()
    img1[y0:y0 + rh, x0:x0 + rw] = fg_tex
    img2 = img2.copy()
    fx, fy = int(round(fg[0])), int(round(fg[1]))
    dx0, dy0 = x0 + fx, y0 + fy
    sx0, sy0 = max(0, -dx0), max(0, -dy0)
    sx1 = rw - max(0, dx0 + rw - w)
    sy1 = rh - max(0, dy0 + rh - h)
    if sx1 > sx0 and sy1 > sy0:
        img2[dy0 + sy0:dy0 + sy1, dx0 + sx0:dx0 + sx1] = fg_tex[sy0:sy1, sx0:sx1]
    gt = FlowField.constant(h, w, bg[0], bg[1])
    gt.u[y0:y0 + rh, x0:x0 + rw] = fx
    gt.v[y0:y0 + rh, x0:x0 + rw] = fy
    return img1, img2, gt
