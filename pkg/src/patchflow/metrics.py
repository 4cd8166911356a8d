"""Flow evaluation: endpoint error, F1-all, and weighted sequence error.

All statistics are computed over pixels the ground truth marks valid.
The F1-all outlier rule is the KITTI standard: a pixel is an outlier when
its endpoint error exceeds 3 px AND 5% of the ground-truth magnitude.

Reductions accumulate in float64 with numpy's pairwise summation, so
results do not depend on worker counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor_core import DimensionError, FlowField

OUTLIER_ABS_PX = 3.0
OUTLIER_REL = 0.05


@dataclass
class EvalReport:
    epe: float
    f1_all: float  # percent
    n: int
    outlier_counts: dict = field(default_factory=dict)

    def to_text(self) -> str:
        return f"epe={self.epe:.6f} f1_all={self.f1_all:.6f} n={self.n}"


def _endpoint_errors(est: FlowField, gt: FlowField):
    if est.shape != gt.shape:
        raise DimensionError(f"shape mismatch: {est.shape} vs {gt.shape}")
    mask = gt.valid
    if not mask.any():
        raise ValueError("ground truth has no valid pixels")
    du = est.u.astype(np.float64) - gt.u.astype(np.float64)
    dv = est.v.astype(np.float64) - gt.v.astype(np.float64)
    err = np.sqrt(du * du + dv * dv)[mask]
    mag = np.sqrt(gt.u.astype(np.float64) ** 2 + gt.v.astype(np.float64) ** 2)[mask]
    return err, mag


def epe(est: FlowField, gt: FlowField) -> float:
    """Mean endpoint error over valid ground-truth pixels."""
    err, _ = _endpoint_errors(est, gt)
    return float(err.mean())


def f1_all(est: FlowField, gt: FlowField) -> float:
    """Percent of valid pixels whose error exceeds 3 px and 5% of the
    ground-truth magnitude."""
    err, mag = _endpoint_errors(est, gt)
    outliers = (err > OUTLIER_ABS_PX) & (err > OUTLIER_REL * mag)
    return float(100.0 * outliers.mean())


def evaluate(est: FlowField, gt: FlowField) -> EvalReport:
    """EPE and F1-all in one pass, with per-threshold outlier counts."""
    err, mag = _endpoint_errors(est, gt)
    counts = {f">{t:g}px": int((err > t).sum()) for t in (1.0, 3.0, 5.0)}
    counts["kitti"] = int(((err > OUTLIER_ABS_PX) & (err > OUTLIER_REL * mag)).sum())
    return EvalReport(
        epe=float(err.mean()),
        f1_all=float(100.0 * counts["kitti"] / err.size),
        n=int(err.size),
        outlier_counts=counts,
    )


def sequence_weights(n: int, gamma: float) -> np.ndarray:
    """w_i = gamma^(n - i - 1) for i = 0..n-1."""
    if n < 1:
        raise ValueError("empty prediction sequence")
    return gamma ** (n - 1 - np.arange(n, dtype=np.float64))


def sequence_loss(trace: list[FlowField], gt: FlowField, gamma: float = 0.8) -> float:
    """Weighted sum over a prediction sequence of the mean absolute error.

    The per-prediction error is the mean of |u - u*| and |v - v*| jointly
    over valid ground-truth pixels; later predictions carry larger weights.
    Used here as a convergence metric over iteration traces.
    """
    if not trace:
        raise ValueError("empty prediction sequence")
    mask = gt.valid
    if not mask.any():
        raise ValueError("ground truth has no valid pixels")
    weights = sequence_weights(len(trace), gamma)
    total = 0.0
    for w_i, est in zip(weights, trace):
        if est.shape != gt.shape:
            raise DimensionError(f"shape mismatch: {est.shape} vs {gt.shape}")
        du = np.abs(est.u.astype(np.float64) - gt.u.astype(np.float64))[mask]
        dv = np.abs(est.v.astype(np.float64) - gt.v.astype(np.float64))[mask]
        total += w_i * float(np.concatenate([du, dv]).mean())
    return total
