"""Tour of the tensor primitives everything else is built from.

Shows the shift convention (content moves BY the offset, borders clamp),
bilinear warping by a flow field, cosine-similarity correlation, and the
pooling/upsampling pair used between pyramid levels.
"""

import numpy as np

from patchflow import (
    FlowField,
    average_pool,
    correlate,
    shift,
    upsample_flow,
    warp_bilinear,
)


def main():
    # A tiny labelled map makes the shift convention visible: value 10*y+x.
    g = (10 * np.arange(4)[:, None] + np.arange(4))[:, :, None].astype(np.float32)
    moved = shift(g, (1, 0))  # move content one pixel to the right
    print("original row 0: ", g[0, :, 0])
    print("shift (1,0) row:", moved[0, :, 0], "(left column clamps)")

    # Warping by a constant integer flow is the same shift.
    flow = FlowField.constant(4, 4, 1.0, 0.0)
    warped = warp_bilinear(g, FlowField(-flow.u, -flow.v))
    print("warp by (-1,0) row:", warped[0, :, 0])

    # A half-pixel flow blends neighbors.
    half = FlowField.constant(4, 4, 0.5, 0.0)
    print("warp by (0.5,0) row:", warp_bilinear(g, half)[0, :, 0])

    # Correlation of a map with itself scores 1.0 everywhere (cosine).
    rng = np.random.default_rng(0)
    f = rng.standard_normal((4, 4, 8)).astype(np.float32)
    print("normalized self-correlation:",
          np.unique(np.round(correlate(f, f, normalize=True), 6)))

    # Pool down, upsample a flow back up: values double with resolution.
    coarse = average_pool(g, 2)
    print("2x2 average pool:\n", coarse[:, :, 0])
    fc = FlowField.constant(2, 2, 1.0, -0.5)
    fine = upsample_flow(fc, 2)
    print("upsampled flow u (scaled by the factor):", fine.u[0, 0])


if __name__ == "__main__":
    main()
