"""Why patchmatch: the memory story of the three correlation strategies.

Local correlation stores (2*d_max+1)^2 scores per pixel, the global volume
stores one score per pixel PAIR, and the patchmatch engine only ever holds
(n_seeds + 1) + (2*radius+1)^2 candidates per pixel. The closed forms below
are exact entry counts, printed alongside a small materialized check.
"""

import numpy as np

from patchflow import cost_report, global_correlation, local_correlation


def fmt(n):
    return f"{n:,d} entries ({n * 4 / 1e6:.1f} MB as float32)"


def main():
    print("cost at 64x64, d_max=4, 4 seeds, radius 2:")
    for strategy, kwargs in (("local", dict(d_max=4)),
                             ("global", {}),
                             ("patchmatch", dict(n_seeds=4, radius=2))):
        rep = cost_report(strategy, 64, 64, **kwargs)
        print(f"  {strategy:<10} {fmt(rep.entries)}")

    print("\nscaling with image side (global grows with the 4th power):")
    for side in (64, 128, 256, 512):
        loc = cost_report("local", side, side, d_max=4).entries
        glo = cost_report("global", side, side).entries
        pm = cost_report("patchmatch", side, side, n_seeds=4, radius=2).entries
        print(f"  {side:>4}px  local {loc / 1e6:>9.1f}M  "
              f"global {glo / 1e9:>10.1f}B  patchmatch {pm / 1e6:>6.1f}M")

    # The reports are not estimates: materialize small volumes and compare.
    rng = np.random.default_rng(0)
    f1 = rng.standard_normal((16, 16, 8)).astype(np.float32)
    f2 = rng.standard_normal((16, 16, 8)).astype(np.float32)
    vol = local_correlation(f1, f2, d_max=3)
    print("\nmaterialized local volume:", vol.scores.size, "entries;",
          "report says", cost_report("local", 16, 16, d_max=3).entries)
    pyr = global_correlation(f1, f2, num_levels=1)
    print("materialized global volume:", pyr.levels[0].size, "entries;",
          "report says", cost_report("global", 16, 16).entries)


if __name__ == "__main__":
    main()
