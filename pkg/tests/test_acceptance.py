"""Acceptance suite: the properties this package promises, checked end to end.

Each test prints one ``ACCEPTANCE NN <name>: PASS`` (or ``FAIL``) line.
Run with ``pytest -s tests/test_acceptance.py`` to see the lines inline.
"""

import functools
import time

import numpy as np
import pytest

from patchflow import (
    EngineConfig,
    FlowField,
    OpCounters,
    SeedSet,
    cli,
    cost_report,
    epe,
    f1_all,
    inverse_prop_init,
    inverse_propagate,
    local_correlation,
    propagate,
    read_flo,
    read_kitti_png,
    run_pyramid,
    sequence_weights,
    translation_pair,
    write_flo,
    write_kitti_png,
)

DIAG4 = SeedSet()


def reported(number, name):
    """Print the one-line verdict for an acceptance criterion."""
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"ACCEPTANCE {number:02d} {name}: FAIL", flush=True)
                raise
            print(f"ACCEPTANCE {number:02d} {name}: PASS", flush=True)
        return wrapper
    return deco


def random_instances(count=100, h=16, w=16, c=8, bound=3, seed=0):
    """Random feature pairs plus integer flows, the shared equivalence set."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        f1 = rng.standard_normal((h, w, c)).astype(np.float32)
        f2 = rng.standard_normal((h, w, c)).astype(np.float32)
        flow = FlowField(
            rng.integers(-bound, bound + 1, (h, w)).astype(np.float32),
            rng.integers(-bound, bound + 1, (h, w)).astype(np.float32))
        yield f1, f2, flow


@reported(1, "forward and inverse propagation score the same candidates")
def test_inverse_exact_matches_forward_propagation():
    t0 = time.perf_counter()
    margin = 5
    for f1, f2, flow in random_instances():
        fwd = propagate(f1, f2, flow, DIAG4)
        st = inverse_prop_init(f2, DIAG4)
        inv = inverse_propagate(f1, st, flow, mode="inverse-exact")
        diff = np.abs(fwd.scores - inv.scores)[margin:-margin, margin:-margin]
        assert diff.max() < 1e-6
    assert time.perf_counter() - t0 < 5.0


@reported(2, "approximate inverse equals forward scores read one seed offset away")
def test_inverse_approx_is_seed_offset_forward_score():
    margin = 5
    for f1, f2, flow in random_instances():
        fwd = propagate(f1, f2, flow, DIAG4)
        st = inverse_prop_init(f2, DIAG4, f1=f1)
        apx = inverse_propagate(f1, st, flow, mode="inverse-approx")
        for i, (dx, dy) in enumerate(DIAG4.offsets):
            # approximate(x) carries the score forward propagation
            # produces at x + (dx, dy)
            ys = np.arange(margin, 16 - margin)
            xs = np.arange(margin, 16 - margin)
            a = apx.scores[np.ix_(ys, xs)][:, :, i + 1]
            b = fwd.scores[np.ix_(ys + dy, xs + dx)][:, :, i + 1]
            assert np.abs(a - b).max() < 1e-6


@reported(3, "operation counters match the analytic shift/warp budgets")
def test_work_accounting_formulas():
    rng = np.random.default_rng(1)
    f1 = rng.standard_normal((16, 16, 8)).astype(np.float32)
    f2 = rng.standard_normal((16, 16, 8)).astype(np.float32)
    flow = FlowField.zeros(16, 16)
    n = len(DIAG4)
    for m in (1, 6, 12):
        fwd = OpCounters()
        for _ in range(m):
            propagate(f1, f2, flow, DIAG4, counters=fwd)
        assert fwd.flow_shifts == n * m
        assert fwd.feature_warps == n * m

        inv = OpCounters()
        st = inverse_prop_init(f2, DIAG4, counters=inv)
        for _ in range(m):
            inverse_propagate(f1, st, flow, mode="inverse-exact", counters=inv)
        assert inv.target_shifts == n
        assert inv.stack_warp_calls == m


@reported(4, "correlation cost closed forms and bench output")
def test_cost_closed_forms(capsys):
    rng = np.random.default_rng(2)
    for _ in range(1000):
        h = int(rng.integers(1, 200))
        w = int(rng.integers(1, 200))
        d = int(rng.integers(0, 16))
        n = int(rng.integers(1, 9))
        r = int(rng.integers(1, 5))
        assert cost_report("local", h, w, d_max=d).entries == h * w * (2 * d + 1) ** 2
        assert cost_report("global", h, w).entries == (h * w) ** 2
        assert (cost_report("patchmatch", h, w, n_seeds=n, radius=r).entries
                == h * w * ((n + 1) + (2 * r + 1) ** 2))
    code = cli.main(["bench", "--sizes", "64x64", "--d-max", "4",
                     "--n-seeds", "4", "--radius", "2"])
    out = capsys.readouterr().out
    assert code == 0
    entries = {ln.split(",")[0]: int(ln.split(",")[4])
               for ln in out.strip().splitlines()[1:]}
    assert entries == {"local": 331776, "global": 16777216, "patchmatch": 122880}


@pytest.fixture(scope="module")
def recovery_run():
    """The shared synthetic-recovery run: a 128x128 texture translated by
    (18, -12), estimated cold from random initialization."""
    img1, img2, gt = translation_pair(128, 128, 18.0, -12.0, rng_seed=3)
    cfg = EngineConfig(mode="propagate", schedule=(4, 1), iterations=6,
                       radius=2, rng_seed=0, d_max=8.0)
    t0 = time.perf_counter()
    flow, diag = run_pyramid(img1, img2, cfg, collect_traces=True)
    wall = time.perf_counter() - t0
    return flow, gt, diag, wall


@reported(5, "recovers a large global translation cold")
def test_synthetic_recovery(recovery_run):
    flow, gt, _, wall = recovery_run
    # judge pixels whose true correspondence stays in frame, away from the
    # descriptor border
    ys, xs = np.mgrid[0:128, 0:128]
    interior = ((xs + 18 <= 123) & (ys - 12 >= 4) & (xs >= 4) & (ys <= 123))
    est = FlowField(flow.u, flow.v, interior)
    ref = FlowField(gt.u, gt.v, interior)
    e = epe(est, ref)
    f1 = f1_all(est, ref)
    assert e < 1.0, f"interior EPE {e:.4f}"
    assert f1 < 5.0, f"interior F1-all {f1:.2f}%"
    assert wall < 10.0, f"wall time {wall:.2f}s"


@reported(6, "per-pixel best score never decreases across half-rounds")
def test_monotone_best_score(recovery_run):
    _, _, diag, _ = recovery_run
    traces = diag["traces"]
    assert traces and all(len(t) > 1 for t in traces)
    for trace in traces:
        for prev, cur in zip(trace, trace[1:]):
            assert np.all(cur.best_score >= prev.best_score)


@reported(7, "wider local search is at least as accurate on sub-pixel motion")
def test_search_radius_ablation_direction():
    def mean_epe(radius):
        rng = np.random.default_rng(11)
        errs = []
        for i in range(20):
            tx = float(rng.uniform(-5, 5))
            ty = float(rng.uniform(-5, 5))
            img1, img2, gt = translation_pair(48, 48, tx, ty, rng_seed=100 + i)
            cfg = EngineConfig(mode="propagate", schedule=(1,), iterations=3,
                               radius=radius, rng_seed=0, d_max=6.0)
            flow, _ = run_pyramid(img1, img2, cfg)
            m = 10
            errs.append(epe(FlowField(flow.u[m:-m, m:-m], flow.v[m:-m, m:-m]),
                            FlowField(gt.u[m:-m, m:-m], gt.v[m:-m, m:-m])))
        return float(np.mean(errs))

    assert mean_epe(2) <= mean_epe(1)


@reported(8, "local correlation equals the brute-force oracle exactly")
def test_local_correlation_exhaustive_oracle():
    rng = np.random.default_rng(3)
    for _ in range(50):
        d = int(rng.integers(0, 3))
        f1 = rng.standard_normal((8, 8, 4)).astype(np.float32)
        f2 = rng.standard_normal((8, 8, 4)).astype(np.float32)
        vol = local_correlation(f1, f2, d)
        k = 0
        for dy in range(-d, d + 1):
            for dx in range(-d, d + 1):
                for y in range(8):
                    for x in range(8):
                        ty = min(max(y + dy, 0), 7)
                        tx = min(max(x + dx, 0), 7)
                        want = np.float32(np.dot(f1[y, x].astype(np.float64),
                                                 f2[ty, tx].astype(np.float64)))
                        assert vol.scores[y, x, k] == want
                k += 1


@reported(9, "flow files round-trip bit-exactly")
def test_flow_file_roundtrips():
    rng = np.random.default_rng(4)
    for _ in range(1000):
        h = int(rng.integers(1, 8))
        w = int(rng.integers(1, 8))
        f = FlowField(rng.uniform(-100, 100, (h, w)).astype(np.float32),
                      rng.uniform(-100, 100, (h, w)).astype(np.float32))
        g = read_flo(write_flo(f))
        assert g.u.tobytes() == f.u.tobytes()
        assert g.v.tobytes() == f.v.tobytes()
    for _ in range(1000):
        h = int(rng.integers(1, 8))
        w = int(rng.integers(1, 8))
        q = rng.integers(-512 * 64, 512 * 64 + 1, (2, h, w))
        f = FlowField((q[0] / 64.0).astype(np.float32),
                      (q[1] / 64.0).astype(np.float32))
        g = read_kitti_png(write_kitti_png(f))
        assert np.array_equal(g.u, f.u) and np.array_equal(g.v, f.v)


@reported(10, "metric formulas are exact")
def test_metric_formulas():
    gt = FlowField.zeros(4, 4)
    est = FlowField.constant(4, 4, 3.0, 4.0)
    assert epe(est, gt) == 5.0
    want = np.array([0.512, 0.64, 0.8, 1.0])
    assert np.abs(sequence_weights(4, 0.8) - want).max() < 1e-12


@reported(11, "results are deterministic and independent of the thread cap")
def test_thread_count_does_not_change_results(tmp_path):
    pair = tmp_path / "pair"
    assert cli.main(["synth", str(pair), "--size", "48x48",
                     "--motion", "translate:3,-2", "--seed-rng", "1"]) == 0
    blobs = []
    for threads in ("1", "4"):
        out = tmp_path / f"flow_t{threads}.flo"
        assert cli.main(["estimate", str(pair / "img1.png"),
                         str(pair / "img2.png"), "-o", str(out),
                         "--seed-rng", "7", "--threads", threads]) == 0
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1]
