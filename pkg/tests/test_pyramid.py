"""Tests for feature extraction and the multi-scale estimation schedule."""

import numpy as np
import pytest

from patchflow import (
    DimensionError,
    EngineConfig,
    FeatureConfig,
    FlowField,
    ParameterError,
    adaptive_levels,
    extract_features,
    run_pyramid,
    shift,
    warm_start,
)
from patchflow.synth import band_limited_texture, translation_pair


class TestFeatureConfig:
    def test_channel_counts(self):
        assert FeatureConfig("census7").channels == 48
        assert FeatureConfig("gradients").channels == 3
        assert FeatureConfig("census7+gradients").channels == 51

    def test_unknown_descriptor(self):
        with pytest.raises(ParameterError):
            FeatureConfig("sift")


class TestExtractFeatures:
    def test_constant_image_census_all_false_coded(self):
        img = np.full((9, 9), 7.0, dtype=np.float32)
        feats = extract_features(img, FeatureConfig("census7"))
        assert feats.shape == (9, 9, 48)
        assert np.all(feats == -1.0)

    def test_translation_equivariance_on_interior(self):
        img = band_limited_texture(24, 24, rng_seed=0)
        feats = extract_features(img)
        shifted_feats = extract_features(
            shift(img[:, :, None], (2, 1))[:, :, 0])
        ref = shift(feats, (2, 1))
        m = 5  # census half-window + shift
        assert np.array_equal(shifted_feats[m:-m, m:-m], ref[m:-m, m:-m])

    def test_unit_ramp_gradients(self):
        img = np.tile(np.arange(3, dtype=np.float32), (3, 1))
        feats = extract_features(img, FeatureConfig("gradients"))
        assert np.allclose(feats[1, 1], [1.0, 0.0, 1.0])

    def test_image_smaller_than_window_rejected(self):
        with pytest.raises(DimensionError):
            extract_features(np.zeros((5, 5), dtype=np.float32))

    def test_color_image_rejected(self):
        with pytest.raises(DimensionError):
            extract_features(np.zeros((9, 9, 3), dtype=np.float32))


class TestAdaptiveLevels:
    def test_zero_motion_single_level(self):
        sched = adaptive_levels(FlowField.zeros(8, 8), 1)
        assert tuple(sched) == (1,)

    def test_reach_rule_example(self):
        flow = FlowField.constant(8, 8, 40.0, 0.0)
        sched = adaptive_levels(flow, 1, radius=2, iterations=6)
        assert tuple(sched) == (4, 2, 1)

    def test_monotone_in_max_displacement(self):
        prev_len = 0
        for m in [0, 5, 10, 20, 40, 80, 160]:
            flow = FlowField.constant(4, 4, float(m), 0.0)
            sched = adaptive_levels(flow, 2, radius=2, iterations=6)
            assert len(sched) >= prev_len
            prev_len = len(sched)

    def test_ignores_invalid_pixels(self):
        flow = FlowField.zeros(4, 4)
        flow.u[0, 0] = 1000.0
        flow.valid[0, 0] = False
        assert tuple(adaptive_levels(flow, 1)) == (1,)


class TestWarmStart:
    def test_zero_flow_identity(self):
        out = warm_start(FlowField.zeros(4, 6))
        assert np.all(out.u == 0) and np.all(out.v == 0)
        assert np.all(out.valid)

    def test_constant_splat_leaves_source_hole(self):
        out = warm_start(FlowField.constant(4, 10, 5.0, 0.0))
        assert np.all(out.u[:, 5:] == 5.0)
        assert np.all(out.valid[:, 5:])
        assert np.all(~out.valid[:, :5])
        assert np.all(out.u[:, :5] == 0)

    def test_no_values_invented(self):
        rng = np.random.default_rng(0)
        flow = FlowField(rng.uniform(-3, 3, (8, 8)).astype(np.float32),
                         rng.uniform(-3, 3, (8, 8)).astype(np.float32))
        out = warm_start(flow)
        src = {(round(float(u), 4), round(float(v), 4))
               for u, v in zip(flow.u.ravel(), flow.v.ravel())}
        for y in range(8):
            for x in range(8):
                if out.valid[y, x]:
                    key = (round(float(out.u[y, x]), 4),
                           round(float(out.v[y, x]), 4))
                    assert key in src

    def test_collision_keeps_larger_magnitude(self):
        flow = FlowField.zeros(1, 4)
        # pixels 0 and 3 both land on pixel 2; the larger flow wins
        flow.u[0, 0] = 2.0
        flow.u[0, 3] = -1.0
        out = warm_start(flow)
        assert out.u[0, 2] == 2.0


class TestRunPyramid:
    def test_identical_frames_near_zero_flow(self):
        img = band_limited_texture(48, 48, rng_seed=2)
        cfg = EngineConfig(mode="propagate", schedule=(2, 1), iterations=6,
                           rng_seed=0, d_max=4.0)
        flow, _ = run_pyramid(img, img, cfg)
        mag = np.hypot(flow.u, flow.v)
        assert float(np.median(mag)) < 0.1

    def test_ground_truth_init_does_not_hurt(self):
        img1, img2, gt = translation_pair(64, 64, 5, -3, rng_seed=4)
        cfg = EngineConfig(mode="propagate", schedule=(2, 1), iterations=3,
                           rng_seed=0, d_max=8.0)
        flow_cold, _ = run_pyramid(img1, img2, cfg)
        flow_warm, _ = run_pyramid(img1, img2, cfg, init=gt)
        ys, xs = np.mgrid[0:64, 0:64]
        interior = (xs + 5 <= 59) & (ys - 3 >= 4) & (xs >= 4) & (ys <= 59)
        err_cold = np.hypot(flow_cold.u - 5, flow_cold.v + 3)[interior].mean()
        err_warm = np.hypot(flow_warm.u - 5, flow_warm.v + 3)[interior].mean()
        assert err_warm <= err_cold + 1e-9

    def test_single_level_schedule_matches_direct_iteration(self):
        img1, img2, _ = translation_pair(32, 32, 2, 1, rng_seed=5)
        cfg = EngineConfig(mode="propagate", schedule=(1,), iterations=3,
                           rng_seed=0, d_max=4.0)
        flow, diag = run_pyramid(img1, img2, cfg, collect_traces=True)
        assert len(diag["levels"]) == 1
        assert diag["levels"][0]["trace_length"] == 6
        last = diag["traces"][0][-1].flow
        assert np.array_equal(flow.u, last.u) and np.array_equal(flow.v, last.v)

    def test_pads_and_crops_non_divisible_sizes(self):
        img1, img2, _ = translation_pair(30, 34, 1, 1, rng_seed=6)
        cfg = EngineConfig(mode="propagate", schedule=(4, 1), iterations=1,
                           rng_seed=0, d_max=2.0)
        flow, _ = run_pyramid(img1, img2, cfg)
        assert flow.shape == (30, 34)

    def test_schedule_validation(self):
        img = band_limited_texture(16, 16, rng_seed=7)
        for bad in [(1, 4), (4, 4), ()]:
            cfg = EngineConfig(mode="propagate", schedule=bad or (1,),
                               iterations=1, rng_seed=0)
            if bad:
                with pytest.raises(ParameterError):
                    run_pyramid(img, img, cfg)

    def test_diagnostics_counters_present(self):
        img1, img2, _ = translation_pair(32, 32, 1, 0, rng_seed=8)
        cfg = EngineConfig(mode="inverse-exact", schedule=(2,), iterations=2,
                           rng_seed=0, d_max=2.0)
        _, diag = run_pyramid(img1, img2, cfg)
        lvl = diag["levels"][0]
        assert lvl["counters"]["target_shifts"] == 4
        assert lvl["counters"]["stack_warp_calls"] == 2
