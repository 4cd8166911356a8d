"""Tests for flow evaluation metrics and the weighted sequence loss."""

import numpy as np
import pytest

from patchflow import (
    FlowField,
    epe,
    evaluate,
    f1_all,
    sequence_loss,
    sequence_weights,
)


def constant_gt(h=4, w=4, u=0.0, v=0.0):
    return FlowField.constant(h, w, u, v)


class TestEpe:
    def test_identity_is_zero(self):
        gt = constant_gt(u=2.0, v=-1.0)
        assert epe(gt, gt) == 0.0

    def test_three_four_five(self):
        gt = constant_gt()
        est = constant_gt(u=3.0, v=4.0)
        assert epe(est, gt) == 5.0

    def test_half_pixels_off_average(self):
        gt = FlowField.zeros(2, 2)
        est = FlowField.zeros(2, 2)
        est.u[0, :] = 1.0  # half the pixels off by (1, 0)
        assert epe(est, gt) == 0.5

    def test_only_valid_pixels_counted(self):
        gt = FlowField.zeros(2, 2)
        gt.valid[0, 0] = False
        est = FlowField.zeros(2, 2)
        est.u[0, 0] = 100.0
        assert epe(est, gt) == 0.0

    def test_no_valid_pixels_rejected(self):
        gt = FlowField.zeros(2, 2)
        gt.valid[:] = False
        with pytest.raises(ValueError):
            epe(FlowField.zeros(2, 2), gt)


class TestF1All:
    def test_identity_is_zero(self):
        gt = constant_gt(u=1.0)
        assert f1_all(gt, gt) == 0.0

    def test_both_thresholds_exceeded(self):
        gt = constant_gt(u=10.0)
        est = constant_gt(u=20.0)  # error 10 > 3 px and > 5% of 10
        assert f1_all(est, gt) == 100.0

    def test_large_magnitude_relative_rule(self):
        gt = constant_gt(u=100.0)
        est = constant_gt(u=104.0)  # 4 > 3 px but 4 < 5% of 100
        assert f1_all(est, gt) == 0.0

    def test_monotone_under_growing_error(self):
        rng = np.random.default_rng(0)
        gt = FlowField(rng.uniform(-5, 5, (8, 8)).astype(np.float32),
                       rng.uniform(-5, 5, (8, 8)).astype(np.float32))
        prev = 0.0
        for scale in [0.0, 2.0, 4.0, 8.0]:
            est = FlowField(gt.u + scale, gt.v.copy())
            cur = f1_all(est, gt)
            assert cur >= prev
            prev = cur


class TestEvaluate:
    def test_report_text_format(self):
        gt = constant_gt(u=1.0)
        text = evaluate(gt, gt).to_text()
        assert text == "epe=0.000000 f1_all=0.000000 n=16"


class TestSequenceLoss:
    def test_weights_for_four_outputs(self):
        w = sequence_weights(4, 0.8)
        assert np.allclose(w, [0.512, 0.64, 0.8, 1.0], atol=1e-12)

    def test_exact_trace_is_zero(self):
        gt = constant_gt(u=1.0, v=2.0)
        assert sequence_loss([gt, gt, gt], gt) == 0.0

    def test_hand_evaluated_two_step_case(self):
        gt = FlowField.zeros(2, 2)
        first = FlowField.constant(2, 2, 1.0, 1.0)   # mean L1 error 1.0
        second = FlowField.constant(2, 2, 0.5, 0.5)  # mean L1 error 0.5
        loss = sequence_loss([first, second], gt, gamma=0.8)
        assert np.isclose(loss, 0.8 * 1.0 + 1.0 * 0.5, atol=1e-12)

    def test_gamma_one_is_unweighted_sum(self):
        rng = np.random.default_rng(1)
        gt = FlowField.zeros(3, 3)
        trace = [FlowField(rng.uniform(-2, 2, (3, 3)).astype(np.float32),
                           rng.uniform(-2, 2, (3, 3)).astype(np.float32))
                 for _ in range(4)]
        loss = sequence_loss(trace, gt, gamma=1.0)
        expected = sum(np.mean(np.concatenate([np.abs(t.u), np.abs(t.v)]))
                       for t in trace)
        assert np.isclose(loss, expected, atol=1e-12)

    def test_empty_trace_rejected(self):
        with pytest.raises(ValueError):
            sequence_loss([], FlowField.zeros(2, 2))
