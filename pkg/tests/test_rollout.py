import numpy as np
import pytest

from paintrl.env import EnvConfig, new_canvas
from paintrl.losses import LossKind, loss_l2
from paintrl.net import init_params
from paintrl.rollout import (
    RolloutConfig,
    format_stroke_log,
    paint,
    paint_multiscale,
    parse_stroke_log,
    replay_stroke_log,
)

ENV = EnvConfig(l_max=8, w_max=4, h_o=9, w_o=9)
L2 = LossKind("l2")


def tiny_params(seed=0):
    return init_params(ENV.h_o, 2 * ENV.w_o, seed, arch="tiny")


def optimistic(params, value=5.0):
    """Value head pinned to a constant positive prediction."""
    params.value_w[:] = 0.0
    params.value_b[:] = value
    return params


def pessimistic(params):
    """Value head pinned below the stop threshold."""
    params.value_w[:] = 0.0
    params.value_b[:] = -1.0
    return params


class TestRolloutConfig:
    def test_scales_must_end_at_native(self):
        with pytest.raises(ValueError):
            RolloutConfig(scales=(0.5,))

    def test_scales_strictly_increasing(self):
        with pytest.raises(ValueError):
            RolloutConfig(scales=(0.5, 0.5, 1.0))
        with pytest.raises(ValueError):
            RolloutConfig(scales=(-0.5, 1.0))

    def test_caps_positive(self):
        with pytest.raises(ValueError):
            RolloutConfig(max_strokes_total=0)

    def test_defaults_valid(self):
        cfg = RolloutConfig()
        assert cfg.scales == (1.0,)


class TestPaint:
    def test_solved_canvas_paints_nothing(self):
        ref = np.random.default_rng(0).uniform(0, 1, (16, 16, 3))
        cfg = RolloutConfig(thresh_sim=0.01, max_strokes_total=10)
        canvas, log = paint(ref, optimistic(tiny_params()), cfg, ENV, L2,
                            init_canvas=ref)
        assert log == []
        np.testing.assert_array_equal(canvas, ref)

    def test_pessimistic_value_paints_nothing(self):
        ref = np.random.default_rng(1).uniform(0, 1, (16, 16, 3))
        cfg = RolloutConfig(thresh_sim=0.0, max_strokes_total=5,
                            max_segments_per_stroke=3)
        canvas, log = paint(ref, pessimistic(tiny_params()), cfg, ENV, L2)
        assert log == []  # every stroke stops before its first segment
        np.testing.assert_array_equal(canvas, new_canvas(16, 16))

    def test_caps_terminate(self):
        ref = np.zeros((16, 16, 3))
        cfg = RolloutConfig(thresh_sim=0.0, max_strokes_total=4,
                            max_segments_per_stroke=2)
        canvas, log = paint(ref, optimistic(tiny_params()), cfg, ENV, L2)
        strokes = {e.stroke for e in log}
        assert len(strokes) <= 4
        assert all(e.segment < 2 for e in log)

    def test_deterministic(self):
        ref = np.random.default_rng(2).uniform(0, 1, (20, 20, 3))
        cfg = RolloutConfig(thresh_sim=0.0, max_strokes_total=6, seed=9)
        runs = [paint(ref, optimistic(tiny_params(3)), cfg, ENV, L2) for _ in range(2)]
        np.testing.assert_array_equal(runs[0][0], runs[1][0])
        assert runs[0][1] == runs[1][1]

    def test_stroke_log_replays_bit_identically(self):
        ref = np.random.default_rng(3).uniform(0, 1, (24, 24, 3))
        cfg = RolloutConfig(thresh_sim=0.0, max_strokes_total=12,
                            max_segments_per_stroke=4, seed=4)
        canvas, log = paint(ref, optimistic(tiny_params(5)), cfg, ENV, L2)
        assert len(log) > 0
        replayed = replay_stroke_log(log, 24, 24, ENV)
        np.testing.assert_array_equal(replayed, canvas)

    def test_log_round_trips_through_text(self):
        ref = np.random.default_rng(4).uniform(0, 1, (18, 18, 3))
        cfg = RolloutConfig(thresh_sim=0.0, max_strokes_total=5, seed=1)
        canvas, log = paint(ref, optimistic(tiny_params(6)), cfg, ENV, L2)
        parsed = parse_stroke_log(format_stroke_log(log))
        assert parsed == log
        replayed = replay_stroke_log(parsed, 18, 18, ENV)
        np.testing.assert_array_equal(replayed, canvas)

    def test_parse_rejects_bad_header(self):
        with pytest.raises(ValueError):
            parse_stroke_log("x,y\n1,2\n")


class TestPaintMultiscale:
    def test_single_scale_equals_paint(self):
        ref = np.random.default_rng(5).uniform(0, 1, (20, 20, 3))
        cfg = RolloutConfig(thresh_sim=0.0, max_strokes_total=7, seed=11)
        params = optimistic(tiny_params(7))
        direct, direct_log = paint(ref, params, cfg, ENV, L2)
        multi, multi_log = paint_multiscale(ref, params, cfg, ENV, L2)
        np.testing.assert_array_equal(multi, direct)
        assert multi_log == direct_log

    def test_output_matches_reference_dimensions(self):
        ref = np.random.default_rng(6).uniform(0, 1, (26, 34, 3))
        cfg = RolloutConfig(thresh_sim=0.0, max_strokes_total=3,
                            scales=(0.5, 1.0), seed=2)
        canvas, _ = paint_multiscale(ref, optimistic(tiny_params(8)), cfg, ENV, L2)
        assert canvas.shape == ref.shape

    def test_later_scales_start_from_upsampled_canvas(self):
        # a pessimistic value head never paints, so the outcome is just the
        # blank coarse canvas carried up: still all white
        ref = np.random.default_rng(7).uniform(0, 1, (16, 16, 3))
        cfg = RolloutConfig(thresh_sim=0.0, max_strokes_total=2,
                            scales=(0.5, 1.0), seed=3)
        canvas, log = paint_multiscale(ref, pessimistic(tiny_params(9)), cfg, ENV, L2)
        assert log == []
        np.testing.assert_array_equal(canvas, new_canvas(16, 16))
