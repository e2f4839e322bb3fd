import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paintrl.env import (
    EnvConfig,
    PaintEnv,
    advance_pen,
    clamp_pen,
    decode_action,
    extract_patches,
    new_canvas,
    render_segment,
)
from paintrl.losses import LossKind, loss_l2

CFG = EnvConfig(l_max=16.0, w_max=4.0, h_o=5, w_o=5)


class TestNewCanvas:
    def test_white_fill(self):
        canvas = new_canvas(2, 2)
        assert canvas.shape == (2, 2, 3)
        assert np.all(canvas == 1.0)

    def test_gray_pixel(self):
        canvas = new_canvas(1, 1, (0.5, 0.5, 0.5))
        np.testing.assert_array_equal(canvas[0, 0], [0.5, 0.5, 0.5])

    def test_zero_dimension_rejected(self):
        with pytest.raises(ValueError):
            new_canvas(0, 4)

    def test_out_of_range_fill_rejected(self):
        with pytest.raises(ValueError):
            new_canvas(2, 2, (1.5, 0.0, 0.0))


class TestDecodeAction:
    def test_all_zero(self):
        s = decode_action(np.zeros(6), CFG)
        assert (s.angle, s.length, s.width) == (0.0, 0.0, 0.0)
        assert s.color == (0.0, 0.0, 0.0)

    def test_endpoints(self):
        s = decode_action(np.array([0.5, 1, 1, 1, 1, 1]), CFG)
        assert s.angle == pytest.approx(math.pi)
        assert s.length == 16.0
        assert s.width == 4.0
        assert s.color == (1.0, 1.0, 1.0)

    def test_midpoints(self):
        s = decode_action(np.array([0.25, 0.5, 0.5, 1, 0, 0]), CFG)
        assert s.angle == pytest.approx(math.pi / 2)
        assert s.length == 8.0
        assert s.width == 2.0
        assert s.color == (1.0, 0.0, 0.0)

    def test_angle_wraps_at_full_turn(self):
        assert decode_action(np.array([1.0, 0, 0, 0, 0, 0]), CFG).angle == 0.0

    def test_component_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            decode_action(np.array([0, 0, 1.2, 0, 0, 0]), CFG)
        with pytest.raises(ValueError):
            decode_action(np.array([0, 0, 0, 0, 0]), CFG)

    @given(st.floats(0, 1), st.floats(0, 1))
    @settings(max_examples=30, deadline=None)
    def test_monotone_in_length(self, a, b):
        lo, hi = sorted([a, b])
        assert (
            decode_action(np.array([0, lo, 0, 0, 0, 0]), CFG).length
            <= decode_action(np.array([0, hi, 0, 0, 0, 0]), CFG).length
        )


class TestAdvancePen:
    def test_angle_zero_moves_down(self):
        assert advance_pen((10, 10), 0.0, 5.0) == (10.0, 15.0)

    def test_quarter_turn_moves_right(self):
        x, y = advance_pen((10, 10), math.pi / 2, 5.0)
        assert x == pytest.approx(15.0)
        assert y == pytest.approx(10.0, abs=1e-12)

    def test_diagonal(self):
        x, y = advance_pen((10, 10), math.pi / 4, math.sqrt(2))
        assert (x, y) == (pytest.approx(11.0), pytest.approx(11.0))


class TestRenderSegment:
    def test_zero_width_unchanged(self):
        canvas = new_canvas(4, 4)
        out = render_segment(canvas, (0, 0), (3, 3), 0.0, (1, 0, 0), 1.0)
        np.testing.assert_array_equal(out, canvas)

    def test_full_coverage_replaces_exactly(self):
        canvas = new_canvas(4, 4)
        out = render_segment(canvas, (0, 1.5), (3, 1.5), 10.0, (1, 0, 0), 1.0)
        assert np.all(out == np.array([1.0, 0.0, 0.0]))

    def test_blend_formula(self):
        canvas = new_canvas(4, 4)
        out = render_segment(canvas, (0, 1.5), (3, 1.5), 10.0, (0, 0, 0), 0.6)
        np.testing.assert_allclose(out, 0.4, atol=1e-15)

    def test_beta_zero_is_identity(self):
        canvas = np.random.default_rng(0).uniform(0, 1, (5, 5, 3))
        out = render_segment(canvas, (1, 1), (4, 3), 3.0, (0.2, 0.4, 0.6), 0.0)
        np.testing.assert_array_equal(out, canvas)

    def test_beta_one_idempotent(self):
        canvas = np.random.default_rng(1).uniform(0, 1, (6, 6, 3))
        once = render_segment(canvas, (1, 1), (4, 4), 2.0, (0.3, 0.1, 0.9), 1.0)
        twice = render_segment(once, (1, 1), (4, 4), 2.0, (0.3, 0.1, 0.9), 1.0)
        np.testing.assert_array_equal(once, twice)

    def test_input_not_mutated(self):
        canvas = new_canvas(4, 4)
        before = canvas.copy()
        render_segment(canvas, (0, 0), (3, 3), 2.0, (0, 0, 0), 1.0)
        np.testing.assert_array_equal(canvas, before)

    def test_capsule_coverage_by_distance(self):
        # pixel centers within width/2 of the segment are painted, others not
        canvas = new_canvas(7, 7)
        start, end, width = (1.0, 3.0), (5.0, 3.0), 2.0
        out = render_segment(canvas, start, end, width, (0, 0, 0), 1.0)
        for i in range(7):
            for j in range(7):
                t = min(max((j - start[0]) / (end[0] - start[0]), 0.0), 1.0)
                px, py = start[0] + t * (end[0] - start[0]), start[1]
                dist = math.hypot(j - px, i - py)
                painted = bool(np.all(out[i, j] == 0.0))
                assert painted == (dist <= width / 2)

    def test_below_w_eps_unchanged(self):
        canvas = new_canvas(4, 4)
        out = render_segment(canvas, (0, 0), (3, 3), 0.4, (0, 0, 0), 1.0, w_eps=0.5)
        np.testing.assert_array_equal(out, canvas)


class TestExtractPatches:
    def test_full_frame_crop(self):
        rng = np.random.default_rng(3)
        canvas = rng.uniform(0, 1, (5, 5, 3))
        ref = rng.uniform(0, 1, (5, 5, 3))
        obs = extract_patches(canvas, ref, (2.0, 2.0), CFG)
        np.testing.assert_array_equal(obs[:, :5], canvas)
        np.testing.assert_array_equal(obs[:, 5:], ref)

    def test_corner_pen_pads_upper_left(self):
        rng = np.random.default_rng(4)
        canvas = rng.uniform(0, 1, (8, 8, 3))
        ref = rng.uniform(0, 1, (8, 8, 3))
        obs = extract_patches(canvas, ref, (0.0, 0.0), CFG)
        expected = np.full((5, 5, 3), CFG.pad_value)
        expected[2:, 2:] = canvas[:3, :3]
        np.testing.assert_array_equal(obs[:, :5], expected)
        expected[2:, 2:] = ref[:3, :3]
        np.testing.assert_array_equal(obs[:, 5:], expected)

    def test_paper_scale_shape(self):
        cfg = EnvConfig(h_o=41, w_o=41)
        canvas = new_canvas(64, 64)
        obs = extract_patches(canvas, canvas, (10.3, 50.2), cfg)
        assert obs.shape == (41, 82, 3)
        assert obs.min() >= 0 and obs.max() <= 1

    def test_translation_consistency(self):
        rng = np.random.default_rng(5)
        canvas = rng.uniform(0, 1, (12, 12, 3))
        ref = rng.uniform(0, 1, (12, 12, 3))
        base = extract_patches(canvas, ref, (5.0, 6.0), CFG)
        shifted = extract_patches(
            np.roll(canvas, (2, 1), axis=(0, 1)),
            np.roll(ref, (2, 1), axis=(0, 1)),
            (6.0, 8.0),
            CFG,
        )
        np.testing.assert_array_equal(base, shifted)


class TestEnvReset:
    def test_defaults(self):
        ref = np.full((9, 9, 3), 0.5)
        env = PaintEnv(ref, CFG)
        assert np.all(env.canvas == 1.0)
        assert env.pen == (4.0, 4.0)
        assert env.step_count == 0
        assert env.initial_loss == pytest.approx(loss_l2(env.canvas, ref), abs=1e-15)
        assert env.prev_loss == env.initial_loss

    def test_init_canvas_equal_reference(self):
        ref = np.random.default_rng(0).uniform(0, 1, (8, 8, 3))
        env = PaintEnv(ref, CFG, init_canvas=ref)
        assert env.initial_loss == 0.0

    def test_shape_mismatch_rejected(self):
        ref = new_canvas(8, 8)
        with pytest.raises(ValueError):
            PaintEnv(ref, CFG, init_canvas=new_canvas(8, 9))

    def test_reset_returns_observation(self):
        ref = np.full((9, 9, 3), 0.5)
        env = PaintEnv(ref, CFG)
        obs = env.reset(ref)
        assert obs.shape == (CFG.h_o, 2 * CFG.w_o, 3)


def _perfect_action(env_cfg):
    """Reference and action such that one stroke repaints it exactly."""
    action = np.array([0.25, 0.5, 1.0, 0.2, 0.6, 0.9])
    ref = new_canvas(9, 9)
    env = PaintEnv(ref, env_cfg)
    env.step(action)
    return env.canvas.copy(), action


class TestEnvStep:
    def test_perfect_stroke_reward_one(self):
        ref, action = _perfect_action(CFG)
        env = PaintEnv(ref, CFG)
        reward, _ = env.step(action)
        assert reward == pytest.approx(1.0, abs=1e-12)
        assert env.prev_loss == pytest.approx(0.0, abs=1e-15)

    def test_zero_width_reward_zero(self):
        ref = np.full((9, 9, 3), 0.3)
        env = PaintEnv(ref, CFG)
        before = env.canvas.copy()
        reward, _ = env.step(np.array([0.3, 0.5, 0.0, 0.1, 0.1, 0.1]))
        assert reward == 0.0
        np.testing.assert_array_equal(env.canvas, before)
        assert env.pen != (4.0, 4.0)
        assert env.step_count == 1

    def test_width_below_eps_moves_pen_only(self):
        ref = np.full((9, 9, 3), 0.3)
        env = PaintEnv(ref, CFG)
        before = env.canvas.copy()
        # w_eps 0.5 with w_max 4: component 0.1 gives width 0.4 < w_eps
        env.step(np.array([0.0, 0.4, 0.1, 0.0, 0.0, 0.0]))
        np.testing.assert_array_equal(env.canvas, before)
        assert env.pen[1] > 4.0

    def test_telescoping_sum(self):
        rng = np.random.default_rng(17)
        ref = rng.uniform(0, 1, (12, 12, 3))
        env = PaintEnv(ref, CFG)
        total = sum(env.step(rng.uniform(0, 1, 6))[0] for _ in range(20))
        direct = (loss_l2(new_canvas(12, 12), ref) - loss_l2(env.canvas, ref)) / loss_l2(
            new_canvas(12, 12), ref
        )
        assert total == pytest.approx(direct, abs=1e-9)

    def test_lhalf_telescoping(self):
        from paintrl.losses import loss_lhalf

        rng = np.random.default_rng(23)
        ref = rng.uniform(0, 1, (10, 10, 3))
        env = PaintEnv(ref, CFG, loss=LossKind("lhalf"))
        total = sum(env.step(rng.uniform(0, 1, 6))[0] for _ in range(15))
        l0 = loss_lhalf(new_canvas(10, 10), ref)
        assert total == pytest.approx((l0 - loss_lhalf(env.canvas, ref)) / l0, abs=1e-9)

    def test_solved_episode_rewards_zero(self):
        ref = new_canvas(9, 9)  # white reference, white canvas: initial loss 0
        env = PaintEnv(ref, CFG)
        reward, _ = env.step(np.array([0.1, 0.5, 1.0, 0.0, 0.0, 0.0]))
        assert reward == 0.0

    def test_perceptual_loss_kind(self):
        rng = np.random.default_rng(31)
        ref = rng.uniform(0, 1, (16, 16, 3))
        env = PaintEnv(ref, CFG, loss=LossKind("perceptual"))
        total = sum(env.step(rng.uniform(0, 1, 6))[0] for _ in range(5))
        expected = (env.initial_loss - env.prev_loss) / env.initial_loss
        assert total == pytest.approx(expected, abs=1e-9)


class TestInvariants:
    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_canvas_range_and_pen_bounds(self, seed):
        rng = np.random.default_rng(seed)
        ref = rng.uniform(0, 1, (10, 13, 3))
        env = PaintEnv(ref, EnvConfig(l_max=30, w_max=6, h_o=5, w_o=5, beta=0.7))
        for _ in range(8):
            env.step(rng.uniform(0, 1, 6))
            assert env.canvas.min() >= 0.0 and env.canvas.max() <= 1.0
            assert 0 <= env.pen[0] <= 12 and 0 <= env.pen[1] <= 9

    def test_deterministic_episode(self):
        rng = np.random.default_rng(8)
        ref = rng.uniform(0, 1, (11, 11, 3))
        actions = rng.uniform(0, 1, (10, 6))
        canvases = []
        for _ in range(2):
            env = PaintEnv(ref, CFG)
            for a in actions:
                env.step(a)
            canvases.append(env.canvas.copy())
        np.testing.assert_array_equal(canvases[0], canvases[1])

    def test_incremental_loss_matches_full_recompute(self):
        rng = np.random.default_rng(41)
        ref = rng.uniform(0, 1, (14, 14, 3))
        env = PaintEnv(ref, CFG)
        for _ in range(12):
            env.step(rng.uniform(0, 1, 6))
        assert env.prev_loss == pytest.approx(loss_l2(env.canvas, ref), abs=1e-12)

    def test_clamp_pen(self):
        assert clamp_pen((-3.0, 99.0), 10, 20) == (0.0, 9.0)
