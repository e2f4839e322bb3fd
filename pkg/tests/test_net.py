import math

import numpy as np
import pytest

from paintrl.gradcheck import run_gradcheck
from paintrl.net import (
    ARCHS,
    Arch,
    CheckpointFormatError,
    ConvSpec,
    LOG_STD_MIN,
    forward,
    forward_batch,
    init_params,
    load_params,
    sample_action,
    save_params,
    trunk_shapes,
)

TINY = Arch(convs=(ConvSpec(3, 3, 2, 4), ConvSpec(2, 2, 1, 4)), fc_units=8)


def tiny_params(seed=0):
    return init_params(9, 18, seed, arch=TINY)


class TestInit:
    def test_seeded_determinism(self):
        a = init_params(41, 82, seed=0)
        b = init_params(41, 82, seed=0)
        for (_, wa), (_, wb) in zip(a.param_items(), b.param_items()):
            np.testing.assert_array_equal(wa, wb)

    def test_paper_preset_shapes(self):
        shapes, flat = trunk_shapes(ARCHS["default"], 41, 82)
        assert shapes == [(9, 19, 64), (3, 8, 64), (1, 6, 64)]
        assert flat == 384
        params = init_params(41, 82, seed=1)
        assert params.fc_w.shape == (384, 512)
        assert params.mean_w.shape == (512, 6)
        assert params.value_w.shape == (512, 1)
        assert params.log_std.shape == (6,)

    def test_log_std_initial_value(self):
        params = tiny_params()
        np.testing.assert_allclose(params.log_std, math.log(0.3))

    def test_too_small_observation_rejected(self):
        with pytest.raises(ValueError):
            init_params(8, 8, seed=0)  # default first conv is 8x8 stride 4


class TestForward:
    def test_deterministic(self):
        params = tiny_params()
        obs = np.random.default_rng(0).uniform(0, 1, (9, 18, 3))
        a = forward(params, obs)
        b = forward(params, obs)
        np.testing.assert_array_equal(a.mean, b.mean)
        assert a.value == b.value

    def test_mean_in_unit_interval(self):
        rng = np.random.default_rng(1)
        for seed in range(5):
            params = init_params(9, 18, seed, arch=TINY)
            out = forward(params, rng.uniform(0, 1, (9, 18, 3)))
            assert np.all(out.mean >= 0) and np.all(out.mean <= 1)

    def test_head_sizes(self):
        params = init_params(41, 82, seed=0)
        out = forward(params, np.zeros((41, 82, 3)))
        assert out.mean.shape == (6,)
        assert out.log_std.shape == (6,)
        assert isinstance(out.value, float)

    def test_shape_mismatch_rejected(self):
        params = tiny_params()
        with pytest.raises(ValueError):
            forward(params, np.zeros((9, 19, 3)))

    def test_shared_trunk_sensitivity(self):
        # nudging a trunk weight must move both heads
        params = tiny_params()
        obs = np.random.default_rng(2).uniform(0, 1, (9, 18, 3))
        base = forward(params, obs)
        params.conv_w[0][0, 0, 0, 0] += 0.5
        bumped = forward(params, obs)
        assert not np.allclose(bumped.mean, base.mean)
        assert bumped.value != base.value


class TestSampleAction:
    def test_reproducible_with_seed(self):
        params = tiny_params()
        out = forward(params, np.zeros((9, 18, 3)))
        a1 = sample_action(out, np.random.default_rng(7))
        a2 = sample_action(out, np.random.default_rng(7))
        np.testing.assert_array_equal(a1[0], a2[0])
        assert a1[1] == a2[1]

    def test_log_prob_matches_closed_form(self):
        params = tiny_params()
        out = forward(params, np.random.default_rng(3).uniform(0, 1, (9, 18, 3)))
        action, log_prob, raw = sample_action(out, np.random.default_rng(11))
        sigma = np.exp(out.log_std)
        expected = sum(
            -0.5 * ((raw[i] - out.mean[i]) / sigma[i]) ** 2
            - math.log(sigma[i])
            - 0.5 * math.log(2 * math.pi)
            for i in range(6)
        )
        assert log_prob == pytest.approx(expected, rel=1e-12)

    def test_tiny_sigma_collapses_to_mean(self):
        params = tiny_params()
        out = forward(params, np.zeros((9, 18, 3)))
        out.log_std = np.full(6, LOG_STD_MIN - 50.0)  # clipped up to sigma_min
        action, _, raw = sample_action(out, np.random.default_rng(0))
        np.testing.assert_allclose(raw, out.mean, atol=1e-2)

    def test_action_clipped_raw_kept(self):
        params = tiny_params()
        out = forward(params, np.zeros((9, 18, 3)))
        out.log_std = np.zeros(6)  # sigma 1: clipping is very likely
        action, _, raw = sample_action(out, np.random.default_rng(5))
        assert np.all(action >= 0) and np.all(action <= 1)
        np.testing.assert_array_equal(action, np.clip(raw, 0, 1))


class TestCheckpoint:
    def test_round_trip_bit_identical(self, tmp_path):
        # float32-representable parameters survive save -> load exactly
        params = tiny_params(seed=3).astype(np.float32).astype(np.float64)
        path = tmp_path / "net.ckpt"
        save_params(params, path)
        loaded = load_params(path)
        for (_, a), (_, b) in zip(params.param_items(), loaded.param_items()):
            np.testing.assert_array_equal(a, b)
        assert loaded.arch == params.arch
        assert (loaded.obs_h, loaded.obs_w) == (9, 18)

    def test_file_bytes_stable(self, tmp_path):
        params = tiny_params(seed=4)
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_params(params, p1)
        save_params(load_params(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(CheckpointFormatError, match="magic"):
            load_params(path)

    def test_truncated(self, tmp_path):
        params = tiny_params()
        path = tmp_path / "net.ckpt"
        save_params(params, path)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) // 2])
        with pytest.raises(CheckpointFormatError, match="truncated"):
            load_params(path)

    def test_trailing_bytes(self, tmp_path):
        params = tiny_params()
        path = tmp_path / "net.ckpt"
        save_params(params, path)
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(CheckpointFormatError, match="trailing"):
            load_params(path)

    def test_bad_version(self, tmp_path):
        params = tiny_params()
        path = tmp_path / "net.ckpt"
        save_params(params, path)
        blob = bytearray(path.read_bytes())
        blob[4] = 99
        path.write_bytes(bytes(blob))
        with pytest.raises(CheckpointFormatError, match="version"):
            load_params(path)


class TestGradients:
    def test_all_layers_match_finite_differences(self):
        result = run_gradcheck(seed=0)
        assert result.passed(), result.report()

    def test_zero_objective_zero_gradients(self):
        from paintrl.net import backward

        params = tiny_params()
        obs = np.random.default_rng(0).uniform(0, 1, (2, 9, 18, 3))

        def objective(mean, value, log_std):
            return 0.0, np.zeros_like(mean), np.zeros(len(value)), np.zeros(6)

        _, grads = backward(params, obs, objective)
        for name, g in grads.items():
            assert np.all(g == 0.0), name

    def test_linear_layer_closed_form(self):
        # squared error through the value head only: grad = 2 X^T (Xw - y) / m
        from paintrl.net import backward

        params = tiny_params(seed=9)
        for w in params.conv_w:
            w[:] = 0.0
        for b in params.conv_b:
            b[:] = 0.0
        params.fc_w[:] = 0.0
        params.fc_b[:] = 1.0  # hidden = relu(1) = 1 for every unit
        obs = np.random.default_rng(1).uniform(0, 1, (4, 9, 18, 3))
        target = np.array([0.5, -0.2, 0.1, 0.9])

        def objective(mean, value, log_std):
            err = value - target
            return float(np.mean(err**2)), np.zeros_like(mean), 2 * err / 4, None

        _, grads = backward(params, obs, objective)
        hidden = np.ones((4, params.arch.fc_units))
        value = hidden @ params.value_w + params.value_b
        expected_w = hidden.T @ (2 * (value[:, 0] - target) / 4)
        np.testing.assert_allclose(grads["value.w"][:, 0], expected_w, atol=1e-12)

    def test_corrupted_gradient_detected(self):
        result = run_gradcheck(seed=0, corrupt=True)
        assert not result.passed()
