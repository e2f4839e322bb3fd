import numpy as np
import pytest
from PIL import Image

from paintrl.config import ConfigError, default_config_text, format_config, parse_config
from paintrl.pngio import load_png, save_png
from paintrl.trainer import TrainConfig


class TestConfigParsing:
    def test_defaults_round_trip(self):
        cfg = TrainConfig()
        assert parse_config(format_config(cfg)) == cfg

    def test_default_text_parses(self):
        assert parse_config(default_config_text()) == TrainConfig()

    def test_values_and_comments(self):
        cfg = parse_config(
            "# a comment\n"
            "gamma = 0.9  # inline comment\n"
            "episodes = 12\n"
            "curriculum = false\n"
            "loss = lhalf\n"
            "\n"
            "h_o = 11\n"
        )
        assert cfg.gamma == 0.9
        assert cfg.episodes == 12
        assert cfg.curriculum is False
        assert cfg.loss == "lhalf"
        assert cfg.env.h_o == 11

    def test_unknown_key_named_in_error(self):
        with pytest.raises(ConfigError, match="gamm"):
            parse_config("gamm = 0.9\n")

    def test_bad_value_type(self):
        with pytest.raises(ConfigError, match="episodes"):
            parse_config("episodes = soon\n")

    def test_bad_bool(self):
        with pytest.raises(ConfigError, match="curriculum"):
            parse_config("curriculum = maybe\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("gamma = 0.9\ngamma = 0.8\n")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="key = value"):
            parse_config("gamma 0.9\n")

    def test_invalid_combination_reported(self):
        with pytest.raises(ConfigError):
            parse_config("w_eps = 9.0\nw_max = 4.0\n")


class TestPngIO:
    def test_round_trip_exact_for_8bit_values(self, tmp_path):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, (9, 7, 3)).astype(np.float64) / 255.0
        path = tmp_path / "img.png"
        save_png(img, path)
        np.testing.assert_array_equal(load_png(path), img)

    def test_decode_divides_by_255(self, tmp_path):
        path = tmp_path / "gray.png"
        Image.fromarray(np.full((2, 2, 3), 128, dtype=np.uint8), "RGB").save(path)
        assert load_png(path)[0, 0, 0] == 128 / 255.0

    def test_encode_rounds_half_up(self, tmp_path):
        # 0.5/255 scales to exactly 0.5, which must round to 1, not 0
        img = np.full((1, 1, 3), 0.5 / 255.0)
        path = tmp_path / "halfup.png"
        save_png(img, path)
        assert np.asarray(Image.open(path))[0, 0, 0] == 1

    def test_alpha_rejected(self, tmp_path):
        path = tmp_path / "rgba.png"
        Image.new("RGBA", (4, 4), (10, 20, 30, 128)).save(path)
        with pytest.raises(ValueError, match="alpha"):
            load_png(path)

    def test_grayscale_widened(self, tmp_path):
        path = tmp_path / "gray.png"
        Image.new("L", (3, 3), 200).save(path)
        img = load_png(path)
        assert img.shape == (3, 3, 3)
        assert np.all(img == 200 / 255.0)

    def test_save_byte_deterministic(self, tmp_path):
        img = np.random.default_rng(1).uniform(0, 1, (16, 16, 3))
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        save_png(img, a)
        save_png(img, b)
        assert a.read_bytes() == b.read_bytes()
