import io

import numpy as np
import pytest
from PIL import Image as PILImage

from lungline.preprocess import (
    AugmentConfig,
    DecodeError,
    Image,
    NormalizationSpec,
    UnsupportedFormatError,
    augment,
    decode_image,
    resize_bilinear,
    resize_image,
    rotate_bilinear,
    sample_augment_params,
    to_model_input,
)

from oracles import bilinear_resize_oracle

BLACK = (0 - 0.0960) / 0.9341
WHITE = (1 - 0.0960) / 0.9341


def png_bytes(array, mode=None):
    buf = io.BytesIO()
    PILImage.fromarray(array, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


class TestDecode:
    def test_white_and_black_pixel(self):
        assert decode_image(png_bytes(np.full((1, 1), 255, np.uint8))).pixels.item() == 255
        assert decode_image(png_bytes(np.zeros((1, 1), np.uint8))).pixels.item() == 0

    def test_truncated(self):
        data = png_bytes((np.arange(64 * 64) % 251).astype(np.uint8).reshape(64, 64))
        with pytest.raises(DecodeError):
            decode_image(data[: len(data) // 2])

    def test_garbage(self):
        with pytest.raises(DecodeError):
            decode_image(b"not a png at all")

    def test_16bit_keeps_high_byte(self):
        arr = np.array([[0xABCD, 0x00FF], [0xFF00, 0xFFFF]], dtype=np.uint16)
        img = decode_image(png_bytes(arr))
        assert img.pixels[:, :, 0].tolist() == [[0xAB, 0x00], [0xFF, 0xFF]]

    def test_rgb(self):
        arr = np.zeros((2, 3, 3), np.uint8)
        arr[..., 0] = 200
        img = decode_image(png_bytes(arr))
        assert (img.height, img.width, img.channels) == (2, 3, 3)

    def test_alpha_rejected(self):
        with pytest.raises(UnsupportedFormatError):
            decode_image(png_bytes(np.zeros((2, 2, 4), np.uint8), mode="RGBA"))

    def test_non_png_rejected(self):
        buf = io.BytesIO()
        PILImage.fromarray(np.zeros((4, 4), np.uint8)).save(buf, format="BMP")
        with pytest.raises(UnsupportedFormatError):
            decode_image(buf.getvalue())


class TestModelInput:
    def test_black(self):
        out = to_model_input(Image(np.zeros((10, 13), np.uint8)))
        assert out.shape == (3, 224, 224) and out.dtype == np.float32
        np.testing.assert_allclose(out, -0.102772, atol=1e-6)
        np.testing.assert_allclose(out, BLACK, rtol=1e-6)

    def test_white(self):
        out = to_model_input(Image(np.full((300, 250), 255, np.uint8)))
        np.testing.assert_allclose(out, 0.967776, atol=1e-6)
        np.testing.assert_allclose(out, WHITE, rtol=1e-6)

    def test_channels_identical_and_bounded(self):
        px = np.random.default_rng(0).integers(0, 256, (57, 91), dtype=np.uint8)
        out = to_model_input(Image(px))
        assert np.array_equal(out[0], out[1]) and np.array_equal(out[1], out[2])
        assert out.min() >= np.float32(BLACK) and out.max() <= np.float32(WHITE)

    def test_rgb_uses_bt601_luma(self):
        px = np.zeros((224, 224, 3), np.uint8)
        px[..., 0], px[..., 1], px[..., 2] = 100, 50, 200
        out = to_model_input(Image(px))
        gray = (0.299 * 100 + 0.587 * 50 + 0.114 * 200) / 255
        np.testing.assert_allclose(out, (gray - 0.096) / 0.9341, rtol=1e-6)
        assert np.array_equal(out[0], out[2])

    def test_224_input_is_not_resampled(self):
        px = np.random.default_rng(1).integers(0, 256, (224, 224), dtype=np.uint8)
        out = to_model_input(Image(px))
        np.testing.assert_allclose(out[0], (px / 255 - 0.096) / 0.9341, rtol=1e-6, atol=1e-7)
        assert np.array_equal(resize_image(Image(px)).pixels[:, :, 0], px)

    def test_custom_normalization(self):
        norm = NormalizationSpec(mean=(0.5, 0.5, 0.5), std=(0.5, 0.5, 0.5))
        np.testing.assert_allclose(to_model_input(Image(np.zeros((4, 4), np.uint8)), norm), -1.0)
        with pytest.raises(ValueError):
            NormalizationSpec(std=(1.0, 0.0, 1.0))


@pytest.mark.parametrize("shape, out", [((7, 5), (11, 13)), ((40, 30), (9, 17)), ((1, 3), (4, 4))])
def test_resize_matches_scalar_oracle(shape, out):
    img = np.random.default_rng(2).random(shape) * 255
    got = resize_bilinear(img[:, :, None], *out)[:, :, 0]
    np.testing.assert_allclose(got, bilinear_resize_oracle(img, *out), atol=1e-9)


class TestRotate:
    def test_zero_is_identity(self):
        a = np.random.default_rng(0).random((9, 9, 1))
        np.testing.assert_allclose(rotate_bilinear(a, 0.0), a)

    def test_quarter_turn_is_rot90(self):
        a = np.random.default_rng(0).random((9, 9, 1))
        np.testing.assert_allclose(rotate_bilinear(a, 90.0), np.rot90(a), atol=1e-9)

    def test_corners_fill_black(self):
        a = np.full((21, 21, 1), 200.0)
        r = rotate_bilinear(a, 45.0)
        assert r[0, 0, 0] == 0 and r[10, 10, 0] == pytest.approx(200.0)


class TestAugment:
    def test_disabled_is_plain_resize(self):
        img = Image(np.random.default_rng(3).integers(0, 256, (60, 80), dtype=np.uint8))
        out = augment(img, AugmentConfig(enabled=False))
        assert np.array_equal(out.pixels, resize_image(img, 224).pixels)

    def test_deterministic_per_draw(self):
        img = Image(np.random.default_rng(4).integers(0, 256, (64, 64), dtype=np.uint8))
        cfg = AugmentConfig(seed=42)
        a, b = augment(img, cfg, 5), augment(img, cfg, 5)
        assert a.pixels.tobytes() == b.pixels.tobytes()
        assert a.pixels.shape == (224, 224, 1)
        assert augment(img, cfg, 6).pixels.tobytes() != a.pixels.tobytes()

    def test_angle_distribution(self):
        cfg = AugmentConfig(seed=2024)
        angles = np.array([sample_augment_params(256, 256, cfg, i).angle for i in range(10_000)])
        assert angles.min() >= -15 and angles.max() <= 15
        assert abs(angles.mean()) < 0.5

    def test_crop_within_configured_ranges(self):
        cfg = AugmentConfig(seed=1)
        for i in range(500):
            p = sample_augment_params(256, 200, cfg, i)
            assert 0 <= p.top and p.top + p.crop_height <= 256
            assert 0 <= p.left and p.left + p.crop_width <= 200
            frac = p.crop_height * p.crop_width / (256 * 200)
            assert 0.55 <= frac <= 1.0

    def test_config_validation(self):
        with pytest.raises(ValueError):
            AugmentConfig(crop_scale_range=(0.8, 0.6))
        with pytest.raises(ValueError):
            AugmentConfig(rotation_degrees=-1)
