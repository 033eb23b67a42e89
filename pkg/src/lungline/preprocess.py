"""
Chest X-ray decoding, resizing, normalization and training-time augmentation.

All resampling is bilinear with half-pixel centers: output pixel ``i`` samples
the source at ``(i + 0.5) * in/out - 0.5``.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

from .errors import LunglineError

MODEL_SIZE = 224
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class DecodeError(LunglineError, ValueError):
    pass


class UnsupportedFormatError(DecodeError):
    pass


@dataclass(frozen=True)
class Image:
    """8-bit image; `pixels` has shape (height, width, channels)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[2] not in (1, 3):
            raise ValueError(f"image pixels must be HxWx1 or HxWx3, got {px.shape}")
        if px.dtype != np.uint8:
            raise ValueError(f"image pixels must be uint8, got {px.dtype}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass(frozen=True)
class NormalizationSpec:
    mean: tuple[float, float, float] = (0.0960, 0.0960, 0.0960)
    std: tuple[float, float, float] = (0.9341, 0.9341, 0.9341)

    def __post_init__(self):
        if len(self.mean) != 3 or len(self.std) != 3:
            raise ValueError("mean and std need exactly 3 components")
        if any(s <= 0 for s in self.std):
            raise ValueError(f"std components must be positive, got {self.std}")


XRAY_NORM = NormalizationSpec()


@dataclass(frozen=True)
class AugmentConfig:
    enabled: bool = True
    crop_scale_range: tuple[float, float] = (0.6, 1.0)
    crop_aspect_range: tuple[float, float] = (3 / 4, 4 / 3)
    rotation_degrees: float = 15.0
    seed: int = 0
    output_size: int = MODEL_SIZE
    max_crop_attempts: int = field(default=10, repr=False)

    def __post_init__(self):
        lo, hi = self.crop_scale_range
        if not 0 < lo <= hi <= 1:
            raise ValueError(f"crop_scale_range must satisfy 0 < lo <= hi <= 1, got {self.crop_scale_range}")
        lo, hi = self.crop_aspect_range
        if not 0 < lo <= hi:
            raise ValueError(f"crop_aspect_range must satisfy 0 < lo <= hi, got {self.crop_aspect_range}")
        if self.rotation_degrees < 0:
            raise ValueError("rotation_degrees must be non-negative")


def decode_image(data: Union[bytes, str]) -> Image:
    """
    Decode a PNG (8/16-bit grayscale or 8-bit RGB) into an 8-bit Image.

    16-bit samples keep their high byte. Images with an alpha channel or a
    transparent palette are rejected.
    """
    if isinstance(data, (bytes, bytearray)):
        fh = io.BytesIO(data)
    else:
        fh = open(data, "rb")
    try:
        with fh, PILImage.open(fh) as im:
            if im.format != "PNG":
                raise UnsupportedFormatError(f"expected a PNG file, got {im.format}")
            im.load()
            mode = im.mode
            if mode in ("LA", "RGBA", "PA", "La", "RGBa") or (
                mode == "P" and "transparency" in im.info
            ):
                raise UnsupportedFormatError(f"PNG color mode {mode} with alpha is not supported")
            if mode == "P":
                im = im.convert("RGB")
            elif mode == "1":
                im = im.convert("L")
            arr = np.asarray(im)
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError, EOFError) as exc:
        if isinstance(exc, DecodeError):
            raise
        raise DecodeError(f"cannot decode PNG: {exc}") from exc

    if mode.startswith("I"):
        arr = (np.clip(arr.astype(np.int64), 0, 0xFFFF) >> 8).astype(np.uint8)
    elif arr.dtype != np.uint8:
        raise UnsupportedFormatError(f"PNG color mode {mode} is not supported")
    return Image(np.ascontiguousarray(arr))


def _resize_axis_weights(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    scale = n_in / n_out
    src = np.maximum((np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5, 0.0)
    i0 = np.minimum(np.floor(src).astype(np.int64), n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    frac = src - i0
    return i0, i1, frac


def resize_bilinear(arr: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize of an (H, W, C) float array; returns float64."""
    arr = np.asarray(arr, dtype=np.float64)
    h, w = arr.shape[:2]
    if (h, w) == (height, width):
        return arr.copy()
    y0, y1, fy = _resize_axis_weights(h, height)
    x0, x1, fx = _resize_axis_weights(w, width)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = arr[y0][:, x0] * (1 - fx) + arr[y0][:, x1] * fx
    bottom = arr[y1][:, x0] * (1 - fx) + arr[y1][:, x1] * fx
    return top * (1 - fy) + bottom * fy


def _to_uint8(arr: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(arr), 0, 255).astype(np.uint8)


def resize_image(img: Image, size: int = MODEL_SIZE) -> Image:
    return Image(_to_uint8(resize_bilinear(img.pixels, size, size)))


def to_model_input(img: Image, norm: NormalizationSpec = XRAY_NORM, size: int = MODEL_SIZE) -> np.ndarray:
    """Resize, convert to 3-channel grayscale, scale to [0, 1] and normalize -> [3, size, size]."""
    x = resize_bilinear(img.pixels, size, size)
    if x.shape[2] == 3:
        gray = x @ np.asarray(LUMA_WEIGHTS)
    else:
        gray = x[:, :, 0]
    gray = gray / 255.0
    mean = np.asarray(norm.mean, dtype=np.float64)[:, None, None]
    std = np.asarray(norm.std, dtype=np.float64)[:, None, None]
    out = (np.broadcast_to(gray, (3, size, size)) - mean) / std
    return out.astype(np.float32)


@dataclass(frozen=True)
class AugmentParams:
    top: int
    left: int
    crop_height: int
    crop_width: int
    angle: float


def augment_rng(seed: int, draw_index: int) -> np.random.Generator:
    """Independent stream per (seed, draw index); parallel workers cannot collide."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), int(draw_index)]))


def sample_augment_params(height: int, width: int, cfg: AugmentConfig, draw_index: int) -> AugmentParams:
    rng = augment_rng(cfg.seed, draw_index)
    area = height * width
    log_lo, log_hi = (math.log(r) for r in cfg.crop_aspect_range)
    crop = None
    for _ in range(cfg.max_crop_attempts):
        target = area * rng.uniform(*cfg.crop_scale_range)
        aspect = math.exp(rng.uniform(log_lo, log_hi))
        cw = int(round(math.sqrt(target * aspect)))
        ch = int(round(math.sqrt(target / aspect)))
        if 0 < cw <= width and 0 < ch <= height:
            top = int(rng.integers(0, height - ch + 1))
            left = int(rng.integers(0, width - cw + 1))
            crop = (top, left, ch, cw)
            break
    if crop is None:
        # fall back to the largest centered crop inside the aspect range
        ratio = width / height
        lo, hi = cfg.crop_aspect_range
        if ratio < lo:
            cw, ch = width, int(round(width / lo))
        elif ratio > hi:
            cw, ch = int(round(height * hi)), height
        else:
            cw, ch = width, height
        crop = ((height - ch) // 2, (width - cw) // 2, ch, cw)
    angle = float(rng.uniform(-cfg.rotation_degrees, cfg.rotation_degrees))
    return AugmentParams(*crop, angle=angle)


def rotate_bilinear(arr: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate an (H, W, C) array counter-clockwise about its center; outside samples are 0."""
    arr = np.asarray(arr, dtype=np.float64)
    h, w, c = arr.shape
    theta = math.radians(degrees)
    cos, sin = math.cos(theta), math.sin(theta)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    dy, dx = yy - cy, xx - cx
    # inverse mapping: source = R(-theta) applied to the output offset (y axis points down)
    sx = cos * dx - sin * dy + cx
    sy = sin * dx + cos * dy + cy
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = (sx - x0)[:, :, None]
    fy = (sy - y0)[:, :, None]

    padded = np.zeros((h + 2, w + 2, c))
    padded[1:-1, 1:-1] = arr

    def tap(yi, xi):
        inside = (yi >= 0) & (yi < h) & (xi >= 0) & (xi < w)
        yi = np.where(inside, yi + 1, 0)
        xi = np.where(inside, xi + 1, 0)
        return padded[yi, xi]

    return (
        tap(y0, x0) * (1 - fy) * (1 - fx)
        + tap(y0, x0 + 1) * (1 - fy) * fx
        + tap(y0 + 1, x0) * fy * (1 - fx)
        + tap(y0 + 1, x0 + 1) * fy * fx
    )


def augment(img: Image, cfg: AugmentConfig, draw_index: int = 0) -> Image:
    """
    Random sized crop -> resize -> random rotation, or a plain resize when disabled.

    The draw is a pure function of ``(cfg.seed, draw_index)``.
    """
    size = cfg.output_size
    if not cfg.enabled:
        return resize_image(img, size)
    p = sample_augment_params(img.height, img.width, cfg, draw_index)
    crop = img.pixels[p.top:p.top + p.crop_height, p.left:p.left + p.crop_width]
    resized = resize_bilinear(crop, size, size)
    return Image(_to_uint8(rotate_bilinear(resized, p.angle)))


def load_model_input(path, norm: NormalizationSpec = XRAY_NORM, augment_cfg: AugmentConfig | None = None,
                     draw_index: int = 0) -> np.ndarray:
    """Read a PNG from disk and return the normalized [3, 224, 224] tensor."""
    img = decode_image(str(path))
    if augment_cfg is not None and augment_cfg.enabled:
        img = augment(img, augment_cfg, draw_index)
    return to_model_input(img, norm)
