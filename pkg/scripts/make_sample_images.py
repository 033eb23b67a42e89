"""
Write three procedurally generated, chest-radiograph-like PNGs used by the
end-to-end smoke test. They are synthetic and carry no patient data.

    python scripts/make_sample_images.py [out_dir]
"""
import sys
from pathlib import Path

import numpy as np
from PIL import Image

SIZE = 256


def radiograph(seed: int, opacity: float) -> np.ndarray:
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:SIZE, 0:SIZE] / SIZE
    img = np.full((SIZE, SIZE), 0.15)
    # two lung fields, darker than the surrounding tissue
    for cx in (0.32, 0.68):
        lung = ((xx - cx) / 0.16) ** 2 + ((yy - 0.5) / 0.32) ** 2 < 1
        img[lung] = 0.08
    # spine and ribs
    img += 0.55 * np.exp(-((xx - 0.5) / 0.05) ** 2)
    for k in range(8):
        img += 0.12 * np.exp(-((yy - 0.2 - 0.08 * k - 0.1 * (xx - 0.5) ** 2) / 0.012) ** 2)
    # diffuse patchy opacity, stronger for "abnormal" samples
    blobs = rng.random((8, 8))
    patch = np.kron(blobs, np.ones((SIZE // 8, SIZE // 8)))
    img += opacity * patch * np.exp(-((yy - 0.6) / 0.25) ** 2)
    img += 0.03 * rng.standard_normal(img.shape)
    return (np.clip(img, 0, 1) * 255).astype(np.uint8)


def main(out_dir="tests/data/images"):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, seed, opacity in (("sample_a", 11, 0.0), ("sample_b", 12, 0.25), ("sample_c", 13, 0.45)):
        Image.fromarray(radiograph(seed, opacity), mode="L").save(out / f"{name}.png")
        print(out / f"{name}.png")


if __name__ == "__main__":
    main(*sys.argv[1:])
