import importlib.util
from pathlib import Path

import numpy as np
import pytest
from PIL import Image as PILImage

from lungline import arch
from lungline.weights import bind_weights, model_weights

ROOT = Path(__file__).resolve().parents[1]
DATA = Path(__file__).resolve().parent / "data"


def load_script(name):
    path = ROOT / "scripts" / f"{name}.py"
    spec = importlib.util.spec_from_file_location(name, path)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def bound(model):
    return bind_weights(model, model_weights(model))


@pytest.fixture(scope="session")
def model3():
    return bound(arch.build_mobilenet_v2(3, seed=7))


@pytest.fixture(scope="session")
def model1000():
    return bound(arch.build_mobilenet_v2(1000, seed=1))


def write_png(path, array, mode=None):
    PILImage.fromarray(array, mode=mode).save(path, format="PNG")
    return path


@pytest.fixture
def png_dir(tmp_path):
    """Six small grayscale PNGs with distinct content, two per class."""
    rng = np.random.default_rng(0)
    rows = []
    for i in range(6):
        arr = (rng.random((40, 48)) * 255).astype(np.uint8)
        arr[:, : 8 * (i + 1)] = 30 * i
        name = f"img{i}.png"
        write_png(tmp_path / name, arr)
        rows.append((name, ["COVID-19", "Normal", "Viral Pneumonia"][i % 3]))
    (tmp_path / "all.csv").write_text(
        "path,label\n" + "".join(f"{p},{c}\n" for p, c in rows), encoding="utf-8"
    )
    return tmp_path


def separable_blobs(n=64, dim=1280, seed=0, spread=0.5):
    """Two Gaussian blobs at +/- spread along every axis, labels alternating."""
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    centers = np.where(labels[:, None] == 0, -spread, spread)
    feats = (centers + rng.standard_normal((n, dim))).astype(np.float32)
    return feats, labels
