import numpy as np
import pytest

from msdcs import backend
from msdcs.pgm import GrayImage, save_pgm


def synthetic_gray(h: int, w: int, seed: int) -> np.ndarray:
    """Structured synthetic test image: an oriented gradient, a low-frequency
    sinusoid, and a few soft-edged shapes. Compressible enough that sampling
    at low subrates is meaningful, varied enough that enhancement can help."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    u, v = yy / h, xx / w
    ang = rng.uniform(0, 2 * np.pi)
    img = 0.45 + 0.25 * (np.cos(ang) * u + np.sin(ang) * v)
    img += 0.15 * np.sin(2 * np.pi * (rng.uniform(0.5, 2.0) * u
                                      + rng.uniform(0.5, 2.0) * v)
                         + rng.uniform(0, 6))
    for _ in range(rng.integers(2, 5)):
        cy, cx = rng.uniform(0.15, 0.85) * h, rng.uniform(0.15, 0.85) * w
        ry, rx = rng.uniform(0.08, 0.3) * h, rng.uniform(0.08, 0.3) * w
        d = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2
        soft = np.clip(1.5 - d, 0, 1)
        img = img * (1 - 0.8 * soft) + rng.uniform(0.1, 0.9) * 0.8 * soft
    img = np.clip(img, 0, 1)
    return np.floor(img * 255 + 0.5).astype(np.uint8)


def write_dataset(directory, count: int, h: int, w: int, seed0: int = 100):
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(count):
        p = directory / f"img{i:02d}.pgm"
        save_pgm(GrayImage(synthetic_gray(h, w, seed0 + i)), p)
        paths.append(p)
    return paths


@pytest.fixture
def restore_backend():
    yield
    backend.set_backend(None)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
