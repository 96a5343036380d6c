import numpy as np
import pytest

from tpqi import niqe
from tpqi.synthgen import natural_image


@pytest.fixture(scope="session")
def pristine_corpus():
    """Procedurally generated pristine images with natural-scene statistics."""
    return [natural_image(512, 512, seed=100 + i) for i in range(12)]


@pytest.fixture(scope="session")
def niqe_model(pristine_corpus):
    return niqe.train_model(pristine_corpus)


@pytest.fixture(scope="session")
def niqe_model_small(pristine_corpus):
    """Patch size 48 so small synthetic frames still carry several patches."""
    return niqe.train_model(pristine_corpus, patch_size=48)


@pytest.fixture(scope="session")
def bundled_image():
    """The CC0 natural image shipped with the package."""
    from importlib import resources

    from PIL import Image

    with resources.files("tpqi").joinpath("data/natural.png").open("rb") as fh:
        arr = np.asarray(Image.open(fh), dtype=np.float64) / 255.0
    return arr


def random_rotation(rng: np.random.Generator, d: int) -> np.ndarray:
    """Haar-ish random orthogonal matrix (may include reflections)."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))
