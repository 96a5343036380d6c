"""Frame-level spatial quality: the Natural Image Quality Evaluator.

Mean-subtracted contrast-normalized (MSCN) coefficients are fitted with a
generalized Gaussian, four directional pairwise products with asymmetric
generalized Gaussians, at two scales, for 36 features per patch.  A pristine
multivariate Gaussian model (mean + covariance over sharp training patches)
is compared against a test frame's patch statistics with a symmetrized
Mahalanobis-style distance.  Higher scores mean worse quality.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import correlate1d
from scipy.special import gamma as gamma_fn

from .videoio import resize_plane

log = logging.getLogger(__name__)

MODEL_MAGIC = b"TPQINIQ1"
FEATURE_DIM = 36
_SIDE_EPS = 1e-6  # stand-in std for an absent AGGD side

# Shape-parameter grid and the gamma-ratio curves used for moment matching.
GAMMA_GRID = np.arange(0.2, 10.0 + 1e-9, 0.001)
_R_GGD = (gamma_fn(1.0 / GAMMA_GRID) * gamma_fn(3.0 / GAMMA_GRID)
          / gamma_fn(2.0 / GAMMA_GRID) ** 2)
_R_AGGD = 1.0 / _R_GGD


class DegenerateDistribution(ValueError):
    """Samples carry no usable distributional information (e.g. all zero)."""


@dataclass
class NiqeModel:
    mu: np.ndarray
    sigma: np.ndarray
    patch_size: int = 96
    sharpness_fraction: float = 0.75

    def validate(self) -> "NiqeModel":
        if self.mu.shape != (FEATURE_DIM,):
            raise ValueError(f"mu must be ({FEATURE_DIM},), got {self.mu.shape}")
        if self.sigma.shape != (FEATURE_DIM, FEATURE_DIM):
            raise ValueError(f"sigma must be {FEATURE_DIM}x{FEATURE_DIM}")
        if not np.allclose(self.sigma, self.sigma.T, atol=1e-9):
            raise ValueError("sigma must be symmetric")
        return self


def _gaussian_window(size: int = 7, sigma: float = 7.0 / 6.0) -> np.ndarray:
    half = size // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    return g / g.sum()


def local_stats(frame: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian-weighted local mean and std on the [0, 255] scale."""
    img = np.asarray(frame, dtype=np.float64) * 255.0
    w = _gaussian_window()
    mu = correlate1d(correlate1d(img, w, axis=0, mode="reflect"), w, axis=1, mode="reflect")
    m2 = correlate1d(correlate1d(img * img, w, axis=0, mode="reflect"), w, axis=1,
                     mode="reflect")
    sigma = np.sqrt(np.abs(m2 - mu * mu))
    return mu, sigma


def mscn(frame: np.ndarray) -> np.ndarray:
    """Mean-subtracted contrast-normalized coefficients, (I - mu)/(sigma + 1)."""
    img = np.asarray(frame, dtype=np.float64) * 255.0
    mu, sigma = local_stats(frame)
    return (img - mu) / (sigma + 1.0)


def fit_ggd(samples) -> tuple[float, float]:
    """Moment-matching GGD fit; returns (shape, variance).

    The shape solves r(g) = E[x^2]/E[|x|]^2 over a fixed grid of the
    gamma-ratio function; the variance is the second moment.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 100:
        raise ValueError(f"need >= 100 samples, got {x.size}")
    m2 = float(np.mean(x * x))
    m1 = float(np.mean(np.abs(x)))
    if m2 <= 0.0 or m1 <= 0.0:
        raise DegenerateDistribution("all-zero samples")
    rho = m2 / m1**2
    shape = GAMMA_GRID[int(np.argmin((_R_GGD - rho) ** 2))]
    return float(shape), m2


def fit_aggd(samples) -> tuple[float, float, float, float]:
    """Moment-matching AGGD fit; returns (shape, mean, left_var, right_var).

    left_var/right_var are the fitted left/right scale parameters.  A side
    with no samples is clamped to a tiny constant and logged.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 100:
        raise ValueError(f"need >= 100 samples, got {x.size}")
    m2 = float(np.mean(x * x))
    if m2 <= 0.0:
        raise DegenerateDistribution("all-zero samples")
    left = x[x < 0]
    right = x[x > 0]
    left_std = float(np.sqrt(np.mean(left**2))) if left.size else _SIDE_EPS
    right_std = float(np.sqrt(np.mean(right**2))) if right.size else _SIDE_EPS
    if not left.size or not right.size:
        log.warning("single-signed AGGD samples; clamping absent side to %g", _SIDE_EPS)
    gamma_hat = left_std / right_std
    r_hat = float(np.mean(np.abs(x))) ** 2 / m2
    r_norm = r_hat * (gamma_hat**3 + 1.0) * (gamma_hat + 1.0) / (gamma_hat**2 + 1.0) ** 2
    shape = float(GAMMA_GRID[int(np.argmin((_R_AGGD - r_norm) ** 2))])
    ratio = np.sqrt(gamma_fn(1.0 / shape) / gamma_fn(3.0 / shape))
    beta_l = left_std * ratio
    beta_r = right_std * ratio
    mean = (beta_r - beta_l) * (gamma_fn(2.0 / shape) / gamma_fn(1.0 / shape))
    return shape, float(mean), float(beta_l), float(beta_r)


def _paired_products(m: np.ndarray):
    # Horizontal, vertical, and both diagonal neighbor products; sliced, not
    # wrapped, so no cross-border pairs are fabricated.
    h = m[:, :-1] * m[:, 1:]
    v = m[:-1, :] * m[1:, :]
    d1 = m[:-1, :-1] * m[1:, 1:]
    d2 = m[1:, :-1] * m[:-1, 1:]
    return h, v, d1, d2


def _subband_features(coeffs: np.ndarray) -> np.ndarray:
    shape, var = fit_ggd(coeffs)
    feats = [shape, var]
    for prod in _paired_products(coeffs):
        feats.extend(fit_aggd(prod))
    return np.array(feats)


def patch_features(frame: np.ndarray, patch_size: int = 96,
                   with_sharpness: bool = False):
    """Per-patch 36-dim NSS features over a non-overlapping patch grid.

    Features concatenate the native-scale fits with fits on the 2x
    downsampled frame over the matching grid.  Degenerate (flat) patches are
    dropped.  With ``with_sharpness`` also returns each patch's mean local
    std at native scale.
    """
    if patch_size % 2:
        raise ValueError("patch_size must be even")
    h, w = frame.shape
    if h < patch_size or w < patch_size:
        raise ValueError(f"frame {w}x{h} smaller than patch size {patch_size}")
    coeffs1 = mscn(frame)
    _, sharp_map = local_stats(frame)
    half = resize_plane(np.asarray(frame, dtype=np.float64), w // 2, h // 2)
    coeffs2 = mscn(half)
    p1, p2 = patch_size, patch_size // 2
    rows = min(h // p1, coeffs2.shape[0] // p2)
    cols = min(w // p1, coeffs2.shape[1] // p2)
    feats, sharps = [], []
    for i in range(rows):
        for j in range(cols):
            block1 = coeffs1[i * p1 : (i + 1) * p1, j * p1 : (j + 1) * p1]
            block2 = coeffs2[i * p2 : (i + 1) * p2, j * p2 : (j + 1) * p2]
            try:
                vec = np.concatenate([_subband_features(block1),
                                      _subband_features(block2)])
            except DegenerateDistribution:
                continue
            feats.append(vec)
            sharps.append(sharp_map[i * p1 : (i + 1) * p1, j * p1 : (j + 1) * p1].mean())
    feats = np.array(feats).reshape(-1, FEATURE_DIM)
    if with_sharpness:
        return feats, np.array(sharps)
    return feats


def niqe_features(frame: np.ndarray, patch_size: int = 96) -> np.ndarray:
    """Frame-level 36-dim feature vector: mean over all patches, no
    sharpness selection."""
    feats = patch_features(frame, patch_size)
    if feats.shape[0] == 0:
        raise ValueError("no usable patches (frame is flat)")
    return feats.mean(axis=0)


def train_model(corpus, patch_size: int = 96,
                sharpness_fraction: float = 0.75) -> NiqeModel:
    """Fit the pristine MVG on the sharpest training patches.

    Per image, patches below the ``sharpness_fraction`` quantile of mean
    local std are discarded; the survivors from all images are pooled.
    """
    corpus = list(corpus)
    if len(corpus) < 10:
        raise ValueError(f"need >= 10 pristine images, got {len(corpus)}")
    if not 0.0 < sharpness_fraction <= 1.0:
        raise ValueError("sharpness_fraction must be in (0, 1]")
    selected = []
    for img in corpus:
        feats, sharps = patch_features(img, patch_size, with_sharpness=True)
        if feats.shape[0] == 0:
            continue
        threshold = np.quantile(sharps, sharpness_fraction)
        selected.append(feats[sharps >= threshold])
    if not selected:
        raise ValueError("no usable patches in corpus")
    pooled = np.vstack(selected)
    if pooled.shape[0] < 2:
        raise ValueError(f"too few patches after sharpness selection: {pooled.shape[0]}")
    mu = pooled.mean(axis=0)
    sigma = np.cov(pooled, rowvar=False)
    return NiqeModel(mu=mu, sigma=sigma, patch_size=patch_size,
                     sharpness_fraction=sharpness_fraction).validate()


def mvg_distance(mu1: np.ndarray, sigma1: np.ndarray,
                 mu2: np.ndarray, sigma2: np.ndarray) -> float:
    """sqrt((mu1-mu2)^T ((sigma1+sigma2)/2)^+ (mu1-mu2)) with a
    pseudo-inverse for singular pooled covariances."""
    diff = np.asarray(mu1, dtype=np.float64) - np.asarray(mu2, dtype=np.float64)
    pooled = (np.asarray(sigma1, dtype=np.float64)
              + np.asarray(sigma2, dtype=np.float64)) / 2.0
    inv = np.linalg.pinv(pooled, rcond=1e-10)
    return float(np.sqrt(max(diff @ inv @ diff, 0.0)))


def niqe_score(frame: np.ndarray, model: NiqeModel) -> float:
    """Distance between the frame's patch-feature MVG statistics and the
    pristine model; 0 means statistically pristine."""
    feats = patch_features(frame, model.patch_size)
    if feats.shape[0] == 0:
        raise ValueError("no usable patches (frame is flat)")
    if not np.isfinite(feats).all():
        raise ValueError("non-finite NSS features")
    nu = feats.mean(axis=0)
    cov = np.cov(feats, rowvar=False) if feats.shape[0] > 1 else np.zeros(
        (FEATURE_DIM, FEATURE_DIM))
    return mvg_distance(model.mu, model.sigma, nu, cov)


def video_spatial_score(seq, model: NiqeModel) -> float:
    """Mean per-frame score over the sequence at its native resolution."""
    if seq.n_frames < 1:
        raise ValueError("empty sequence")
    return float(np.mean([niqe_score(f, model) for f in seq.frames]))


def save_model(model: NiqeModel, path) -> None:
    """TPQINIQ1: magic, u32 LE dim, mu (dim f64 LE), sigma (dim^2 f64 LE
    row-major), patch_size u32 LE, sharpness_fraction f64 LE."""
    model.validate()
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(np.array([FEATURE_DIM], dtype="<u4").tobytes())
        fh.write(np.ascontiguousarray(model.mu, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.sigma, dtype="<f8").tobytes())
        fh.write(np.array([model.patch_size], dtype="<u4").tobytes())
        fh.write(np.array([model.sharpness_fraction], dtype="<f8").tobytes())


def load_model(path) -> NiqeModel:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:8] != MODEL_MAGIC:
        raise ValueError("missing TPQINIQ1 magic")
    dim = int(np.frombuffer(data[8:12], dtype="<u4")[0])
    if dim != FEATURE_DIM:
        raise ValueError(f"unsupported model dimension {dim}")
    pos = 12
    mu = np.frombuffer(data[pos : pos + dim * 8], dtype="<f8").copy()
    pos += dim * 8
    sigma = np.frombuffer(data[pos : pos + dim * dim * 8], dtype="<f8").reshape(dim, dim).copy()
    pos += dim * dim * 8
    patch_size = int(np.frombuffer(data[pos : pos + 4], dtype="<u4")[0])
    pos += 4
    fraction = float(np.frombuffer(data[pos : pos + 8], dtype="<f8")[0])
    return NiqeModel(mu=mu, sigma=sigma, patch_size=patch_size,
                     sharpness_fraction=fraction).validate()
