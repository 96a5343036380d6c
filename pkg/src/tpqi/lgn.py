"""LGN-domain representation: Laplacian-pyramid bandpass filtering followed
by divisive contrast normalization.

The pyramid uses a separable binomial lowpass by default.  Expansion is done
polyphase on a symmetrically padded coarse level, so a constant image expands
to exactly the same constant all the way to the border.  That makes the
bandpass bands of a flat frame identically zero and the whole feature vector
invariant to global luminance shifts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate, correlate1d
from scipy.special import comb

# Half-sample symmetric reflection, the boundary rule shared by every
# convolution in the pipeline (scipy calls it "reflect").
BOUNDARY = "reflect"


def binomial_kernel(n: int = 5) -> np.ndarray:
    k = comb(n - 1, np.arange(n))
    return k / k.sum()


@dataclass
class LgnConfig:
    levels: int = 5
    lowpass_kernel: np.ndarray = field(default_factory=binomial_kernel)
    norm_kernel: np.ndarray = field(
        default_factory=lambda: np.outer(binomial_kernel(), binomial_kernel())
    )
    norm_constants: tuple[float, ...] = (0.17, 0.17, 0.17, 0.17, 0.17)

    def validate(self) -> "LgnConfig":
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        k = np.asarray(self.lowpass_kernel, dtype=np.float64)
        if k.ndim != 1 or k.size % 2 == 0:
            raise ValueError("lowpass_kernel must be 1-D with odd length")
        if abs(k.sum() - 1.0) > 1e-12:
            raise ValueError("lowpass_kernel must sum to 1")
        if len(self.norm_constants) < self.levels:
            raise ValueError("need one norm constant per level")
        if any(c <= 0 for c in self.norm_constants):
            raise ValueError("norm constants must be > 0")
        return self


def _blur(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out = correlate1d(plane, kernel, axis=0, mode=BOUNDARY)
    return correlate1d(out, kernel, axis=1, mode=BOUNDARY)


def _reduce(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return _blur(plane, kernel)[::2, ::2]


def _expand_axis(x: np.ndarray, kernel: np.ndarray, target: int, axis: int) -> np.ndarray:
    # Pad in the coarse domain, interleave zeros, then convolve with the
    # doubled kernel: reflection never sees the synthetic zeros, so constants
    # are preserved exactly (the binomial kernel has equal polyphase sums).
    radius = kernel.size // 2
    pad = radius // 2 + 1
    x = np.moveaxis(x, axis, 0)
    padded = np.pad(x, [(pad, pad)] + [(0, 0)] * (x.ndim - 1), mode="symmetric")
    up = np.zeros((padded.shape[0] * 2,) + padded.shape[1:], dtype=x.dtype)
    up[::2] = padded
    up = correlate1d(up, 2.0 * kernel, axis=0, mode="constant")
    out = up[2 * pad : 2 * pad + target]
    return np.moveaxis(out, 0, axis)


def _expand(plane: np.ndarray, kernel: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    out = _expand_axis(plane, kernel, shape[0], axis=0)
    return _expand_axis(out, kernel, shape[1], axis=1)


def laplacian_pyramid(frame: np.ndarray, cfg: LgnConfig) -> list[np.ndarray]:
    """Decompose into ``cfg.levels`` planes: bandpass bands coarse-to-fine
    terminated by the lowpass residual.  Collapsing reproduces the input."""
    cfg.validate()
    h, w = frame.shape
    need = 2 ** (cfg.levels - 1)
    if h < need or w < need:
        raise ValueError(f"frame {w}x{h} too small for {cfg.levels} pyramid levels")
    kernel = np.asarray(cfg.lowpass_kernel, dtype=np.float64)
    bands = []
    current = np.asarray(frame, dtype=np.float64)
    for _ in range(cfg.levels - 1):
        coarse = _reduce(current, kernel)
        bands.append(current - _expand(coarse, kernel, current.shape))
        current = coarse
    bands.append(current)
    return bands


def collapse(bands: list[np.ndarray], cfg: LgnConfig) -> np.ndarray:
    """Invert :func:`laplacian_pyramid` by repeated expand-and-add."""
    kernel = np.asarray(cfg.lowpass_kernel, dtype=np.float64)
    current = bands[-1]
    for band in reversed(bands[:-1]):
        current = band + _expand(current, kernel, band.shape)
    return current


def divisive_normalize(band: np.ndarray, cfg: LgnConfig, level: int) -> np.ndarray:
    """Contrast gain control: y = z / (c_k + norm_kernel * |z|)."""
    c = cfg.norm_constants[level]
    local_amp = correlate(np.abs(band), np.asarray(cfg.norm_kernel, dtype=np.float64),
                          mode=BOUNDARY)
    return band / (c + local_amp)


def lgn_features(frame: np.ndarray, cfg: LgnConfig | None = None) -> np.ndarray:
    """Per-frame LGN feature vector: all normalized bandpass bands, flattened
    and concatenated in level order.  The lowpass residual (mean luminance)
    is discarded."""
    if cfg is None:
        cfg = LgnConfig()
    bands = laplacian_pyramid(frame, cfg)
    parts = [divisive_normalize(b, cfg, k).ravel() for k, b in enumerate(bands[:-1])]
    return np.concatenate(parts) if parts else np.zeros(0)


def feature_dim(shape: tuple[int, int], cfg: LgnConfig) -> int:
    h, w = shape
    total = 0
    for _ in range(cfg.levels - 1):
        total += h * w
        h = (h + 1) // 2
        w = (w + 1) // 2
    return total
