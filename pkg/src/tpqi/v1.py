"""V1-domain representation: complex-cell energy of an oriented Gabor bank.

Each filter is a complex Gabor (Gaussian envelope times a complex plane
wave); the squared magnitude of the filtered frame combines the quadrature
phases into a phase-invariant energy map.  The bank convolution runs in the
frequency domain over a symmetrically padded frame, which is numerically
equivalent to direct spatial convolution with reflected boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft


@dataclass(frozen=True)
class GaborParams:
    f: float            # spatial frequency, cycles/pixel
    theta_o: float      # orientation, radians
    phi: float = 0.0    # phase offset, radians
    sigma: float = 1.0  # Gaussian envelope std, pixels
    gamma: float = 0.5  # spatial aspect ratio
    eta: float = 0.5    # normalization aspect term, set equal to gamma
    size: int = 39      # odd kernel side length

    def validate(self) -> "GaborParams":
        if self.f <= 0 or self.sigma <= 0 or self.gamma <= 0 or self.eta <= 0:
            raise ValueError("f, sigma, gamma, eta must be > 0")
        if self.size % 2 == 0 or self.size < 1:
            raise ValueError("kernel size must be odd and >= 1")
        return self


def make_gabor_kernel(params: GaborParams) -> np.ndarray:
    """Sample the complex Gabor on an integer grid centered at the origin.

    g(x, y) = f^2/(pi*gamma*eta) * exp(-(x'^2 + gamma^2 y'^2) / (2 sigma^2))
                                 * exp(j (2 pi f x' + phi))
    with x' = x cos(theta) + y sin(theta), y' = -x sin(theta) + y cos(theta).
    """
    params.validate()
    r = params.size // 2
    y, x = np.mgrid[-r : r + 1, -r : r + 1].astype(np.float64)
    ct, st = math.cos(params.theta_o), math.sin(params.theta_o)
    xp = x * ct + y * st
    yp = -x * st + y * ct
    amp = params.f**2 / (math.pi * params.gamma * params.eta)
    envelope = np.exp(-(xp**2 + params.gamma**2 * yp**2) / (2.0 * params.sigma**2))
    wave = np.exp(1j * (2.0 * math.pi * params.f * xp + params.phi))
    return amp * envelope * wave


@dataclass
class GaborBank:
    filters: list[GaborParams]
    pool: int = 4
    _kernels: list[np.ndarray] | None = field(default=None, repr=False, compare=False)
    _fft_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def kernels(self) -> list[np.ndarray]:
        if self._kernels is None:
            self._kernels = [make_gabor_kernel(p) for p in self.filters]
        return self._kernels

    @property
    def size(self) -> int:
        return self.filters[0].size


def default_bank(
    scales: int = 6,
    orientations: int = 8,
    size: int = 39,
    f_max: float = 0.25,
    sigma_factor: float = 0.56,
    gamma: float = 0.5,
    phi: float = 0.0,
    pool: int = 4,
) -> GaborBank:
    """Half-octave frequency spacing f_s = f_max / sqrt(2)^s, evenly spaced
    orientations k*pi/orientations, envelope tied to frequency by
    sigma = sigma_factor / f.  Defaults give 48 filters of size 39."""
    filters = []
    for s in range(scales):
        f = f_max / (math.sqrt(2.0) ** s)
        for k in range(orientations):
            theta = k * math.pi / orientations
            filters.append(
                GaborParams(f=f, theta_o=theta, phi=phi, sigma=sigma_factor / f,
                            gamma=gamma, eta=gamma, size=size)
            )
    return GaborBank(filters=filters, pool=pool)


def _bank_responses(frame: np.ndarray, bank: GaborBank) -> np.ndarray:
    """Complex responses of all filters, shape (n_filters, h, w).

    True convolution with symmetric (reflected) boundary handling: the frame
    is mirror-padded by the kernel radius, linearly convolved via FFT, and
    cropped back to the frame geometry.  The transform runs in single
    precision, which stays within ~1e-6 of direct float64 convolution while
    halving time and memory.
    """
    h, w = frame.shape
    size = bank.size
    r = size // 2
    if h < size or w < size:
        raise ValueError(f"frame {w}x{h} smaller than {size}x{size} kernel")
    padded = np.pad(np.asarray(frame, dtype=np.float32), r, mode="symmetric")
    full = (padded.shape[0] + size - 1, padded.shape[1] + size - 1)
    shape = (sfft.next_fast_len(full[0]), sfft.next_fast_len(full[1]))

    key = shape
    if key not in bank._fft_cache:
        stack = np.stack([sfft.fft2(k.astype(np.complex64), s=shape)
                          for k in bank.kernels()])
        bank._fft_cache[key] = stack
    kfft = bank._fft_cache[key]

    fframe = sfft.fft2(padded.astype(np.complex64), s=shape)
    conv = sfft.ifft2(fframe[None, :, :] * kfft, axes=(-2, -1))
    return conv[:, 2 * r : 2 * r + h, 2 * r : 2 * r + w]


def _block_mean(plane: np.ndarray, p: int) -> np.ndarray:
    """Average pooling with ceil-division block count; edge blocks average
    only the samples they actually cover."""
    if p == 1:
        return plane
    h, w = plane.shape
    hb, wb = -(-h // p), -(-w // p)
    padded = np.zeros((hb * p, wb * p), dtype=plane.dtype)
    padded[:h, :w] = plane
    counts = np.zeros_like(padded)
    counts[:h, :w] = 1.0
    sums = padded.reshape(hb, p, wb, p).sum(axis=(1, 3))
    norm = counts.reshape(hb, p, wb, p).sum(axis=(1, 3))
    return sums / norm


def v1_energy(frame: np.ndarray, bank: GaborBank) -> np.ndarray:
    """Per-frame V1 feature vector: quadrature energy |response|^2 of every
    filter, average-pooled by ``bank.pool`` and concatenated in filter
    (scale, orientation) order."""
    energy = energy_maps(frame, bank)
    pooled = [_block_mean(e, bank.pool).ravel() for e in energy]
    return np.concatenate(pooled)


def energy_maps(frame: np.ndarray, bank: GaborBank) -> np.ndarray:
    """Unpooled energy maps, shape (n_filters, h, w)."""
    responses = _bank_responses(frame, bank)
    return (responses.real.astype(np.float64)**2
            + responses.imag.astype(np.float64)**2)


def feature_dim(shape: tuple[int, int], bank: GaborBank) -> int:
    h, w = shape
    return len(bank.filters) * (-(-h // bank.pool)) * (-(-w // bank.pool))
