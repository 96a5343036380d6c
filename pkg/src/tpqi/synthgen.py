"""Synthetic clips and controlled temporal distortions for testing.

The smooth clip is a seamlessly tileable 1/f texture translating at constant
subpixel velocity, which is about as temporally gentle as motion gets; the
distortions are purely temporal (shuffle, jitter, drop-repeat) plus an
additive-noise spatial control.  Everything is seeded and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .videoio import LumaSequence

DISTORTION_KINDS = ("frame_shuffle", "temporal_jitter", "frame_drop_repeat",
                    "additive_noise")


@dataclass(frozen=True)
class DistortionSpec:
    kind: str
    strength: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in DISTORTION_KINDS:
            raise ValueError(f"unknown distortion {self.kind!r}, "
                             f"expected one of {DISTORTION_KINDS}")
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError("strength must be in [0, 1]")


def periodic_texture(height: int, width: int, seed: int, rolloff: float = 1.2) -> np.ndarray:
    """Tileable texture with a 1/f^rolloff amplitude spectrum, in [0, 1]."""
    rng = np.random.default_rng(seed)
    spectrum = rng.standard_normal((height, width)) + 1j * rng.standard_normal((height, width))
    fy = np.fft.fftfreq(height)[:, None]
    fx = np.fft.fftfreq(width)[None, :]
    radius = np.hypot(fy, fx)
    radius[0, 0] = 1.0
    spectrum /= radius**rolloff
    spectrum[0, 0] = 0.0
    tex = np.fft.ifft2(spectrum).real
    tex -= tex.min()
    peak = tex.max()
    if peak > 0:
        tex /= peak
    return tex


def natural_image(height: int = 512, width: int = 512, seed: int = 7) -> np.ndarray:
    """Procedural pristine image with natural-scene-like 1/f statistics,
    lightly tone-mapped to avoid clipping, in [0.02, 0.98]."""
    tex = periodic_texture(height, width, seed, rolloff=1.1)
    fine = periodic_texture(height, width, seed + 1, rolloff=0.6)
    img = 0.85 * tex + 0.15 * fine
    img = (img - img.mean()) * 0.9 + 0.5
    return np.clip(img, 0.02, 0.98)


def _sample_shifted(texture: np.ndarray, dx: float, dy: float) -> np.ndarray:
    """Bilinear sample of a periodic texture shifted by (dx, dy) pixels."""
    h, w = texture.shape
    x0 = int(np.floor(dx))
    y0 = int(np.floor(dy))
    fx = dx - x0
    fy = dy - y0
    a = np.roll(texture, (-y0, -x0), axis=(0, 1))
    b = np.roll(texture, (-y0, -x0 - 1), axis=(0, 1))
    c = np.roll(texture, (-y0 - 1, -x0), axis=(0, 1))
    d = np.roll(texture, (-y0 - 1, -x0 - 1), axis=(0, 1))
    return (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy


def smooth_clip(n_frames: int, size: tuple[int, int], seed: int = 0,
                velocity: tuple[float, float] = (1.6, 0.9),
                frame_rate: float = 30.0) -> LumaSequence:
    """Textured pattern translating at constant subpixel velocity.

    ``size`` is (width, height); ``velocity`` is pixels/frame along x and y.
    Zero velocity yields identical frames.  The pattern has natural-scene
    statistics (same generator as the pristine corpus), so the undistorted
    clip is both temporally smooth and spatially pristine.
    """
    if n_frames < 3:
        raise ValueError("need >= 3 frames")
    width, height = size
    texture = natural_image(height, width, seed)
    vx, vy = velocity
    frames = np.stack([_sample_shifted(texture, vx * t, vy * t) for t in range(n_frames)])
    return LumaSequence(frames.astype(np.float32), frame_rate=frame_rate,
                        source_id=f"smooth-{seed}")


def distort(seq: LumaSequence, spec: DistortionSpec) -> LumaSequence:
    """Apply a seeded temporal or spatial distortion; strength 0 is identity."""
    if spec.strength == 0.0:
        return LumaSequence(seq.frames.copy(), seq.frame_rate, seq.source_id)
    rng = np.random.default_rng(spec.seed)
    n = seq.n_frames
    frames = seq.frames.copy()

    if spec.kind == "frame_shuffle":
        pairs = np.arange(0, n - 1, 2)
        k = round(spec.strength * len(pairs))
        chosen = rng.choice(pairs, size=k, replace=False) if k else []
        for i in sorted(chosen):
            frames[[i, i + 1]] = frames[[i + 1, i]]
    elif spec.kind == "temporal_jitter":
        offsets = np.rint(rng.normal(0.0, spec.strength * 3.0, size=n)).astype(int)
        idx = np.clip(np.arange(n) + offsets, 0, n - 1)
        frames = seq.frames[idx].copy()
    elif spec.kind == "frame_drop_repeat":
        candidates = np.arange(2, n, 2)
        k = round(spec.strength * len(candidates))
        chosen = rng.choice(candidates, size=k, replace=False) if k else []
        for i in sorted(chosen):
            frames[i] = seq.frames[i - 1]
    elif spec.kind == "additive_noise":
        noise = rng.normal(0.0, spec.strength * 0.1, size=frames.shape)
        frames = np.clip(frames + noise.astype(np.float32), 0.0, 1.0)

    out = LumaSequence(frames, seq.frame_rate,
                       f"{seq.source_id}+{spec.kind}@{spec.strength:g}#{spec.seed}")
    return out
