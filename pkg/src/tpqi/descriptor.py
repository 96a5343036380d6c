"""Trajectory morphology descriptors and the temporal quality score.

A trajectory unit is three consecutive perceptual points.  Each unit yields
a curvature (angle between the two difference vectors), a compactness
distance, and a combined per-instant value; the per-domain score is the log
of the mean over instants, and the final temporal index averages the LGN and
V1 domain scores.

Instants whose difference vectors collapse below ``EPS_NORM`` (exact
duplicate frames, common after frame-rate conversion) are skipped rather
than counted as zero curvature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

EPS_NORM = 1e-12  # degenerate difference-vector threshold
EPS_LOG = 1e-12   # floor for the mean before the log

VARIANTS = ("vpt", "curvature_only", "distance_only", "linear_error")
DISTANCE_OPTIONS = ("norm_first", "norm_second", "sum_of_norms", "norm_of_sum",
                    "point_to_line")

LOG_FLOOR = math.log(EPS_LOG)


@dataclass(frozen=True)
class DescriptorKind:
    variant: str = "vpt"
    distance_option: str = "norm_of_sum"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        if self.distance_option not in DISTANCE_OPTIONS:
            raise ValueError(
                f"unknown distance option {self.distance_option!r}, "
                f"expected one of {DISTANCE_OPTIONS}"
            )


@dataclass
class DescriptorSeries:
    """Per-instant descriptor values for one perceptual domain.

    Arrays cover the non-skipped instants in order; ``skipped`` holds the
    zero-based middle-frame index of every unit excluded for degenerate
    difference vectors.
    """

    theta: np.ndarray
    s: np.ndarray
    q: np.ndarray
    skipped: list[int] = field(default_factory=list)

    @property
    def mean_q(self) -> float:
        return float(self.q.mean()) if self.q.size else 0.0

    @property
    def degenerate(self) -> bool:
        return self.q.size == 0 or self.mean_q < EPS_LOG

    def score(self) -> float:
        return math.log(max(self.mean_q, EPS_LOG))


def curvature(x_prev, x_cur, x_next) -> float | None:
    """Angle in [0, pi] between the two difference vectors, or None when a
    difference vector is degenerate (skip signal, not an error)."""
    v1 = np.asarray(x_cur, dtype=np.float64) - np.asarray(x_prev, dtype=np.float64)
    v2 = np.asarray(x_next, dtype=np.float64) - np.asarray(x_cur, dtype=np.float64)
    n1 = np.linalg.norm(v1)
    n2 = np.linalg.norm(v2)
    if n1 < EPS_NORM or n2 < EPS_NORM:
        return None
    cos = np.dot(v1 / n1, v2 / n2)
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


def distance(x_prev, x_cur, x_next, option: str = "norm_of_sum") -> float | None:
    """Compactness distance of the trajectory unit under the given option.

    The default is the norm of the sum of the difference vectors, i.e.
    ||x_next - x_prev||.  ``point_to_line`` measures the perpendicular
    distance from x_next to the line through x_prev and x_cur and skips when
    that line is undefined.
    """
    x_prev = np.asarray(x_prev, dtype=np.float64)
    x_cur = np.asarray(x_cur, dtype=np.float64)
    x_next = np.asarray(x_next, dtype=np.float64)
    if option == "norm_first":
        return float(np.linalg.norm(x_cur - x_prev))
    if option == "norm_second":
        return float(np.linalg.norm(x_next - x_cur))
    if option == "sum_of_norms":
        return float(np.linalg.norm(x_cur - x_prev) + np.linalg.norm(x_next - x_cur))
    if option == "norm_of_sum":
        return float(np.linalg.norm(x_next - x_prev))
    if option == "point_to_line":
        u = x_cur - x_prev
        nu = np.linalg.norm(u)
        if nu < EPS_NORM:
            return None
        w = x_next - x_prev
        return float(np.linalg.norm(w - (np.dot(w, u) / nu**2) * u))
    raise ValueError(f"unknown distance option {option!r}")


def vpt_instant(theta: float, s: float) -> float:
    """Per-instant temporal distortion: theta * sqrt(s)."""
    return theta * math.sqrt(s)


def linear_error_instant(x_prev, x_cur, x_next) -> float:
    """Deviation of x_next from first-order linear extrapolation,
    ||x_next - (2 x_cur - x_prev)||."""
    x_prev = np.asarray(x_prev, dtype=np.float64)
    x_cur = np.asarray(x_cur, dtype=np.float64)
    x_next = np.asarray(x_next, dtype=np.float64)
    return float(np.linalg.norm(x_next - (2.0 * x_cur - x_prev)))


def describe(points: np.ndarray, kind: DescriptorKind | None = None) -> DescriptorSeries:
    """Compute the per-instant series over an N x d trajectory."""
    if kind is None:
        kind = DescriptorKind()
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    if n < 3:
        raise ValueError(f"trajectory needs >= 3 points, got {n}")
    diffs = np.diff(points, axis=0)
    norms = np.linalg.norm(diffs, axis=1)

    thetas, dists, qs, skipped = [], [], [], []
    for i in range(1, n - 1):
        if norms[i - 1] < EPS_NORM or norms[i] < EPS_NORM:
            skipped.append(i)
            continue
        cos = np.dot(diffs[i - 1] / norms[i - 1], diffs[i] / norms[i])
        theta = float(np.arccos(np.clip(cos, -1.0, 1.0)))
        s = distance(points[i - 1], points[i], points[i + 1], kind.distance_option)
        if s is None:
            skipped.append(i)
            continue
        if kind.variant == "vpt":
            q = vpt_instant(theta, s)
        elif kind.variant == "curvature_only":
            q = theta
        elif kind.variant == "distance_only":
            q = s
        else:
            q = linear_error_instant(points[i - 1], points[i], points[i + 1])
        thetas.append(theta)
        dists.append(s)
        qs.append(q)
    return DescriptorSeries(np.array(thetas), np.array(dists), np.array(qs), skipped)


def domain_score(points: np.ndarray, kind: DescriptorKind | None = None) -> float:
    """log of the mean per-instant value over non-skipped instants, floored
    at EPS_LOG.  A fully static trajectory (all instants skipped) scores the
    floor; check :meth:`DescriptorSeries.degenerate` to surface it."""
    return describe(points, kind).score()


def tpqi(traj_lgn=None, traj_v1=None, kind: DescriptorKind | None = None) -> float:
    """Mean of the per-domain scores.  Pass a single trajectory for the
    one-domain variants."""
    scores = []
    for traj in (traj_lgn, traj_v1):
        if traj is None:
            continue
        points = traj.points if hasattr(traj, "points") else traj
        scores.append(domain_score(points, kind))
    if not scores:
        raise ValueError("at least one trajectory is required")
    return float(np.mean(scores))
