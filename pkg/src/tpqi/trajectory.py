"""Temporal trajectories: PCA reduction of per-frame feature vectors.

Feature dimensionality D routinely dwarfs the frame count N, so the heavy
route is the snapshot (Gram) method: eigendecompose the N x N matrix of
centered inner products and recover the projections as eigenvector times
singular value.  Both routes share a deterministic sign convention so
results are reproducible bit-for-bit.
"""

from __future__ import annotations

import csv
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAT_MAGIC = b"TPQIMAT1"


@dataclass
class Trajectory:
    """N x d per-frame points after PCA, plus the explained variances
    (descending, sample convention)."""

    points: np.ndarray
    explained_variance: np.ndarray

    @property
    def n_frames(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _check_args(m: np.ndarray, d: int) -> np.ndarray:
    # keep the input dtype: a float32 store must not be duplicated in
    # float64 wholesale; blocks are upcast as they are touched
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError("feature matrix must be 2-D (frames x dims)")
    n, dims = m.shape
    if n < 3:
        raise ValueError(f"need >= 3 frames, got {n}")
    if d > min(n, dims):
        raise ValueError(f"d={d} exceeds min(N, D) = {min(n, dims)}")
    if not np.isfinite(m).all():
        raise ValueError("feature matrix contains non-finite values")
    return m


def _normalize_signs(points: np.ndarray, loadings: np.ndarray) -> None:
    """Flip each axis so its largest-magnitude loading entry is positive.

    ``loadings`` is d x D (one principal axis per row); flips are applied
    in place to both arrays.
    """
    for k in range(loadings.shape[0]):
        row = loadings[k]
        if row.size == 0:
            continue
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            loadings[k] = -row
            points[:, k] = -points[:, k]


def pca_reduce(m: np.ndarray, d: int) -> Trajectory:
    """Project frames onto the top-d principal axes of the centered matrix.

    Dispatches to the Gram route when D > N; otherwise uses the SVD of the
    centered matrix directly.  Rank-deficient inputs get zero-filled
    trailing components with zero explained variance.
    """
    m = _check_args(m, d)
    n, dims = m.shape
    if dims > n:
        return gram_pca(m, d)
    centered = m - m.mean(axis=0, keepdims=True, dtype=np.float64)
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    s = s[:d]
    tiny = s <= s[0] * 1e-12 if s.size and s[0] > 0 else np.ones_like(s, dtype=bool)
    s = np.where(tiny, 0.0, s)
    points = u[:, :d] * s
    loadings = vt[:d].copy()
    _normalize_signs(points, loadings)
    variance = s**2 / (n - 1)
    return Trajectory(points, variance)


def gram_pca(m: np.ndarray, d: int, block_cols: int | None = None) -> Trajectory:
    """Snapshot PCA: eigendecompose the N x N centered Gram matrix.

    ``block_cols`` bounds how many feature columns are held in memory at a
    time; the Gram matrix and the sign-convention loadings are accumulated
    over column blocks in two passes.
    """
    m = _check_args(m, d)
    n, dims = m.shape
    if block_cols is None or block_cols >= dims:
        centered = m - m.mean(axis=0, keepdims=True, dtype=np.float64)
        gram = centered @ centered.T
    else:
        mean = m.mean(axis=0, dtype=np.float64)
        gram = np.zeros((n, n))
        for lo in range(0, dims, block_cols):
            block = m[:, lo : lo + block_cols] - mean[lo : lo + block_cols]
            gram += block @ block.T
    eigvals, eigvecs = np.linalg.eigh(gram)
    order = np.argsort(eigvals)[::-1][:d]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]
    top = eigvals[0] if eigvals.size else 0.0
    eigvals[eigvals <= top * 1e-12] = 0.0
    s = np.sqrt(eigvals)
    points = eigvecs * s

    # Loadings v_k = centered^T u_k / s_k, streamed for the sign convention.
    if block_cols is None or block_cols >= dims:
        loadings = centered.T @ eigvecs
        with np.errstate(invalid="ignore", divide="ignore"):
            loadings = np.where(s > 0, loadings / s, 0.0).T
        _normalize_signs(points, loadings)
    else:
        best_abs = np.zeros(d)
        best_val = np.zeros(d)
        for lo in range(0, dims, block_cols):
            block = m[:, lo : lo + block_cols] - mean[lo : lo + block_cols]
            part = block.T @ eigvecs  # (B, d)
            idx = np.argmax(np.abs(part), axis=0)
            vals = part[idx, np.arange(d)]
            better = np.abs(vals) > best_abs
            best_abs = np.where(better, np.abs(vals), best_abs)
            best_val = np.where(better, vals, best_val)
        signs = np.where((best_val < 0) & (s > 0), -1.0, 1.0)
        points = points * signs
    variance = eigvals / (n - 1)
    return Trajectory(points, variance)


class FeatureStore:
    """Accumulates per-frame feature vectors as float32 rows, spilling to a
    temporary on-disk memmap once the in-memory estimate exceeds the byte
    budget."""

    def __init__(self, budget_bytes: int = 2 << 30, spill_dir=None):
        self.budget = budget_bytes
        self.spill_dir = spill_dir
        self._rows: list[np.ndarray] = []
        self._bytes = 0
        self._mmap: np.memmap | None = None
        self._path: Path | None = None
        self._capacity = 0
        self._count = 0
        self.dim: int | None = None

    def append(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float32).ravel()
        if self.dim is None:
            self.dim = vec.size
        elif vec.size != self.dim:
            raise ValueError(f"feature length changed: {vec.size} != {self.dim}")
        if self._mmap is not None:
            self._grow(self._count + 1)
            self._mmap[self._count] = vec
        else:
            self._rows.append(vec)
            self._bytes += vec.nbytes
            if self._bytes > self.budget:
                self._spill()
        self._count += 1

    def _spill(self) -> None:
        fd = tempfile.NamedTemporaryFile(
            prefix="tpqi-feat-", suffix=".f32", dir=self.spill_dir, delete=False
        )
        fd.close()
        self._path = Path(fd.name)
        self._capacity = max(len(self._rows), 1)
        self._mmap = np.memmap(self._path, dtype=np.float32, mode="w+",
                               shape=(self._capacity, self.dim))
        for i, row in enumerate(self._rows):
            self._mmap[i] = row
        self._rows = []

    def _grow(self, needed: int) -> None:
        if needed <= self._capacity:
            return
        new_cap = max(needed, self._capacity * 2)
        self._mmap.flush()
        del self._mmap
        with open(self._path, "r+b") as fh:
            fh.truncate(new_cap * self.dim * 4)
        self._mmap = np.memmap(self._path, dtype=np.float32, mode="r+",
                               shape=(new_cap, self.dim))
        self._capacity = new_cap

    @property
    def n_rows(self) -> int:
        return self._count

    @property
    def spilled(self) -> bool:
        return self._mmap is not None

    def matrix(self) -> np.ndarray:
        if self._mmap is not None:
            return self._mmap[: self._count]
        if not self._rows:
            return np.zeros((0, self.dim or 0), dtype=np.float32)
        return np.stack(self._rows)

    def reduce(self, d: int, block_cols: int = 1 << 16) -> Trajectory:
        """PCA over the stored rows; always the blocked Gram route when the
        store has spilled."""
        if self.spilled:
            return gram_pca(self.matrix(), d, block_cols=block_cols)
        return pca_reduce(self.matrix(), d)

    def close(self) -> None:
        if self._mmap is not None:
            del self._mmap
            self._mmap = None
            if self._path and self._path.exists():
                self._path.unlink()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


def save_matrix(path, m: np.ndarray) -> None:
    """TPQIMAT1: 8-byte magic, u32 LE rows, u32 LE cols, u64 LE reserved,
    then float32 LE row-major data."""
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError("matrix must be 2-D")
    with open(path, "wb") as fh:
        fh.write(MAT_MAGIC)
        fh.write(np.array(m.shape, dtype="<u4").tobytes())
        fh.write(np.zeros(1, dtype="<u8").tobytes())
        fh.write(np.ascontiguousarray(m, dtype="<f4").tobytes())


def load_matrix(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 24 or data[:8] != MAT_MAGIC:
        raise ValueError("missing TPQIMAT1 magic")
    rows, cols = np.frombuffer(data[8:16], dtype="<u4")
    expected = 24 + int(rows) * int(cols) * 4
    if len(data) < expected:
        raise ValueError(f"truncated matrix payload: {len(data)} < {expected} bytes")
    return np.frombuffer(data[24:expected], dtype="<f4").reshape(int(rows), int(cols)).copy()


def save_matrix_csv(path, m: np.ndarray) -> None:
    m = np.asarray(m, dtype=np.float32)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in m:
            writer.writerow([f"{v:.9g}" for v in row])


def load_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    return np.asarray(rows, dtype=np.float32)
