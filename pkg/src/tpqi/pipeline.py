"""End-to-end scoring pipeline: ingest -> perceptual features -> PCA ->
descriptor, plus native-resolution spatial scoring and fusion.

Every report embeds a fingerprint of the value-affecting configuration.
Stage outputs are cached content-addressed, keyed by (stage name, input
content hash, fingerprint of the config subset that stage depends on), so
parameter sweeps reuse upstream work.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import descriptor, lgn, niqe, trajectory, v1, videoio
from .evaluate import QualityReport, fuse

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    """A pipeline stage failed; the message names the stage and frame."""


@dataclass
class PipelineConfig:
    # V1/LGN working resolution (width, height) and reduction settings.
    v1_width: int = 480
    v1_height: int = 270
    pca_dim: int = 10
    pool: int = 4
    # Gabor bank shape.
    scales: int = 6
    orientations: int = 8
    kernel_size: int = 39
    f_max: float = 0.25
    sigma_factor: float = 0.56
    gabor_gamma: float = 0.5
    gabor_phase: float = 0.0
    # LGN pyramid.
    lgn_levels: int = 5
    lgn_norm_constant: float = 0.17
    # Scoring.
    fusion: str = "product"
    descriptor_variant: str = "vpt"
    distance_option: str = "norm_of_sum"
    niqe_model: str | None = None
    niqe_patch: int = 96
    # Runtime-only knobs; excluded from the fingerprint because they must
    # not change any score.
    cache_budget: int = 2 << 30
    cache_features: bool = False
    threads: int = 1

    _RUNTIME_FIELDS = ("cache_budget", "cache_features", "threads")

    def lgn_config(self) -> lgn.LgnConfig:
        return lgn.LgnConfig(
            levels=self.lgn_levels,
            norm_constants=(self.lgn_norm_constant,) * self.lgn_levels,
        )

    def bank(self) -> v1.GaborBank:
        return v1.default_bank(
            scales=self.scales,
            orientations=self.orientations,
            size=self.kernel_size,
            f_max=self.f_max,
            sigma_factor=self.sigma_factor,
            gamma=self.gabor_gamma,
            phi=self.gabor_phase,
            pool=self.pool,
        )

    def kind(self) -> descriptor.DescriptorKind:
        return descriptor.DescriptorKind(self.descriptor_variant, self.distance_option)

    def _value_dict(self) -> dict:
        d = asdict(self)
        for k in self._RUNTIME_FIELDS:
            d.pop(k)
        return d

    def fingerprint(self) -> str:
        blob = json.dumps(self._value_dict(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def _sub_fingerprint(self, keys: tuple[str, ...]) -> str:
        d = self._value_dict()
        blob = json.dumps({k: d[k] for k in keys}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    _RESIZE_KEYS = ("v1_width", "v1_height")
    _LGN_KEYS = _RESIZE_KEYS + ("lgn_levels", "lgn_norm_constant")
    _V1_KEYS = _RESIZE_KEYS + ("pool", "scales", "orientations", "kernel_size",
                               "f_max", "sigma_factor", "gabor_gamma", "gabor_phase")

    def stage_fingerprint(self, stage: str) -> str:
        if stage == "feat-lgn":
            return self._sub_fingerprint(self._LGN_KEYS)
        if stage == "feat-v1":
            return self._sub_fingerprint(self._V1_KEYS)
        if stage == "traj-lgn":
            return self._sub_fingerprint(self._LGN_KEYS + ("pca_dim",))
        if stage == "traj-v1":
            return self._sub_fingerprint(self._V1_KEYS + ("pca_dim",))
        if stage == "niqe":
            model_tag = ""
            if self.niqe_model:
                model_tag = hash_file(self.niqe_model)
            blob = json.dumps({"patch": self.niqe_patch, "model": model_tag})
            return hashlib.sha256(blob.encode()).hexdigest()[:16]
        if stage == "report":
            return self.fingerprint()
        raise ValueError(f"unknown stage {stage!r}")


def hash_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def hash_sequence(seq: videoio.LumaSequence) -> str:
    h = hashlib.sha256()
    h.update(np.array(seq.frames.shape).tobytes())
    h.update(np.ascontiguousarray(seq.frames, dtype="<f4").tobytes())
    return h.hexdigest()[:16]


class StageCache:
    """Content-addressed stage cache with atomic write-then-rename."""

    def __init__(self, root):
        self.root = Path(root) if root else None
        if self.root:
            self.root.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self.misses = 0

    def _path(self, stage: str, content_hash: str, stage_fp: str, ext: str) -> Path:
        key = hashlib.sha256(f"{stage}|{content_hash}|{stage_fp}".encode()).hexdigest()[:32]
        return self.root / f"{stage}-{key}.{ext}"

    def _finish(self, tmp: Path, final: Path) -> None:
        os.replace(tmp, final)

    def load_matrix(self, stage, content_hash, stage_fp):
        if not self.root:
            return None
        p = self._path(stage, content_hash, stage_fp, "mat")
        if p.exists():
            self.hits += 1
            log.info("cache hit: %s", p.name)
            return trajectory.load_matrix(p)
        self.misses += 1
        return None

    def store_matrix(self, stage, content_hash, stage_fp, m) -> None:
        if not self.root:
            return
        p = self._path(stage, content_hash, stage_fp, "mat")
        fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
        os.close(fd)
        trajectory.save_matrix(tmp, m)
        self._finish(Path(tmp), p)

    def load_json(self, stage, content_hash, stage_fp):
        if not self.root:
            return None
        p = self._path(stage, content_hash, stage_fp, "json")
        if p.exists():
            self.hits += 1
            log.info("cache hit: %s", p.name)
            return json.loads(p.read_text())
        self.misses += 1
        return None

    def store_json(self, stage, content_hash, stage_fp, obj) -> None:
        if not self.root:
            return
        p = self._path(stage, content_hash, stage_fp, "json")
        fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
        os.close(fd)
        Path(tmp).write_text(json.dumps(obj))
        self._finish(Path(tmp), p)


def default_cache_dir() -> Path:
    env = os.environ.get("TPQI_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "tpqi"


def _extract_features(seq: videoio.LumaSequence, domain: str, cfg: PipelineConfig
                      ) -> trajectory.FeatureStore:
    store = trajectory.FeatureStore(budget_bytes=cfg.cache_budget)
    if domain == "lgn":
        lcfg = cfg.lgn_config()
        extract = lambda f: lgn.lgn_features(f, lcfg)
    elif domain == "v1":
        bank = cfg.bank()
        extract = lambda f: v1.v1_energy(f, bank)
    else:
        raise ValueError(f"unknown feature domain {domain!r}")
    for i, frame in enumerate(seq.frames):
        try:
            store.append(extract(frame))
        except Exception as exc:
            store.close()
            raise StageError(f"stage feat-{domain}, frame {i}: {exc}") from exc
    return store


def feature_matrix(seq: videoio.LumaSequence, domain: str, cfg: PipelineConfig) -> np.ndarray:
    """Per-frame feature matrix for dumping; resizes to the working
    resolution first."""
    resized = videoio.resize(seq, cfg.v1_width, cfg.v1_height)
    store = _extract_features(resized, domain, cfg)
    try:
        return np.array(store.matrix())
    finally:
        store.close()


def domain_trajectory(seq_resized: videoio.LumaSequence, domain: str, cfg: PipelineConfig,
                      cache: StageCache | None = None, content_hash: str = "",
                      ) -> trajectory.Trajectory:
    """Trajectory for one perceptual domain, using cached stages when possible."""
    stage = f"traj-{domain}"
    if cache:
        cached = cache.load_json(stage, content_hash, cfg.stage_fingerprint(stage))
        if cached is not None:
            return trajectory.Trajectory(np.array(cached["points"]),
                                         np.array(cached["variance"]))

    feat_stage = f"feat-{domain}"
    store = None
    matrix = None
    if cache and cfg.cache_features:
        matrix = cache.load_matrix(feat_stage, content_hash,
                                   cfg.stage_fingerprint(feat_stage))
    if matrix is None:
        store = _extract_features(seq_resized, domain, cfg)
        matrix = store.matrix()
        if cache and cfg.cache_features:
            cache.store_matrix(feat_stage, content_hash,
                               cfg.stage_fingerprint(feat_stage), matrix)
    d = min(cfg.pca_dim, matrix.shape[0], matrix.shape[1])
    if d < cfg.pca_dim:
        log.debug("clamping pca_dim %d -> %d for %d frames", cfg.pca_dim, d,
                  matrix.shape[0])
    try:
        traj = trajectory.pca_reduce(matrix, d)
    except Exception as exc:
        raise StageError(f"stage {stage}: {exc}") from exc
    finally:
        if store is not None:
            store.close()

    if cache:
        cache.store_json(stage, content_hash, cfg.stage_fingerprint(stage),
                         {"points": traj.points.tolist(),
                          "variance": traj.explained_variance.tolist()})
    return traj


def score_sequence(seq: videoio.LumaSequence, cfg: PipelineConfig,
                   model: niqe.NiqeModel | None = None,
                   cache: StageCache | None = None,
                   content_hash: str = "") -> QualityReport:
    """Full per-video report: temporal index from both perceptual domains at
    the working resolution, spatial index at the native resolution, fusions."""
    seq.validate()
    if not content_hash:
        content_hash = hash_sequence(seq)
    if cache:
        cached = cache.load_json("report", content_hash, cfg.fingerprint())
        if cached is not None:
            rep = QualityReport.from_dict(cached)
            rep.source_id = seq.source_id or rep.source_id
            return rep

    resized = videoio.resize(seq, cfg.v1_width, cfg.v1_height)
    kind = cfg.kind()
    flags = []
    scores = {}
    for domain in ("lgn", "v1"):
        traj = domain_trajectory(resized, domain, cfg, cache, content_hash)
        series = descriptor.describe(traj.points, kind)
        scores[domain] = series.score()
        if series.degenerate:
            flags.append(domain)
    q_lgn, q_v1 = scores["lgn"], scores["v1"]
    q_tpqi = (q_lgn + q_v1) / 2.0

    q_niqe = None
    if model is not None:
        cached = cache.load_json("niqe", content_hash,
                                 cfg.stage_fingerprint("niqe")) if cache else None
        if cached is not None:
            q_niqe = float(cached)
        else:
            try:
                q_niqe = niqe.video_spatial_score(seq, model)
            except Exception as exc:
                raise StageError(f"stage niqe: {exc}") from exc
            if cache:
                cache.store_json("niqe", content_hash, cfg.stage_fingerprint("niqe"),
                                 q_niqe)

    report = QualityReport(
        source_id=seq.source_id,
        q_tpqi=q_tpqi,
        q_tpqi_lgn=q_lgn,
        q_tpqi_v1=q_v1,
        q_niqe=q_niqe,
        q_overall_sum=fuse(q_niqe, q_tpqi, "sum") if q_niqe is not None else None,
        q_overall_product=fuse(q_niqe, q_tpqi, "product") if q_niqe is not None else None,
        degenerate_flags=flags,
        config_fingerprint=cfg.fingerprint(),
    )
    if cache:
        cache.store_json("report", content_hash, cfg.fingerprint(), report.to_dict())
    return report


def score_path(path, cfg: PipelineConfig, model: niqe.NiqeModel | None = None,
               cache: StageCache | None = None) -> QualityReport:
    seq = videoio.read_video(path)
    seq.source_id = str(path)
    content_hash = hash_file(path) if Path(path).is_file() else hash_sequence(seq)
    return score_sequence(seq, cfg, model, cache, content_hash)


def score_manifest(entries, cfg: PipelineConfig, model: niqe.NiqeModel | None = None,
                   cache: StageCache | None = None, skip_errors: bool = False):
    """Score every manifest entry, in parallel up to ``cfg.threads``.

    Returns (reports, failures) where failures is a list of (path, message).
    """
    failures = []

    def job(path):
        return score_path(path, cfg, model, cache)

    reports = []
    with ThreadPoolExecutor(max_workers=max(1, cfg.threads)) as pool:
        futures = {path: pool.submit(job, path) for path, _ in entries}
        for path, _ in entries:
            try:
                reports.append(futures[path].result())
            except Exception as exc:
                if not skip_errors:
                    raise
                log.error("skipping %s: %s", path, exc)
                failures.append((path, str(exc)))
    return reports, failures
