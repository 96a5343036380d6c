"""Score fusion and the standard VQA evaluation protocol.

Predictions are rank-correlated against MOS directly (SRCC), then mapped
through the four-parameter logistic suggested by VQEG before computing PLCC
and RMSE.  The logistic fit is a derivative-free simplex search restarted
from a direction-flipped initialization when it cannot beat a straight-line
baseline, which covers predictors that are inversely related to MOS.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit
from scipy.stats import rankdata

log = logging.getLogger(__name__)

_BETA4_MIN = 1e-6


@dataclass
class LogisticParams:
    beta1: float
    beta2: float
    beta3: float
    beta4: float

    def as_array(self) -> np.ndarray:
        return np.array([self.beta1, self.beta2, self.beta3, self.beta4])


@dataclass
class DatasetManifest:
    entries: list[tuple[str, float]]
    name: str = ""

    def validate(self) -> "DatasetManifest":
        if len(self.entries) < 4:
            raise ValueError(f"manifest needs >= 4 entries for the logistic fit, "
                             f"got {len(self.entries)}")
        if not all(np.isfinite(m) for _, m in self.entries):
            raise ValueError("manifest contains non-finite MOS values")
        return self


@dataclass
class QualityReport:
    """Per-video scores plus provenance; optional fields are None when the
    corresponding stage did not run."""

    source_id: str
    q_tpqi: float | None = None
    q_tpqi_lgn: float | None = None
    q_tpqi_v1: float | None = None
    q_niqe: float | None = None
    q_overall_sum: float | None = None
    q_overall_product: float | None = None
    degenerate_flags: list[str] = field(default_factory=list)
    config_fingerprint: str = ""

    SCORE_FIELDS = ("tpqi", "tpqi_lgn", "tpqi_v1", "niqe", "overall_sum",
                    "overall_product")

    def score(self, score_field: str) -> float:
        value = {
            "tpqi": self.q_tpqi,
            "tpqi_lgn": self.q_tpqi_lgn,
            "tpqi_v1": self.q_tpqi_v1,
            "niqe": self.q_niqe,
            "overall_sum": self.q_overall_sum,
            "overall_product": self.q_overall_product,
        }.get(score_field)
        if value is None:
            raise ValueError(f"report for {self.source_id} has no {score_field!r} score")
        return value

    def to_dict(self) -> dict:
        return {
            "source_id": self.source_id,
            "q_tpqi": self.q_tpqi,
            "q_tpqi_lgn": self.q_tpqi_lgn,
            "q_tpqi_v1": self.q_tpqi_v1,
            "q_niqe": self.q_niqe,
            "q_overall_sum": self.q_overall_sum,
            "q_overall_product": self.q_overall_product,
            "degenerate_flags": self.degenerate_flags,
            "config_fingerprint": self.config_fingerprint,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QualityReport":
        return cls(**d)


def fuse(q_niqe: float, q_tpqi: float, strategy: str = "product") -> float:
    """Combine spatial and temporal scores: plain sum or product."""
    if not (np.isfinite(q_niqe) and np.isfinite(q_tpqi)):
        raise ValueError("scores must be finite")
    if strategy == "sum":
        return q_niqe + q_tpqi
    if strategy == "product":
        if q_tpqi <= 0:
            log.warning("q_tpqi=%g <= 0 under product fusion; fused ordering may "
                        "not be monotone", q_tpqi)
        return q_niqe * q_tpqi
    raise ValueError(f"unknown fusion strategy {strategy!r}")


def logistic_apply(params: LogisticParams, x) -> np.ndarray:
    """Q = b2 + (b1 - b2) / (1 + exp(-(x - b3)/|b4|))."""
    x = np.asarray(x, dtype=np.float64)
    b4 = max(abs(params.beta4), _BETA4_MIN)
    return params.beta2 + (params.beta1 - params.beta2) * expit((x - params.beta3) / b4)


def _sse(beta: np.ndarray, pred: np.ndarray, mos: np.ndarray) -> float:
    p = LogisticParams(*beta)
    r = logistic_apply(p, pred) - mos
    return float(r @ r)


def _simplex(beta0: np.ndarray, pred: np.ndarray, mos: np.ndarray) -> np.ndarray:
    best = beta0
    best_sse = _sse(beta0, pred, mos)
    # Outer polish loop: re-seed the simplex at the optimum until the
    # relative improvement stalls below 1e-10.
    for _ in range(5):
        res = minimize(_sse, best, args=(pred, mos), method="Nelder-Mead",
                       options={"maxiter": 2000, "xatol": 1e-12,
                                "fatol": 1e-12 * (1.0 + best_sse)})
        if res.fun < best_sse:
            improved = (best_sse - res.fun) / max(best_sse, 1e-300)
            best, best_sse = res.x, res.fun
            if improved < 1e-10:
                break
        else:
            break
    return best


def fit_logistic(pred, mos) -> LogisticParams:
    """Least-squares fit of the 4-parameter VQEG logistic."""
    pred = np.asarray(pred, dtype=np.float64)
    mos = np.asarray(mos, dtype=np.float64)
    if pred.shape != mos.shape or pred.size < 4:
        raise ValueError("need equal-length inputs with >= 4 points")
    if np.ptp(pred) == 0:
        raise ValueError("degenerate predictor: all predictions equal")
    init = np.array([mos.max(), mos.min(), float(np.median(pred)),
                     max(float(np.std(pred)), _BETA4_MIN)])
    beta = _simplex(init, pred, mos)

    # A straight line is in the logistic family's closure; if the fit cannot
    # match it, restart once with the direction flipped.
    slope, intercept = np.polyfit(pred, mos, 1)
    linear_sse = float(np.sum((slope * pred + intercept - mos) ** 2))
    if _sse(beta, pred, mos) > linear_sse + 1e-12:
        flipped = np.array([init[1], init[0], init[2], init[3]])
        beta_alt = _simplex(flipped, pred, mos)
        if _sse(beta_alt, pred, mos) < _sse(beta, pred, mos):
            beta = beta_alt
    b1, b2, b3, b4 = beta
    return LogisticParams(b1, b2, b3, float(np.sign(b4) or 1.0) * max(abs(b4), _BETA4_MIN))


def srcc(a, b) -> float:
    """Spearman rank correlation: Pearson correlation of average ranks."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.size < 2:
        raise ValueError("need equal-length inputs with >= 2 points")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise ValueError("rank correlation undefined for a constant list")
    ra = rankdata(a)
    rb = rankdata(b)
    return float(np.corrcoef(ra, rb)[0, 1])


def plcc_rmse(pred_fitted, mos) -> tuple[float, float]:
    """Pearson correlation and RMSE between mapped predictions and MOS."""
    pred_fitted = np.asarray(pred_fitted, dtype=np.float64)
    mos = np.asarray(mos, dtype=np.float64)
    if pred_fitted.shape != mos.shape or pred_fitted.size < 2:
        raise ValueError("need equal-length inputs with >= 2 points")
    if np.ptp(pred_fitted) == 0 or np.ptp(mos) == 0:
        raise ValueError("Pearson correlation undefined for a constant list")
    plcc = float(np.corrcoef(pred_fitted, mos)[0, 1])
    rmse = float(np.sqrt(np.mean((pred_fitted - mos) ** 2)))
    return plcc, rmse


def load_manifest(path, name: str = "") -> DatasetManifest:
    """CSV with header ``path,mos``; ``#`` comment lines allowed."""
    entries = []
    p = Path(path)
    with open(p, newline="") as fh:
        rows = [r for r in csv.reader(fh)
                if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ValueError(f"empty manifest {p}")
    start = 1 if [c.strip().lower() for c in rows[0][:2]] == ["path", "mos"] else 0
    for row in rows[start:]:
        if len(row) < 2:
            raise ValueError(f"manifest row needs path,mos: {row!r}")
        entries.append((row[0].strip(), float(row[1])))
    return DatasetManifest(entries, name=name or p.stem).validate()


def evaluate_manifest(manifest: DatasetManifest, reports, score_field: str = "tpqi"
                      ) -> tuple[float, float, float, LogisticParams]:
    """SRCC on raw scores, then PLCC/RMSE after the logistic mapping.

    Every manifest entry must have a matching report (by source path).
    """
    by_id = {r.source_id: r for r in reports}
    missing = [path for path, _ in manifest.entries if path not in by_id]
    if missing:
        raise ValueError(f"missing reports for: {', '.join(missing)}")
    pred = np.array([by_id[path].score(score_field) for path, _ in manifest.entries])
    mos = np.array([m for _, m in manifest.entries])
    rho = srcc(pred, mos)
    params = fit_logistic(pred, mos)
    plcc, rmse = plcc_rmse(logistic_apply(params, pred), mos)
    return rho, plcc, rmse, params
