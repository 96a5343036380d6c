"""Completely blind video quality assessment.

Temporal quality comes from the straightness and compactness of per-frame
perceptual trajectories (LGN bandpass + V1 Gabor energy, PCA-reduced);
spatial quality from NIQE; the two fuse into an overall index that needs no
training on opinion scores and no reference video.
"""

from .descriptor import DescriptorKind, describe, domain_score, tpqi
from .evaluate import QualityReport, evaluate_manifest, fit_logistic, fuse, plcc_rmse, srcc
from .niqe import NiqeModel, niqe_score, train_model, video_spatial_score
from .pipeline import PipelineConfig, score_path, score_sequence
from .trajectory import Trajectory, gram_pca, pca_reduce
from .videoio import LumaSequence, read_video, resize

__version__ = "0.1.0"

__all__ = [
    "DescriptorKind", "describe", "domain_score", "tpqi",
    "QualityReport", "evaluate_manifest", "fit_logistic", "fuse", "plcc_rmse", "srcc",
    "NiqeModel", "niqe_score", "train_model", "video_spatial_score",
    "PipelineConfig", "score_path", "score_sequence",
    "Trajectory", "gram_pca", "pca_reduce",
    "LumaSequence", "read_video", "resize",
    "__version__",
]
