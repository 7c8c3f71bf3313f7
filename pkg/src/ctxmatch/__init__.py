"""ctxmatch: descriptor-space and keypoint-space context filtering for
image feature correspondences.

The package provides blob matching (rank pre-filtering, greedy many-to-many
selection, NNR-style scoring, symmetric combination), Delaunay Triangulation
Matching (a parameter-free local spatial filter), 1SAC model filtering, and
a correspondence evaluation harness with a batch CLI and synthetic scenes.
"""

from .blob import OMEGA, BlobMatcher, blob_match, combine, greedy_select, nnr_score, prefilter
from .core import (
    DistanceMatrix,
    Keypoint,
    Match,
    MatchSet,
    PairContext,
    compute_distance_matrix,
    kth_best,
)
from .dtm import DtmFilter, DtmState, collapse, dtm, dtm1, dtm2
from .errors import CtxMatchError, DegenerateGeometryError, ModelFitError, ParseError
from .evaluation import (
    CameraPose,
    EvalReport,
    GroundTruth,
    Tolerances,
    average_precision,
    classify,
    f_beta,
    mean_average_precision,
    normalized_correct_count,
    score_pair,
)
from .geometry import (
    BoundarySet,
    Triangulation,
    adjacency,
    alpha_boundary,
    build_dtm_boundary,
    convex_hull,
    delaunay,
    locate_triangle,
)
from .model import (
    FundamentalMatrix,
    Homography,
    OneSac,
    OneSacResult,
    ellipse_overlap_error,
    epipolar_distance,
    fit_fundamental,
    fit_homography,
    one_sac,
    reprojection_error,
)
from .synth import SynthScene, synth

__version__ = "0.1.0"

__all__ = [
    "OMEGA",
    "BlobMatcher",
    "BoundarySet",
    "CameraPose",
    "CtxMatchError",
    "DegenerateGeometryError",
    "DistanceMatrix",
    "DtmFilter",
    "DtmState",
    "EvalReport",
    "FundamentalMatrix",
    "GroundTruth",
    "Homography",
    "Keypoint",
    "Match",
    "MatchSet",
    "ModelFitError",
    "OneSac",
    "OneSacResult",
    "PairContext",
    "ParseError",
    "SynthScene",
    "Tolerances",
    "Triangulation",
    "adjacency",
    "alpha_boundary",
    "average_precision",
    "blob_match",
    "build_dtm_boundary",
    "classify",
    "collapse",
    "combine",
    "compute_distance_matrix",
    "convex_hull",
    "delaunay",
    "dtm",
    "dtm1",
    "dtm2",
    "ellipse_overlap_error",
    "epipolar_distance",
    "f_beta",
    "fit_fundamental",
    "fit_homography",
    "greedy_select",
    "kth_best",
    "locate_triangle",
    "mean_average_precision",
    "nnr_score",
    "normalized_correct_count",
    "one_sac",
    "prefilter",
    "reprojection_error",
    "score_pair",
    "synth",
]
