"""Location-scale transformation models.

Distribution-free regression where a monotone transformation of the
response, together with linear location and log-scale terms, is
estimated by maximum likelihood under exact, censored, ordinal, or
count observation schemes.  Downstream tools cover score-residual
permutation tests, best-subset selection, recursive partitioning, and
predictive curves.
"""

from .bases import BasisError, BasisSpec, CenteredCoefficients
from .data import (
    DataError,
    Dataset,
    Factor,
    ResponseDatum,
    dataset_from_frame,
    encode_response,
    make_dataset,
    read_csv,
    validate_dataset,
)
from .features import harmonic_features, spline_features
from .fitter import (
    FitOptions,
    FitResult,
    LikelihoodRatioTest,
    ProfileFit,
    WaldTest,
    fit,
    fit_unconditional,
    lr_test,
    profile_fit,
    wald_test,
)
from .inference import (
    CurveRequest,
    ProbabilisticIndex,
    ScoreTest,
    SimultaneousCI,
    equicoordinate_quantile,
    grouping_matrix,
    predict_curve,
    probabilistic_index,
    roc_curve,
    score_test,
    simultaneous_ci,
)
from .likelihood import (
    LikelihoodCore,
    ModelParams,
    ModelSpec,
    ParamLayout,
    ScoreResiduals,
    layout_for,
    linear_predictors,
    loglik,
    loglik_exact,
    loglik_interval,
    score,
    score_residuals,
)
from .links import LINK_NAMES, get_link
from .simulate import chi2_sample, chi2_step_sample
from .subset import PathEntry, SelectOptions, SubsetPath, exhaustive_search, select, sic
from .tree import SplitRule, Tree, TreeNode, TreeOptions, grow_tree

__version__ = "0.1.0"

__all__ = [
    "BasisError",
    "BasisSpec",
    "CenteredCoefficients",
    "CurveRequest",
    "DataError",
    "Dataset",
    "Factor",
    "FitOptions",
    "FitResult",
    "LINK_NAMES",
    "LikelihoodCore",
    "LikelihoodRatioTest",
    "ModelParams",
    "ModelSpec",
    "ParamLayout",
    "PathEntry",
    "ProbabilisticIndex",
    "ProfileFit",
    "ResponseDatum",
    "ScoreResiduals",
    "ScoreTest",
    "SelectOptions",
    "SimultaneousCI",
    "SplitRule",
    "SubsetPath",
    "Tree",
    "TreeNode",
    "TreeOptions",
    "WaldTest",
    "chi2_sample",
    "chi2_step_sample",
    "dataset_from_frame",
    "encode_response",
    "equicoordinate_quantile",
    "exhaustive_search",
    "fit",
    "fit_unconditional",
    "get_link",
    "grouping_matrix",
    "grow_tree",
    "harmonic_features",
    "layout_for",
    "linear_predictors",
    "loglik",
    "loglik_exact",
    "loglik_interval",
    "lr_test",
    "make_dataset",
    "predict_curve",
    "probabilistic_index",
    "profile_fit",
    "read_csv",
    "roc_curve",
    "score",
    "score_residuals",
    "score_test",
    "select",
    "sic",
    "simultaneous_ci",
    "spline_features",
    "validate_dataset",
    "wald_test",
]
