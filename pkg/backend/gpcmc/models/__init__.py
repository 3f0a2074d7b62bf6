"""
Domain models: kernels and data, orthant problems, classifier state,
oracle settings and experiment tables.
"""
from .experiment import Metric, MetricReport, MultivariateProblemSpec, SyntheticProblemSpec
from .gpc import GpcModel, LabelSigns, Ordering, Prediction, TuneResult
from .kernel import CovarianceBundle, Dataset, KernelFamily, KernelSpec
from .oracle import QuadratureConfig, QuadratureRule, RankOneCovarianceSpec
from .orthant import EstimateReport, EstimatorConfig, OrthantProblem, ParticleEnsemble, Region

__all__ = [
    "KernelFamily",
    "KernelSpec",
    "Dataset",
    "CovarianceBundle",
    "Region",
    "OrthantProblem",
    "EstimatorConfig",
    "ParticleEnsemble",
    "EstimateReport",
    "Ordering",
    "LabelSigns",
    "GpcModel",
    "Prediction",
    "TuneResult",
    "QuadratureRule",
    "QuadratureConfig",
    "RankOneCovarianceSpec",
    "Metric",
    "MetricReport",
    "SyntheticProblemSpec",
    "MultivariateProblemSpec",
]
