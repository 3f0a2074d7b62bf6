"""
gpcmc: Gaussian process classification with a sequential Monte Carlo
estimator of multivariate normal orthant probabilities.
"""
from gpcmc.core.config import settings

__version__ = settings.APP_VERSION

__all__ = ["__version__"]
