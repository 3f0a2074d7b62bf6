"""
Classification endpoints for the gpcmc API.

This module fits the Monte Carlo classifier on request data, predicts test
patterns and ranks hyperparameter grids.
"""
import logging
import math

import numpy as np
from fastapi import APIRouter

from gpcmc.core.errors import InvalidInputError
from gpcmc.models.gpc import FitPredictRequest, FitPredictResponse, TuneRequest
from gpcmc.models.kernel import Dataset
from gpcmc.models.orthant import EstimatorConfig
from gpcmc.services import gpc_service

# Configure logging
logger = logging.getLogger(__name__)

# Create router
router = APIRouter()


def _dataset(features, labels) -> Dataset:
    if len(features) != len(labels):
        raise InvalidInputError(f"{len(features)} feature rows but {len(labels)} labels")
    return Dataset(np.asarray(features, dtype=np.float64), np.asarray(labels))


@router.post("/fit-predict", response_model=FitPredictResponse)
def fit_predict(request: FitPredictRequest):
    """
    Fit on the training data and return the class 1 posterior of every test row.

    With no test rows this is a fit-only call that reports the log marginal
    likelihood.
    """
    train = _dataset(request.train_features, request.train_labels)
    cfg = EstimatorConfig(samples_per_dim=request.samples, seed=request.seed)
    test = np.asarray(request.test_features, dtype=np.float64) if request.test_features else None
    return gpc_service.fit_predict(train, request.kernel, cfg, test, request.ordering)


@router.post("/tune")
def tune(request: TuneRequest):
    """Rank the grid by log marginal likelihood; failed cells come last with a null value."""
    train = _dataset(request.train_features, request.train_labels)
    cfg = EstimatorConfig(samples_per_dim=request.samples, seed=request.seed)
    results = gpc_service.tune(train, request.grid, cfg)
    rows = []
    for result in results:
        row = result.model_dump(mode="json")
        row["log_marginal"] = result.log_marginal if math.isfinite(result.log_marginal) else None
        rows.append(row)
    return {"results": rows}
