"""
Orthant estimation endpoints for the gpcmc API.
"""
import logging

import numpy as np
from fastapi import APIRouter

from gpcmc.core.errors import DimensionFailureError
from gpcmc.models.oracle import QuadratureConfig, RankOneCovarianceSpec
from gpcmc.models.orthant import (
    EstimateReport,
    EstimatorConfig,
    OrthantProblem,
    OrthantRequest,
    RankOneRequest,
    parse_region,
)
from gpcmc.services.oracles import orthant_rank_one
from gpcmc.services.orthant_mc import chunked_estimate

# Configure logging
logger = logging.getLogger(__name__)

# Create router
router = APIRouter()


@router.post("/estimate", response_model=EstimateReport)
def estimate(request: OrthantRequest):
    """
    Estimate the log orthant probability of N(0, covariance) over the region.

    Replicates are averaged; a run in which every pass failed is reported as
    a numerical error.
    """
    covariance = np.asarray(request.covariance, dtype=np.float64)
    problem = OrthantProblem(covariance, parse_region(request.region, len(request.covariance)))
    cfg = EstimatorConfig(
        samples_per_dim=request.samples, seed=request.seed, replicates=request.replicates
    )
    report = chunked_estimate(problem, cfg)
    if report.failed:
        raise DimensionFailureError(report.failed_dim, report.samples)
    logger.info("Estimated n=%d orthant: log I = %.6f", problem.n, report.log_integral)
    return report


@router.post("/rank-one-oracle")
def rank_one_oracle(request: RankOneRequest):
    """Exact log orthant probability for the covariance with unit diagonal and d_i d_j elsewhere."""
    overrides = request.model_dump(include={"nodes", "half_width"}, exclude_none=True)
    quad = QuadratureConfig(**overrides)
    spec = RankOneCovarianceSpec(np.asarray(request.d))
    return {"log_probability": orthant_rank_one(spec, quad), "n": spec.n, "nodes": quad.nodes}
