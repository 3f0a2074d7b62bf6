"""
API Router for gpcmc.

This module collects the HTTP routes that wrap the estimation and
classification services.
"""
import logging

from fastapi import APIRouter

from gpcmc.core.config import settings

# Configure logging
logger = logging.getLogger(__name__)

# Create main router
router = APIRouter()

# Import and include sub-routers
from . import gpc, orthant  # noqa: E402

router.include_router(orthant.router, prefix="/orthant", tags=["Orthant"])
router.include_router(gpc.router, prefix="/gpc", tags=["Classification"])


@router.get("/")
def root():
    """Root endpoint that provides API information."""
    return {
        "name": settings.APP_NAME,
        "version": settings.APP_VERSION,
        "documentation": "/api/docs",
        "endpoints": [
            {"path": "/orthant/estimate", "description": "Sequential Monte Carlo orthant estimate"},
            {"path": "/orthant/rank-one-oracle", "description": "Exact rank-one orthant value"},
            {"path": "/gpc/fit-predict", "description": "Fit a classifier and predict test patterns"},
            {"path": "/gpc/tune", "description": "Rank a hyperparameter grid by log marginal likelihood"},
        ],
    }
