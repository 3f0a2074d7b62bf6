"""
gpcmc HTTP service

This is the main entry point for the gpcmc API.
It initializes the FastAPI application and mounts the estimation and
classification routes.
"""
import logging

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from gpcmc.api import router as api_router
from gpcmc.core.config import settings
from gpcmc.core.errors import GpcmcError
from gpcmc.core.log import configure_logging

logger = logging.getLogger(__name__)

# Initialize FastAPI app
app = FastAPI(
    title="gpcmc",
    description="Gaussian process classification by sequential Monte Carlo orthant estimation",
    version=settings.APP_VERSION,
    docs_url="/api/docs",
    redoc_url="/api/redoc",
    openapi_url="/api/openapi.json",
)

# CORS middleware configuration
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(api_router, prefix="/api/v1")


# Health check endpoint
@app.get("/api/health")
def health_check():
    """Health check endpoint for monitoring"""
    return {"status": "healthy", "version": settings.APP_VERSION}


@app.exception_handler(GpcmcError)
async def gpcmc_exception_handler(request: Request, exc: GpcmcError):
    """Input and contract errors map to 422, numerical failures to 500."""
    logger.warning("%s on %s: %s", type(exc).__name__, request.url.path, exc)
    return JSONResponse(
        status_code=exc.http_status,
        content={"detail": str(exc), "error": type(exc).__name__},
    )


# Global exception handler
@app.exception_handler(Exception)
async def global_exception_handler(request: Request, exc: Exception):
    """Global exception handler"""
    logger.error(f"Unhandled exception: {str(exc)}", exc_info=True)
    return JSONResponse(
        status_code=500,
        content={"detail": "An unexpected error occurred"},
    )


# Startup event
@app.on_event("startup")
async def startup_event():
    configure_logging()
    logger.info("Starting %s %s", settings.APP_NAME, settings.APP_VERSION)


# For development with uvicorn
if __name__ == "__main__":
    import uvicorn
    uvicorn.run("main:app", host="0.0.0.0", port=8000, reload=settings.DEBUG)
