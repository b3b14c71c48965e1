"""
Middleware for the control API.
Includes: Rate Limiting, Request Logging, Domain and Global Exception Handling.

Routes that start a run put a short description of it in
``request.state.run_label``; every log line about that request carries it.
"""

import time
import logging
import traceback
from uuid import uuid4
from typing import Callable

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from slowapi import Limiter
from slowapi.util import get_remote_address
from slowapi.errors import RateLimitExceeded

from src.config.settings import configure_logging, settings
from src.utils.errors import AvseError


# ===========================================
# Logging Configuration
# ===========================================

configure_logging()

logger = logging.getLogger("api")


def run_label(request: Request) -> str:
    """The run a request started, or its path when it started none."""
    return getattr(request.state, "run_label", None) or request.url.path


# ===========================================
# Rate Limiter Setup
# ===========================================


def get_rate_limit_key(request: Request) -> str:
    """Rate limit per client IP."""
    return get_remote_address(request)


limiter = Limiter(
    key_func=get_rate_limit_key,
    default_limits=[f"{settings.RATE_LIMIT_PER_MINUTE}/minute"],
)


def rate_limit_exceeded_handler(request: Request, exc: RateLimitExceeded) -> JSONResponse:
    logger.warning(f"Rate limit exceeded | IP: {get_remote_address(request)} | Path: {request.url.path} | {exc.detail}")
    return JSONResponse(
        status_code=429,
        content={
            "error": "rate_limit_exceeded",
            "message": "Too many runs requested. Simulations and sweeps are CPU bound; please slow down.",
            "retry_after_seconds": 60,
        },
    )


# ===========================================
# Request Logging Middleware
# ===========================================


async def logging_middleware(request: Request, call_next: Callable) -> Response:
    """
    Log every request and response with a short request id and timing.
    """
    request_id = str(uuid4())[:8]
    request.state.request_id = request_id
    method = request.method
    path = request.url.path

    logger.info(f"[{request_id}] --> {method} {path} | IP: {get_remote_address(request)}")
    start_time = time.perf_counter()

    try:
        response = await call_next(request)
    except Exception as e:
        process_time = (time.perf_counter() - start_time) * 1000
        logger.error(
            f"[{request_id}] !!! {method} {path} | Run: {run_label(request)} | "
            f"Error: {e} | Duration: {process_time:.2f}ms"
        )
        raise

    process_time = (time.perf_counter() - start_time) * 1000
    logger.info(
        f"[{request_id}] <-- {method} {path} "
        f"| Status: {response.status_code} | Run: {run_label(request)} | Duration: {process_time:.2f}ms"
    )
    response.headers["X-Request-ID"] = request_id
    response.headers["X-Process-Time"] = f"{process_time:.2f}ms"
    return response


# ===========================================
# Exception Handlers
# ===========================================


async def domain_exception_handler(request: Request, exc: AvseError) -> JSONResponse:
    """Invalid configs, inputs and undefined metrics are the caller's problem: 422."""
    request_id = getattr(request.state, "request_id", "unknown")
    label = run_label(request)
    logger.warning(f"[{request_id}] {label} rejected | {type(exc).__name__}: {exc}")
    return JSONResponse(
        status_code=422,
        content={
            "error": type(exc).__name__,
            "message": str(exc),
            "run": label,
            "request_id": request_id,
        },
    )


async def global_exception_handler(request: Request, exc: Exception) -> JSONResponse:
    """
    Catch-all for unhandled exceptions. Production responses hide the details.
    """
    request_id = getattr(request.state, "request_id", "unknown")
    logger.error(
        f"[{request_id}] Unhandled exception in {run_label(request)}: {type(exc).__name__}: {exc}\n"
        f"{traceback.format_exc()}"
    )

    content = {
        "error": "internal_server_error",
        "message": "An unexpected error occurred. Please try again later.",
        "request_id": request_id,
    }
    if not settings.is_production:
        content["message"] = str(exc)
        content["exception_type"] = type(exc).__name__
    return JSONResponse(status_code=500, content=content)


# ===========================================
# Setup Function
# ===========================================


def setup_middleware(app: FastAPI) -> None:
    """
    Configure rate limiting, error handlers and request logging on app.
    """
    app.state.limiter = limiter
    app.add_exception_handler(RateLimitExceeded, rate_limit_exceeded_handler)
    app.add_exception_handler(AvseError, domain_exception_handler)
    app.add_exception_handler(Exception, global_exception_handler)
    app.middleware("http")(logging_middleware)

    logger.info(
        f"Middleware configured | Environment: {settings.ENVIRONMENT} | "
        f"Rate Limit: {settings.RATE_LIMIT_PER_MINUTE}/min"
    )
