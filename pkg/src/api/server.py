from contextlib import asynccontextmanager
import logging

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from src.api.middleware import setup_middleware
from src.api.routes import pipeline
from src.config.settings import settings
from src.models.inputs import PipelineConfig
from src.utils.health_monitor import pipeline_monitor

logger = logging.getLogger("api")

API_VERSION = "1.0.0"


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Start the live enhancement server alongside the API when LIVE_AUTOSTART is set."""
    logger.info(f"Starting AVSE control API | Environment: {settings.ENVIRONMENT}")
    app.state.live_server = None
    if settings.LIVE_AUTOSTART:
        from src.pipeline.live import LiveServer

        cfg = PipelineConfig(mode="live", host=settings.LIVE_HOST, port=settings.LIVE_PORT)
        app.state.live_server = LiveServer(cfg)
        port = await app.state.live_server.start()
        logger.info(f"Live server listening on {settings.LIVE_HOST}:{port}")
    yield
    logger.info("Shutting down API...")
    if app.state.live_server is not None:
        await app.state.live_server.close()


app = FastAPI(
    lifespan=lifespan,
    title="AVSE Streaming Control API",
    description="Simulate and monitor chunked audio-visual speech enhancement sessions",
    version=API_VERSION,
)

# ===========================================
# CORS Configuration (from settings)
# ===========================================
app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.cors_origins_list,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# ===========================================
# Middleware (rate limiting, logging, error handling)
# ===========================================
setup_middleware(app)

# ===========================================
# Routes
# ===========================================
app.include_router(pipeline)


# ===========================================
# Health Check Endpoint
# ===========================================
@app.get("/health", tags=["Health"])
async def health_check():
    """
    Health check for load balancers.
    Includes live-server session counters and per-stage latency.
    """
    metrics = await pipeline_monitor.get_metrics()
    return {
        "status": "healthy",
        "environment": settings.ENVIRONMENT,
        "version": API_VERSION,
        "live_server": getattr(app.state, "live_server", None) is not None,
        "pipeline": metrics,
    }
