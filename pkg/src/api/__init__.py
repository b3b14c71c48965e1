"""
API package - FastAPI routes and middleware.
"""
from src.api.server import app
from src.api.routes import pipeline

__all__ = ["app", "pipeline"]
