# Config module exports
from src.config.settings import configure_logging, settings

__all__ = ["settings", "configure_logging"]
