import logging
from typing import List

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()

LOG_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"
LOG_DATEFMT = "%Y-%m-%d %H:%M:%S"


class Settings(BaseSettings):
    # Runtime
    ENVIRONMENT: str = "development"
    LOG_LEVEL: str = "INFO"
    OUTPUT_DIR: str = "runs"
    DEFAULT_SEED: int = 0

    # Live loopback service
    LIVE_HOST: str = "127.0.0.1"
    LIVE_PORT: int = 8765
    LIVE_AUTOSTART: bool = False

    # HTTP control surface
    API_HOST: str = "127.0.0.1"
    API_PORT: int = 8000
    CORS_ORIGINS: str = "*"
    RATE_LIMIT_PER_MINUTE: int = 60
    MAX_SIM_DURATION_S: float = 60.0

    model_config = SettingsConfigDict(env_prefix="AVSE_", extra="ignore")

    @property
    def cors_origins_list(self) -> List[str]:
        if self.CORS_ORIGINS == "*":
            return ["*"]
        return [o.strip() for o in self.CORS_ORIGINS.split(",") if o.strip()]

    @property
    def is_production(self) -> bool:
        return self.ENVIRONMENT.lower() == "production"


def configure_logging(level: str | None = None) -> None:
    """Install the shared log format on the root logger."""
    logging.basicConfig(
        level=(level or settings.LOG_LEVEL).upper(),
        format=LOG_FORMAT,
        datefmt=LOG_DATEFMT,
    )


settings = Settings()
