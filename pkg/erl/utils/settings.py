"""Process-level settings read from ``ERL_*`` environment variables or ``.env``."""
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class HarnessSettings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="ERL_", env_file=".env", extra="ignore")

    log_level: str = "INFO"
    output_dir: Path = Path("runs")
    workers: int = Field(default=4, ge=1)


def get_settings() -> HarnessSettings:
    return HarnessSettings()
