import os
from dotenv import load_dotenv
from pydantic_settings import BaseSettings

# Load environment variables from .env file
load_dotenv()

class Settings(BaseSettings):
    """Process-wide settings loaded from environment variables."""

    # Application Configuration
    APP_NAME: str = "rigidlid"
    APP_VERSION: str = "1.0.0"
    DEBUG: bool = os.getenv("DEBUG", "False").lower() == "true"
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")

    # Output root used when a command gets no --out
    RIGIDLID_OUT: str = os.getenv("RIGIDLID_OUT", "results")

    # Parallelism
    RIGIDLID_JOBS: int = int(os.getenv("RIGIDLID_JOBS", "1"))
    RIGIDLID_FFT_WORKERS: int = int(os.getenv("RIGIDLID_FFT_WORKERS", "1"))

    model_config = {"env_file": ".env", "extra": "ignore"}

# Create global settings instance
settings = Settings()
