"""
Runtime settings for the risk assessment pipeline.

Only credentials, endpoints and logging come from the environment; experiment
hyperparameters live in the experiment config file (see config.experiment).
"""
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )

    # LLM endpoint (OpenAI-compatible chat completions)
    llm_api_key: str = ""
    llm_base_url: str = "https://api.openai.com/v1"

    # ASR endpoint (OpenAI-compatible audio transcriptions)
    asr_api_key: str = ""
    asr_base_url: str = "https://api.openai.com/v1"

    # External provider behaviour
    request_timeout_seconds: float = 60.0
    provider_requests_per_minute: int = 60
    retry_base_delay_seconds: float = 1.0

    # Monitoring
    log_level: str = "INFO"

    # Deployment
    environment: str = "development"

    @property
    def is_production(self) -> bool:
        """Check if running in production."""
        return self.environment.lower() == "production"


# Global settings instance
settings = Settings()
