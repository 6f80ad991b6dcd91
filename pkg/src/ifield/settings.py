from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field

class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="IFIELD_", env_file=".env", extra="ignore")

    threads: int = Field(default=1, ge=1)
    out_dir: str = Field(default="out")
    trace: bool = True

    # gradcheck suite sizing
    gradcheck_configs: int = Field(default=100, ge=1)
    gradcheck_indicator_configs: int = Field(default=10, ge=1)

settings = Settings()
