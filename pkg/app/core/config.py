import os
from pydantic import ConfigDict, Field
from pydantic_settings import BaseSettings

_APP_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


class Settings(BaseSettings):
    PROJECT_NAME: str = "Dickson SHDS Toolkit"
    TOOL_VERSION: str = "1.0.0"

    # Paths
    DATA_DIR: str = os.path.join(_APP_DIR, "data")
    MODULI_FILE: str = os.path.join(_APP_DIR, "data", "moduli.json")
    REFERENCE_FILE: str = os.path.join(_APP_DIR, "data", "reference_tables.json")
    SETS_DIR: str = os.path.join(_APP_DIR, "data", "sets")
    TABLES_DIR: str = os.path.join(_APP_DIR, "data", "tables")
    # SHDS_CACHE_DIR in the environment wins over the default location
    CACHE_DIR: str = Field(
        default=os.path.join(_APP_DIR, "data", "cache"),
        validation_alias="SHDS_CACHE_DIR",
    )

    # Field tables are kept in memory, q = 3^m entries each
    MAX_M: int = 13

    # Scans
    THREADS: int = 1
    SEED: int = 20120521
    SAMPLES: int = 1_000_000
    SHARD_SIZE: int = 256
    DEFAULT_CONVENTION: str = "unordered_distinct"
    # dy1 is the image of D_5(x^2, -1) unless calibration says the labels are the other way round
    DY_SWAP_LABELS: bool = False

    # Numeric sanity layer
    GAUSS_TOLERANCE: float = 1e-6
    FOURIER_MAX_M: int = 5

    LOG_LEVEL: str = "INFO"
    DEBUG: bool = False

    model_config = ConfigDict(extra="ignore", env_file=".env", populate_by_name=True)


settings = Settings()
