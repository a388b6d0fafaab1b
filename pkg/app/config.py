try:
    # pydantic v2+ split BaseSettings into pydantic-settings package
    from pydantic_settings import BaseSettings
except Exception:
    try:
        # Fallback for older pydantic versions
        from pydantic import BaseSettings
    except Exception as e:
        raise ImportError(
            "BaseSettings not available. Install 'pydantic-settings' for pydantic v2 "
            "(`pip install pydantic-settings`) or pin pydantic<2.12."
        ) from e
from typing import List, Optional


class Settings(BaseSettings):
    """
    Centralized configuration loaded from environment or a `.env` file.
    Numerical defaults match the solver and trainer contracts; override them only for experiments.
    """
    LOG_LEVEL: str = "INFO"
    # Root for generated datasets, checkpoints and reports when CLI paths are relative.
    DATA_DIR: str = "./data"
    # Process pool size for dataset generation. Results never depend on it.
    WORKERS: int = 1
    # Intra-op threads for torch. Kept at 1 so reductions are identical across runs.
    TORCH_NUM_THREADS: int = 1
    # When false, wall-clock columns are written as 0 so reruns are byte-identical.
    RECORD_TIMINGS: bool = False
    SHOW_PROGRESS: bool = True

    SOLVER_TOL: float = 1e-8
    SOLVER_MAX_OUTER: int = 500
    EIG_TOL: float = 1e-10
    EIG_MAX_ITER: int = 10_000
    # Generation aborts when more than this fraction of draws hit NoConvergence.
    MAX_REDRAW_RATE: float = 0.01

    # Checkpoint served by POST /api/v1/predict. Unset disables the endpoint.
    CHECKPOINT_PATH: Optional[str] = None
    CORS_ALLOW_ORIGINS: List[str] = ["*"]

    @property
    def progress_disabled(self) -> bool:
        """tqdm's `disable` flag."""
        return not self.SHOW_PROGRESS

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"


settings = Settings()
