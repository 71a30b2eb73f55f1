"""
Configuration

Process settings come from the environment (CIMSEARCH_* variables or .env);
run settings come from one YAML config file per experiment.
"""

import hashlib
import logging
from pathlib import Path
from typing import Dict, Optional

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from cimsearch.exceptions import MissingKey, SpecError, SpecNotFound
from cimsearch.models.schemas import (
    OracleParams,
    PredictorHyper,
    SearchConfig,
    ValueDistribution,
)

PACKAGE_DATA_DIR = Path(__file__).parent / "data"


class Settings(BaseSettings):
    """Process settings from environment variables"""

    APP_NAME: str = "cimsearch"
    LOG_LEVEL: str = "INFO"

    # Execution
    WORKERS: int = 1
    OUTPUT_DIR: str = "./runs"
    DATA_DIR: str = str(PACKAGE_DATA_DIR)

    # Histogram sampling per layer tensor
    HISTOGRAM_SAMPLES: int = 2048

    model_config = SettingsConfigDict(
        env_prefix="CIMSEARCH_",
        env_file=".env",
        case_sensitive=True,
        extra="ignore",
    )


settings = Settings()


def validate_settings_on_startup() -> None:
    """Validate process settings, warning on odd values"""
    logger = logging.getLogger(__name__)

    # getLevelNamesMapping is 3.11+; _nameToLevel is the same mapping on 3.10
    level_names = getattr(logging, "getLevelNamesMapping", lambda: dict(logging._nameToLevel))()
    if settings.LOG_LEVEL.upper() not in level_names:
        raise ValueError(f"Unknown LOG_LEVEL {settings.LOG_LEVEL}")

    if settings.WORKERS < 1:
        raise ValueError(f"WORKERS must be >= 1, got {settings.WORKERS}")

    if not Path(settings.DATA_DIR).is_dir():
        logger.warning(f"⚠ DATA_DIR {settings.DATA_DIR} does not exist, packaged data will be used")

    if settings.HISTOGRAM_SAMPLES < 256:
        logger.warning(
            f"⚠ HISTOGRAM_SAMPLES={settings.HISTOGRAM_SAMPLES} is small; "
            "activity factors will be noisy"
        )

    logger.debug(f"✓ Settings validated (workers={settings.WORKERS})")


# ============================================
# Run config file
# ============================================

class PredictorSection(BaseModel):
    """[predictor] section"""
    kind: str = Field("oracle", pattern="^(oracle|mlp|table)$")
    checkpoint: Optional[str] = None
    table: Optional[str] = None
    train_samples: int = Field(5000, ge=100)
    hyper: PredictorHyper = Field(default_factory=PredictorHyper)


class HardwareProfilesSection(BaseModel):
    """[hardware_profiles] section: named profile files plus the active one"""
    profiles: Dict[str, str] = Field(
        default_factory=lambda: {
            "rram_32nm": "profiles/rram_32nm.yaml",
            "sram_7nm": "profiles/sram_7nm.yaml",
        }
    )
    active: str = "rram_32nm"

    @field_validator("active")
    @classmethod
    def _active_known(cls, value: str, info) -> str:
        profiles = info.data.get("profiles") or {}
        if profiles and value not in profiles:
            raise ValueError(f"active profile '{value}' not in profiles")
        return value


class WorkloadSection(BaseModel):
    """[workload] section: synthetic tensors behind the histograms"""
    inputs: ValueDistribution = Field(
        default_factory=lambda: ValueDistribution(kind="half_gaussian", scale=0.3)
    )
    weights: ValueDistribution = Field(
        default_factory=lambda: ValueDistribution(kind="uniform_nonneg")
    )
    histogram_samples: Optional[int] = Field(None, ge=1)
    seed: int = 0


class RunConfig(BaseModel):
    """Whole experiment configuration"""
    space: str
    oracle: OracleParams = Field(default_factory=OracleParams)
    predictor: PredictorSection = Field(default_factory=PredictorSection)
    search: SearchConfig = Field(default_factory=SearchConfig)
    hardware_profiles: HardwareProfilesSection = Field(default_factory=HardwareProfilesSection)
    workload: WorkloadSection = Field(default_factory=WorkloadSection)

    # Set by load_run_config, not read from the file
    source_path: Optional[str] = None
    source_sha256: Optional[str] = None

    def resolve(self, relative: str) -> Path:
        """Resolve a path relative to the config file, then to DATA_DIR"""
        return resolve_path(relative, self.source_path)

    @property
    def spec_path(self) -> Path:
        return self.resolve(self.space)

    @property
    def profile_path(self) -> Path:
        return self.resolve(self.hardware_profiles.profiles[self.hardware_profiles.active])


def resolve_path(relative: str, anchor: Optional[str] = None) -> Path:
    """Find a data file: absolute, next to the anchor file, or under DATA_DIR"""
    path = Path(relative)
    if path.is_absolute():
        return path
    candidates = []
    if anchor:
        candidates.append(Path(anchor).parent / path)
    candidates.append(Path.cwd() / path)
    candidates.append(Path(settings.DATA_DIR) / path)
    candidates.append(PACKAGE_DATA_DIR / path)
    for candidate in candidates:
        if candidate.exists():
            return candidate
    return candidates[0]


def file_sha256(path: Path) -> str:
    """Content hash used by manifests"""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def read_yaml(path: Path, what: str = "file") -> dict:
    """Load a YAML mapping or raise a SpecError naming the file"""
    path = Path(path)
    if not path.exists():
        raise SpecNotFound(f"{what} not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise SpecError(f"cannot parse {path}: {e}") from e
    if not isinstance(data, dict):
        raise SpecError(f"{path} must contain a mapping")
    return data


def load_run_config(path: str) -> RunConfig:
    """Load and validate a run config file"""
    path = Path(path)
    data = read_yaml(path, "config")
    if "space" not in data:
        raise MissingKey("required key missing", key="space")
    try:
        config = RunConfig(**data)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(p) for p in first["loc"])
        raise SpecError(first["msg"], key=key) from e
    return config.model_copy(
        update={"source_path": str(path), "source_sha256": file_sha256(path)}
    )
