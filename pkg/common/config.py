import re
import tomllib
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from common.errors import ConfigError, ConfigFileError
from common.models import Limiter, ProfileParams

# Get the project root directory
PROJECT_ROOT = Path(__file__).parent.parent
DEFAULT_CONFIG = PROJECT_ROOT / "config" / "default.toml"


class Settings(BaseSettings):
    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"

    # Output
    OUTPUT_DIR: Path = PROJECT_ROOT / "results"
    METRICS_FILE: str = "metrics.prom"

    # Execution
    THREADS: int = 1
    SEED: int = 0
    STRICT: bool = False

    model_config = SettingsConfigDict(
        env_file=PROJECT_ROOT / ".env",
        case_sensitive=True,
        extra="ignore",
    )


settings = Settings()


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridsConfig(_Section):
    padding: int = Field(default=4, ge=4)
    scan_points: int = Field(default=100_000, ge=1000)
    focus_ratio: float = Field(default=1.05, gt=1)
    kernel_nodes: int = Field(default=256, ge=32)


class TolerancesConfig(_Section):
    chi_abs: float = 1e-10
    invert_rel: float = 1e-12
    partition: float = 1e-10
    gaussian_rel: float = 1e-3
    plancherel_rel: float = 1e-6
    cross_method: float = 0.01
    cross_reduction: float = 1.8


class OutputConfig(_Section):
    dir: Path | None = None
    write_csv: bool = True


class DyadicConfig(_Section):
    epsilon: float = 1e-7
    j_min: int = Field(default=4, ge=2)
    j_max: int = Field(default=20, le=24)
    n1: int = 128
    n2: int = 64
    slope_margin: float = 0.15
    tail_blocks: int = 4
    # block norms decay like j^e with e near -1, so the last four of j = 4..20 carry about 0.12
    tail_fraction: float = 0.15
    richardson_tol: float = 0.05
    uniformity_eps: list[float] = Field(default_factory=lambda: [1e-3, 1e-4, 1e-5])
    uniformity_spread: float = 0.6
    translation_j: int = 8
    translation_shift: float = 0.37


def _blowup_params() -> ProfileParams:
    return ProfileParams(alpha=1.0, beta=1.6, delta=0.05, epsilon=0.1, lambda_=0.01)


class BlowupConfig(_Section):
    params: ProfileParams = Field(default_factory=_blowup_params)
    tau_scale: float = 0.1
    k_max: int = Field(default=16, ge=5)
    uniform_nodes: int = 400
    fit_points: int = 6
    exponent_margin: float = 0.4
    base_margin: float = 0.2
    i1_exponent_cap: float = 1.2
    ratio_min: float = 10.0
    convergence_tol: float = 0.05
    cross_check_tol: float = 0.02

    @field_validator("params", mode="before")
    @classmethod
    def merge_params(cls, value):
        # A partial table only overrides the keys it names.
        if not isinstance(value, dict):
            return value
        merged = _blowup_params().model_dump(by_alias=True)
        if "lambda_" in value:
            merged.pop("lambda")
        return {**merged, **value}


class LifespanConfig(_Section):
    eps_list: list[float] = Field(default_factory=lambda: [1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    product_cap: float = 1.05


class ScalingConfig(_Section):
    omega: float = -1.0
    gamma: float = 1.0
    s: float = 2.75
    n_values: list[int] = Field(default_factory=lambda: [2, 3, 4, 5])
    ratio_cap: float = 2.1
    exact_tol: float = 5e-3
    n: int = 64
    padding: int = 4


class GlueConfig(_Section):
    n_min: int = 2
    n_max: int = Field(default=8, le=8)
    gap: float = 1e-3
    tail_fraction: float = 0.1


class GeometryConfig(_Section):
    v_samples: int = 11
    boundary_points: int = 10_000
    n_curves: int = 1000
    n_segments: int = 64
    appendix_samples: int = 1000
    appendix_eps: list[float] = Field(default_factory=lambda: [1e-3, 1e-4, 1e-5])
    width_y_min: float = 1e-8
    width_y_max: float = 1e-2
    width_points: int = 61
    clearance_points: int = 21


class FDCheckConfig(_Section):
    epsilon: float = 0.05
    refinements: list[int] = Field(default_factory=lambda: [16, 32, 64, 128])
    cfl: float = Field(default=0.4, le=0.4)
    limiter: Limiter = Limiter.MINMOD
    t_fraction: float = 0.5
    min_order: float = 0.9


class SelftestConfig(_Section):
    gaussian_s: list[float] = Field(default_factory=lambda: [0.0, 0.75, 1.75, 2.75])
    n: int = 64
    half_width: float = 4.0
    padding: int = 4
    random_fields: int = 100
    cross_n: int = 128


class ExperimentConfig(BaseSettings):
    params: ProfileParams = Field(default_factory=ProfileParams)
    grids: GridsConfig = Field(default_factory=GridsConfig)
    tolerances: TolerancesConfig = Field(default_factory=TolerancesConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    dyadic: DyadicConfig = Field(default_factory=DyadicConfig)
    blowup: BlowupConfig = Field(default_factory=BlowupConfig)
    lifespan: LifespanConfig = Field(default_factory=LifespanConfig)
    scaling: ScalingConfig = Field(default_factory=ScalingConfig)
    glue: GlueConfig = Field(default_factory=GlueConfig)
    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    fdcheck: FDCheckConfig = Field(default_factory=FDCheckConfig)
    selftest: SelftestConfig = Field(default_factory=SelftestConfig)

    model_config = SettingsConfigDict(
        env_prefix="LAB_",
        env_nested_delimiter="__",
        extra="forbid",
    )

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        # Environment overrides the file contents passed as init kwargs.
        return (env_settings, init_settings)


_TOML_POSITION = re.compile(r"at line (\d+), column (\d+)")


def _key_line(text: str, loc: tuple) -> int | None:
    """Find the 1-based line where a dotted config key is assigned."""
    keys = [str(k) for k in loc if not isinstance(k, int)]
    if not keys:
        return None
    table, key = ".".join(keys[:-1]), keys[-1]
    current = ""
    fallback = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line.startswith("["):
            current = line.strip("[] ")
            if current == ".".join(keys):
                fallback = lineno
            continue
        if "=" in line and current == table and line.split("=", 1)[0].strip() == key:
            return lineno
    return fallback


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        match = _TOML_POSITION.search(str(e))
        line, column = (int(match[1]), int(match[2])) if match else (None, None)
        raise ConfigError(str(e), line=line, column=column) from e

    try:
        return ExperimentConfig(**data)
    except ValidationError as e:
        first = e.errors()[0]
        loc = tuple(first["loc"])
        name = ".".join(str(part) for part in loc)
        raise ConfigError(f"{name}: {first['msg']}", line=_key_line(text, loc)) from e


def load_config(path: Path | str | None = None) -> ExperimentConfig:
    """
    Load an experiment config file.

    Args:
        path: TOML file; the shipped default config when omitted

    Returns:
        Validated config with LAB_ environment overrides applied

    Raises:
        ConfigFileError: If the file is missing or unreadable
        ConfigError: If the file is not valid TOML or fails validation
    """
    path = Path(path) if path is not None else DEFAULT_CONFIG
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigFileError(str(path), str(e)) from e
    return parse_config(text)
