import math
from datetime import datetime
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, computed_field


class ProfileKind(str, Enum):
    CHI = "chi"
    CHI_EPS = "chi_eps"
    MOLLIFIER_PSI_EPS = "mollifier_psi_eps"
    CUTOFF_PSI = "cutoff_psi"
    KAPPA = "kappa"
    DYADIC_ZETA = "dyadic_zeta"
    H_EPS = "h_eps"


class Directional(str, Enum):
    NONE = "none"
    X1 = "x1"


class Limiter(str, Enum):
    NONE = "none"
    MINMOD = "minmod"


class ExperimentName(str, Enum):
    DYADIC = "dyadic"
    BLOWUP = "blowup"
    LIFESPAN = "lifespan"
    SCALING = "scaling"
    GLUE = "glue"
    GEOMETRY = "geometry"
    FDCHECK = "fdcheck"
    NORMS_SELFTEST = "norms-selftest"


class ExportKind(str, Enum):
    PROFILE = "profile"
    FIELD_AT_T = "field-at-t"
    ELLIPSE = "ellipse"
    DYADIC_BLOCKS = "dyadic-blocks"


class ProfileParams(BaseModel):
    model_config = ConfigDict(
        frozen=True, populate_by_name=True, extra="forbid", allow_inf_nan=False
    )

    alpha: float = Field(default=0.11, description="Exponent of |ln s|^alpha")
    beta: float = Field(default=0.60, description="Log-Sobolev weight exponent")
    delta: float = Field(default=0.05, description="Domain-width log exponent")
    epsilon: float = Field(default=1e-3, description="Mollification scale")
    lambda_: float = Field(
        default=0.01, alias="lambda", description="Sobolev index deficit"
    )
    width_factor: float = Field(
        default=1.0, gt=0, description="Domain width convention w (1 or sqrt 2)"
    )
    late_cutoff: bool = Field(
        default=False, description="Multiply h_eps by the late cutoff l_eps"
    )

    @property
    def log_eps(self) -> float:
        """|ln epsilon|."""
        return abs(math.log(self.epsilon))

    @property
    def dyadic_exponent(self) -> float:
        return 2 * self.alpha - 2 * self.beta - self.delta

    def with_epsilon(self, epsilon: float) -> "ProfileParams":
        return self.model_copy(update={"epsilon": epsilon})


class ConstraintViolation(BaseModel):
    constraint: str
    margin: float = Field(..., description="Amount by which the constraint fails")


class NormSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    s: float = Field(..., ge=0, le=4, description="Sobolev order")
    beta: float = Field(default=0.0, ge=0, description="Log weight exponent")
    homogeneous: bool = True
    directional: Directional = Directional.NONE


class GridInfo(BaseModel):
    n1: int
    n2: int
    h1: float
    h2: float
    padding: int = 1


class NormReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    norm_kind: str
    s: float
    beta: float
    lambda_: float | None = Field(default=None, alias="lambda")
    value: float
    error_estimate: float
    grid: GridInfo
    method: str


class CheckResult(BaseModel):
    name: str
    passed: bool
    required: bool = True
    value: float | None = None
    threshold: float | None = None
    detail: str = ""


class InequalityRecord(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    name: str
    lhs: float
    rhs: float
    slack: float
    passed: bool = Field(..., alias="pass")
    required: bool = True
    constant: float | None = Field(default=None, description="Measured constant of the step")

    @classmethod
    def compare(
        cls,
        name: str,
        lhs: float,
        rhs: float,
        required: bool = True,
        constant: float | None = None,
    ) -> "InequalityRecord":
        """Record lhs <= rhs with a relative rounding allowance."""
        ok = lhs <= rhs * (1 + 1e-12) + 1e-15
        return cls(
            name=name,
            lhs=lhs,
            rhs=rhs,
            slack=rhs - lhs,
            passed=ok,
            required=required,
            constant=constant,
        )


class FDConfig(BaseModel):
    h: float = Field(..., gt=0, description="Spatial step")
    cfl: float = Field(default=0.4, gt=0, le=0.4, description="CFL ratio")
    t_final: float = Field(..., ge=0, description="Final time")
    limiter: Limiter = Limiter.NONE
    snapshots: int = Field(default=1, ge=1, description="Stored time levels")


class ExperimentReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    experiment: str
    checks: list[CheckResult] = Field(default_factory=list)

    @computed_field
    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.required)

    def strict_passed(self) -> bool:
        return all(c.passed for c in self.checks)


# Norm engine self-test


class GaussianRow(BaseModel):
    s: float
    computed: float
    expected: float
    rel_error: float


class CrossMethodRow(BaseModel):
    field: str
    fourier: float
    kernel: float
    rel_diff: float
    rel_diff_fine: float
    reduction: float


class SelftestReport(ExperimentReport):
    gaussian: list[GaussianRow] = Field(default_factory=list)
    plancherel_rel_error: float = 0.0
    cross_method: list[CrossMethodRow] = Field(default_factory=list)
    embedding_max_ratio: float = 0.0
    upgrade_min_slack: float = 0.0
    runtime_seconds: float = 0.0


class EmbeddingReport(BaseModel):
    log_norm: float
    plain_norm: float
    lowered_norm: float
    inhomogeneous_norm: float
    log_le_plain: bool
    inhomogeneous_ge_homogeneous: bool


class UpgradeReport(BaseModel):
    lhs: float
    low_frequency_term: float
    high_frequency_term: float
    rhs: float
    slack: float
    passed: bool


# Geometry


class EllipseParams(BaseModel):
    v: float
    center: tuple[float, float]
    semi_axes: tuple[float, float]


class EllipseSample(BaseModel):
    v: float
    max_radius: float
    argmax: tuple[float, float]
    off_tangency_max: float
    off_tangency_bound: float
    passed: bool


class WidthReport(BaseModel):
    width_factor: float
    constant: float
    expected_limit: float
    exponent: float
    max_change_per_decade: float
    ys: list[float]
    ratios: list[float]


class ClearanceSample(BaseModel):
    t: float
    straight_line: float
    chain: float
    clearance: float


class AppendixSummary(BaseModel):
    samples: int
    failures: int
    violations: int
    min_slack: dict[str, float]
    max_constant: dict[str, float] = Field(default_factory=dict)


class GeometryReport(ExperimentReport):
    ellipse: list[EllipseSample] = Field(default_factory=list)
    width: WidthReport | None = None
    clearance: list[ClearanceSample] = Field(default_factory=list)
    speed_bound_max_excess: float = 0.0
    appendix: AppendixSummary | None = None
    log_factor: list[tuple[float, float]] = Field(default_factory=list)


# Dyadic blocks


class DyadicBlock(BaseModel):
    j: int
    lam: float
    norm_sq: float
    error_estimate: float
    flagged: bool = False
    reason: str | None = None


class UniformityRow(BaseModel):
    epsilon: float
    total: float
    bound: float


class DyadicReport(ExperimentReport):
    epsilon: float
    exponent: float
    blocks: list[DyadicBlock] = Field(default_factory=list)
    slope: float = 0.0
    slope_r_squared: float = 0.0
    total: float = 0.0
    tail_fraction: float = 0.0
    block_constant: float = 0.0
    uniformity: list[UniformityRow] = Field(default_factory=list)
    uniformity_spread: float = 0.0
    translation_change: float | None = None


# Blow-up


class BlowupSample(BaseModel):
    t: float
    tau: float
    nodes: int
    zeta: tuple[float, float, float, float]
    kappa: float
    i1: float
    i2: float
    i3: float
    remainder: float
    norm_sq: float
    ratio: float
    core_terms: dict[str, float]
    quadrants: dict[str, float]
    signs_ok: bool


class PowerFit(BaseModel):
    exponent: float
    uncertainty: float
    r_squared: float


class BlowupReport(ExperimentReport):
    params: ProfileParams
    t_eps: float
    nu_eps: float
    M_eps: float
    eta: float
    delta_loc: float
    x2_mass: float
    samples: list[BlowupSample] = Field(default_factory=list)
    i2_fit: PowerFit | None = None
    i1_fit: PowerFit | None = None
    lower_bound_exponent: float = 0.0
    cross_check_rel_diff: float | None = None


# Lifespan


class LifespanRow(BaseModel):
    epsilon: float
    t_eps: float
    nu_eps: float
    M_eps: float
    bound: float
    product: float


class LifespanReport(ExperimentReport):
    alpha: float
    rows: list[LifespanRow] = Field(default_factory=list)


# Scaling and gluing


class ScalingRow(BaseModel):
    lam: float
    norm: float
    predicted: float
    ratio: float


class ScalingReport(ExperimentReport):
    omega: float
    gamma: float
    beta: float
    s: float
    base_norm: float
    rows: list[ScalingRow] = Field(default_factory=list)
    exact_exponent: float | None = None
    measured_exponent: float | None = None


class GlueTerm(BaseModel):
    n: int
    lam: float
    log_eps: float
    t_n: float
    t_bound: float
    support: tuple[float, float]
    scaled_support: tuple[float, float]
    translated_support: tuple[float, float]
    width_bound: float
    norm_bound: float
    partial_sum: float


class GlueReport(ExperimentReport):
    omega: float = -1.0
    gamma: float = 1.0
    terms: list[GlueTerm] = Field(default_factory=list)
    cumulative_extent: float = 0.0
    support_sum_bound: float = 0.0
    tail_bound: float = 0.0


# Finite differences


class FDLevel(BaseModel):
    h: float
    steps: int
    error: float
    order: float | None = None


class FDReport(ExperimentReport):
    epsilon: float
    t_eps: float
    t_final: float
    limiter: Limiter
    levels: list[FDLevel] = Field(default_factory=list)
    residual_levels: list[FDLevel] = Field(default_factory=list)
    min_v: float = 0.0
    max_v: float = 0.0
    scaled_residual_gap: float = 0.0


class RunManifest(BaseModel):
    command: str
    target: str | None = None
    config: dict
    version: str
    seed: int
    threads: int
    started_at: datetime
    finished_at: datetime | None = None
    outputs: list[str] = Field(default_factory=list)
    passed: bool = False
    exit_code: int = 0
    error: str | None = None
