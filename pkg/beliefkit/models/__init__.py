"""The models package defines the data models and exceptions used across the package."""
from .base import BaseModel, BoolArray, ConfigModel, FloatArray, IntArray
from .calibration import CalibrationResult, EmConfig, MixtureEstimates, Responsibilities, SanityReport
from .dependence import DependenceConfig, HedgeRatio, PairDependence, PairResult, PairState
from .errors import (
    BumpSizeError,
    ConfigurationError,
    CorrelationUndefinedError,
    DataQualityError,
    DiffusiveDegenerateError,
    EmptySeriesError,
    GridRefinementError,
    InsufficientDataError,
    MissingArtifactError,
    OutOfHullError,
    RankDeficientFitError,
    SchemaMismatchError,
    StepSizeError,
    UnsupportedJumpFamilyError,
)
from .forecast import (
    BenchConfig,
    BenchResult,
    ForecastRecords,
    ForecastTask,
    MetricReport,
    Regime,
    RegimeMetrics,
    ScheduleWindow,
)
from .instruments import (
    Direction,
    FirstPassageSpec,
    GreekBumps,
    Greeks,
    PayoffKind,
    PayoffSpec,
    PIDEGrid,
    PriceResult,
    PricingMethod,
    VarianceSpace,
)
from .kernel import JumpFamily, JumpLaw, KernelParams, LogitPath
from .market import (
    TICK_COLUMNS,
    DiagnosticsReport,
    FilterOutput,
    NoiseModelCoeffs,
    TickFlag,
    TickRecord,
    UniformSeries,
)
from .quoting import (
    GuardConfig,
    HedgeOrders,
    InventoryState,
    MarketSnapshot,
    PnLEntry,
    QuoteAction,
    QuotePair,
    QuoteState,
    QuotingConfig,
    QuotingParams,
    RiskLimits,
)
from .run import (
    ChartsConfig,
    FilterConfig,
    KernelConfig,
    PricerConfig,
    RunConfig,
    RunManifest,
    ScenarioConfig,
)
from .surface import (
    LAYERS,
    BeliefSurface,
    CalibrationSlice,
    SurfaceConfig,
    SurfaceGrid,
    SurfaceLayer,
    SurfacePoint,
)
