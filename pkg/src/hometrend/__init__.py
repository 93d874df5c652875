"""Station temperature pipeline: QC, homogeneity, homogenization, trends."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DegenerateSeriesError,
    HometrendError,
    InputError,
    PlanCoverageError,
    TooShortError,
)
from .homogeneity import (
    HomogeneityBattery,
    HomogeneityTestResult,
    StationClass,
    TestKind,
    TestSeries,
    buishand_lr,
    buishand_partial_sums,
    buishand_u,
    classify,
    monte_carlo_p,
    pettitt,
    run_battery,
    snht,
)
from .homogenize import (
    AdjustmentPlan,
    BreakPoint,
    BreakSet,
    HomogenizedSeries,
    apply_daily,
    compute_adjustments,
    detect_breaks,
    difference_series,
    homogenize_daily,
)
from .pipeline import RunConfig, run_pipeline
from .qc import QCConfig, QCFlag, QCReport, run_qc
from .series import (
    AnnualSeries,
    CompletenessPolicy,
    DailySeries,
    MonthlySeries,
    StationMeta,
    Variable,
    aggregate_annual,
    aggregate_monthly,
    calendar_month_series,
    dtr_daily,
)
from .trend import (
    Direction,
    MKResult,
    RankAutocorr,
    SenResult,
    TieGroups,
    hamed_rao_var,
    mk_s,
    rank_autocorr,
    sen_slope,
    trend_test,
    var_s,
    z_stat,
)

__all__ = [
    "AdjustmentPlan",
    "AnnualSeries",
    "BreakPoint",
    "BreakSet",
    "CompletenessPolicy",
    "ConfigError",
    "DailySeries",
    "DegenerateSeriesError",
    "Direction",
    "HomogeneityBattery",
    "HomogeneityTestResult",
    "HomogenizedSeries",
    "HometrendError",
    "InputError",
    "MKResult",
    "MonthlySeries",
    "PlanCoverageError",
    "QCConfig",
    "QCFlag",
    "QCReport",
    "RankAutocorr",
    "RunConfig",
    "SenResult",
    "StationClass",
    "StationMeta",
    "TestKind",
    "TestSeries",
    "TieGroups",
    "TooShortError",
    "Variable",
    "aggregate_annual",
    "aggregate_monthly",
    "apply_daily",
    "buishand_lr",
    "buishand_partial_sums",
    "buishand_u",
    "calendar_month_series",
    "classify",
    "compute_adjustments",
    "detect_breaks",
    "difference_series",
    "dtr_daily",
    "hamed_rao_var",
    "homogenize_daily",
    "mk_s",
    "monte_carlo_p",
    "pettitt",
    "rank_autocorr",
    "run_battery",
    "run_pipeline",
    "run_qc",
    "sen_slope",
    "snht",
    "trend_test",
    "var_s",
    "z_stat",
]
