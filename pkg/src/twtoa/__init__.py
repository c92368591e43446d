"""Two-way time-of-arrival ranging under clock skew and edge-quantized detection delay."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    SPEED_OF_LIGHT,
    ClockModel,
    MeasurementSet,
    RangingScenario,
    synthesize_measurements,
    true_central_moment2,
    true_central_moment4,
    true_mean,
)
from .likelihood import ScenarioConstants, ThetaVector, amle_objective  # noqa: E402
from .estimators import (  # noqa: E402
    Method,
    ParameterEstimate,
    compute_stats,
    counter_based_estimate,
    mom_estimate,
    traditional_estimate,
)
from .optimize import SearchBox, amle_estimate  # noqa: E402

__all__ = [
    "SPEED_OF_LIGHT", "ClockModel", "MeasurementSet", "RangingScenario", "synthesize_measurements",
    "true_central_moment2", "true_central_moment4", "true_mean",
    "ScenarioConstants", "ThetaVector", "amle_objective",
    "Method", "ParameterEstimate", "compute_stats", "counter_based_estimate", "mom_estimate",
    "traditional_estimate", "SearchBox", "amle_estimate",
]
