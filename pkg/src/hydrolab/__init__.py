"""Software twin of a liquid-level process-control training rig.

The package is layered: `plant` integrates the tank and actuator,
`control` holds the discrete controllers, `tuning` the oscillation
analysis and Ziegler-Nichols rules, `scenario` the experiment DSL,
runner, CSV format, and metrics, `session` the live stepper, and
`service`/`cli` the network and command-line front ends.
"""

from .control import ControllerMode, ControllerState, Gains, OnOffConfig, onoff_step, pid_step
from .plant import (
    OutflowModel,
    PlantState,
    SensorConfig,
    TankConfig,
    ValveConfig,
    analytic_step_response,
    linearized_model,
    plant_step,
)
from .presets import LoopConfig, UnknownPreset, get_preset, list_presets
from .scenario import (
    CSV_HEADER,
    Scenario,
    ScenarioSyntaxError,
    ScenarioValidationError,
    SegmentTooShort,
    TimeSeries,
    TransientMetrics,
    compute_metrics,
    fixture_names,
    load_fixture,
    parse_scenario,
    run_scenario,
    serialize_scenario,
)
from .session import SessionConfig, SimSession, Snapshot, replay_session, session_start
from .tuning import (
    UltimateGainResult,
    ZnRule,
    ZnRuleSet,
    find_ultimate_gain,
    measure_oscillation,
    zn_gains,
    zn_gains_exact,
)

__version__ = "0.1.0"

__all__ = [
    "CSV_HEADER",
    "ControllerMode",
    "ControllerState",
    "Gains",
    "LoopConfig",
    "OnOffConfig",
    "OutflowModel",
    "PlantState",
    "Scenario",
    "ScenarioSyntaxError",
    "ScenarioValidationError",
    "SegmentTooShort",
    "SensorConfig",
    "SessionConfig",
    "SimSession",
    "Snapshot",
    "TankConfig",
    "TimeSeries",
    "TransientMetrics",
    "UltimateGainResult",
    "UnknownPreset",
    "ValveConfig",
    "ZnRule",
    "ZnRuleSet",
    "analytic_step_response",
    "compute_metrics",
    "find_ultimate_gain",
    "fixture_names",
    "get_preset",
    "linearized_model",
    "list_presets",
    "load_fixture",
    "measure_oscillation",
    "onoff_step",
    "parse_scenario",
    "pid_step",
    "plant_step",
    "replay_session",
    "run_scenario",
    "serialize_scenario",
    "session_start",
    "zn_gains",
    "zn_gains_exact",
    "__version__",
]
