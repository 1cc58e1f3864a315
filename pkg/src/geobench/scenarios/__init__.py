from .instances import INSTANCE_CLASSES, InstanceClass, instance
from .spec import (
    DEFAULT_AXES,
    FAULT_CRASH_S,
    FAULT_DURATION_S,
    FAULT_RECOVER_S,
    GEO_DISTRIBUTIONS,
    ScenarioSpec,
    load_scenario,
)
from .runner import (
    apply_point,
    build_placement,
    build_run,
    point_configs,
    run_scenario,
    run_single,
)

__all__ = [
    "INSTANCE_CLASSES",
    "InstanceClass",
    "instance",
    "GEO_DISTRIBUTIONS",
    "DEFAULT_AXES",
    "FAULT_CRASH_S",
    "FAULT_RECOVER_S",
    "FAULT_DURATION_S",
    "ScenarioSpec",
    "load_scenario",
    "apply_point",
    "build_placement",
    "build_run",
    "point_configs",
    "run_scenario",
    "run_single",
]
