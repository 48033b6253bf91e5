"""Search for minimal vehicle-characteristic perturbations that degrade
emergency-braking safety, with a built-in deterministic dynamics backend."""

__version__ = "0.1.0"

from .characteristics import (  # noqa: F401
    Assignment,
    CharacteristicSpec,
    CharacteristicTable,
    builtin_table,
    load_table,
)
from .engines import SearchConfig, run_engine  # noqa: F401
from .objectives import EvaluationContext  # noqa: F401
from .simulator import ScenarioConfig, VehicleParams, simulate  # noqa: F401
