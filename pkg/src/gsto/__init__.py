"""Generalized super-twisting observers for cascaded interconnected systems."""

from gsto.sta_core import MuPair, phi1, phi1_inverse, phi1_prime, phi2, sign
from gsto.system_model import (
    BoundViolationError,
    InterconnectedSystem,
    ModelError,
    StateLayout,
    SubsystemModel,
    eval_plant_rhs,
    invert_observability,
    observability_map,
    validate_system,
)
from gsto.observer import (
    ObserverGains,
    ObserverPlant,
    SubsystemGains,
    eval_error_rhs,
    eval_observer_rhs,
)
from gsto.simulator import (
    DivergenceError,
    NoiseModel,
    SimConfig,
    Trajectory,
    apply_noise,
    convergence_time,
    integrate,
    relative_error,
)

__all__ = [
    "BoundViolationError",
    "DivergenceError",
    "InterconnectedSystem",
    "ModelError",
    "MuPair",
    "NoiseModel",
    "ObserverGains",
    "ObserverPlant",
    "SimConfig",
    "StateLayout",
    "SubsystemGains",
    "SubsystemModel",
    "Trajectory",
    "apply_noise",
    "convergence_time",
    "eval_error_rhs",
    "eval_observer_rhs",
    "eval_plant_rhs",
    "integrate",
    "invert_observability",
    "observability_map",
    "phi1",
    "phi1_inverse",
    "phi1_prime",
    "phi2",
    "relative_error",
    "sign",
    "validate_system",
]

__version__ = "0.1.0"
