"""RIS phase-shift design for cell-free massive MIMO uplink."""

from .config import ExperimentSpec, OptimizerConfig, SystemConfig, desk_profile, load_spec
from .rates import RateModel, RateReport, evaluate_objective, wrap_phase
from .system import NetworkRealization, generate_topology

__all__ = [
    "ExperimentSpec",
    "NetworkRealization",
    "OptimizerConfig",
    "RateModel",
    "RateReport",
    "SystemConfig",
    "desk_profile",
    "evaluate_objective",
    "generate_topology",
    "load_spec",
    "wrap_phase",
]
