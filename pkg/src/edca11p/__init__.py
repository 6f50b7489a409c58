"""IEEE 802.11p EDCA MAC performance toolkit: coupled DTMC model plus slot-level simulator."""

from .config import ScenarioConfig, load_scenario
from .metrics import MetricsReport, build_report
from .params import AcIndex, EdcaConfig, TimingDerived, derive_timing
from .sim import SimConfig, SimReport, run_simulation, simulate_at
from .solver import ConvergedSolution, NonConvergence, SolverSettings, solve_fixed_point

__version__ = "0.1.0"

__all__ = [
    "AcIndex",
    "EdcaConfig",
    "TimingDerived",
    "derive_timing",
    "ScenarioConfig",
    "load_scenario",
    "SolverSettings",
    "ConvergedSolution",
    "NonConvergence",
    "solve_fixed_point",
    "MetricsReport",
    "build_report",
    "SimConfig",
    "SimReport",
    "run_simulation",
    "simulate_at",
    "__version__",
]
