"""径向对称外区域Burgers问题的定常波工具包"""

__version__ = "1.0.0"

from .radial_core import Params, RadialGrid, Profile
from .ode_engine import DormandPrince54, get_integrator, integrate, integrate_bidirectional
from .stationary import StationaryWave, WaveClassification, solve_psi, classify, decay_fit
from .threshold import ThresholdResult, compute_threshold, a_star_by_limit, a_star_by_bisection, comparison_check
from .weight import WeightFunction, build_chi
from .evolution import PerturbationSpec, PdeState, EnergyTrace, get_evolver, make_initial_data, check_smallness, evolve, fit_decay
from .config_manager import RunConfig, get_run_config
from .report_generator import ReportGenerator, get_report_generator
from . import cli

__all__ = [
    "Params",
    "RadialGrid",
    "Profile",
    "DormandPrince54",
    "get_integrator",
    "integrate",
    "integrate_bidirectional",
    "StationaryWave",
    "WaveClassification",
    "solve_psi",
    "classify",
    "decay_fit",
    "ThresholdResult",
    "compute_threshold",
    "a_star_by_limit",
    "a_star_by_bisection",
    "comparison_check",
    "WeightFunction",
    "build_chi",
    "PerturbationSpec",
    "PdeState",
    "EnergyTrace",
    "get_evolver",
    "make_initial_data",
    "check_smallness",
    "evolve",
    "fit_decay",
    "RunConfig",
    "get_run_config",
    "ReportGenerator",
    "get_report_generator",
    "cli",
]
