"""Front speeds of two-species competition-diffusion systems in one space dimension."""
from .core import (
    CompetitionKind,
    Constant,
    Grid1D,
    ModelSpec,
    Periodic,
    SineOscillation,
    State,
    symmetric_lv,
    wave_initial_state,
)
from .frontspeed import Flag, FrontTrace, SpeedEstimate, estimate_pulsating_speed, estimate_speed, locate_front
from .simulate import Protocol, measure_speed
from .stepper import SolverError, Stepper, StepperConfig
from .sweep import SweepPlan, SweepResult, extract_contours, run_sweep

__version__ = "0.1.0"

__all__ = [
    "CompetitionKind", "Constant", "Flag", "FrontTrace", "Grid1D", "ModelSpec", "Periodic", "Protocol",
    "SineOscillation", "SolverError", "SpeedEstimate", "State", "Stepper", "StepperConfig", "SweepPlan",
    "SweepResult", "estimate_pulsating_speed", "estimate_speed", "extract_contours", "locate_front",
    "measure_speed", "run_sweep", "symmetric_lv", "wave_initial_state",
]
