"""Run a model from wave-like data while recording the front."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

from .core import Grid1D, ModelSpec, State, wave_initial_state
from .frontspeed import (
    DEFAULT_SETTINGS,
    EstimationError,
    EstimatorSettings,
    Flag,
    FrontTrace,
    SpeedEstimate,
    estimate_pulsating_speed,
    estimate_speed,
    failed_estimate,
    locate_front_array,
)
from .stepper import SolverError, Stepper, StepperConfig, apply_appendix_rescaling, check_stability

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Protocol:
    """Discretization and measurement settings for one front-speed run.

    Defaults are the homogeneous-environment protocol: rescaled coordinates,
    domain 40, dx = dt = 0.02, T = 40, fit over [32, 40], a sample every 0.5.
    """

    length: float = 40.0
    dx: float = 0.02
    dt: float = 0.02
    t_end: float = 40.0
    window: tuple[float, float] = (32.0, 40.0)
    cadence: float = 0.5
    level: float = 0.5
    rescaled: bool = True
    max_length: float = 160.0
    interface_offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "window", (float(self.window[0]), float(self.window[1])))
        if not (0 <= self.window[0] < self.window[1] <= self.t_end + 1e-12):
            raise ValueError("window must satisfy 0 <= t0 < t1 <= t_end")
        if self.cadence <= 0:
            raise ValueError("cadence must be positive")
        every = self.cadence / self.dt
        if abs(every - round(every)) > 1e-9 or round(every) < 1:
            raise ValueError("cadence must be a positive multiple of dt")
        Grid1D(self.length, self.dx)
        StepperConfig(self.dt)

    @property
    def interface(self) -> float:
        """Initial position of the u/v step: the domain midpoint plus ``interface_offset``."""
        return self.length / 2 + self.interface_offset

    @property
    def grid(self) -> Grid1D:
        return Grid1D(self.length, self.dx)

    @property
    def stepper(self) -> StepperConfig:
        return StepperConfig(dt=self.dt, rescaled=self.rescaled)


def track_front(
    spec: ModelSpec,
    grid: Grid1D,
    cfg: StepperConfig,
    t_end: float,
    cadence: float,
    state: State | None = None,
    level: float = 0.5,
    species: str = "v",
    t_record: float = 0.0,
    interface: float | None = None,
) -> tuple[State, FrontTrace]:
    """Step ``spec`` to ``t_end`` and locate the front every ``cadence`` time units from ``t_record`` on."""
    check_stability(spec, cfg)
    stepper = Stepper(spec, grid, cfg)
    state = wave_initial_state(grid, interface) if state is None else state
    trace = FrontTrace(level=level, species=species, length=grid.length, dx=grid.dx)
    x = grid.x
    idx = 0 if species == "u" else 1

    def observe(t, u, v):
        if t >= t_record - 1e-9:
            trace.append(t, locate_front_array(x, (u, v)[idx], level))

    every = max(1, int(round(cadence / cfg.dt)))
    final = stepper.run(state, t_end, observe, every)
    return final, trace


def simulation_frame(spec: ModelSpec, rescaled: bool) -> tuple[ModelSpec, float]:
    """Model to integrate and the factor turning its front speeds into original units."""
    if not rescaled:
        return spec, 1.0
    return apply_appendix_rescaling(spec)


@dataclass
class FrontRun:
    estimate: SpeedEstimate
    state: State | None
    trace: FrontTrace | None
    grid: Grid1D


def fit_dt(dt_max: float, cadence: float) -> float:
    """Largest dt <= dt_max dividing ``cadence`` a whole number of times."""
    return cadence / math.ceil(cadence / dt_max - 1e-9)


def measure_speed(
    spec: ModelSpec,
    protocol: Protocol = Protocol(),
    settings: EstimatorSettings = DEFAULT_SETTINGS,
    period: float | None = None,
    guard: bool = True,
) -> SpeedEstimate:
    """Front speed of ``spec`` in original units, never raising on solver trouble.

    With ``guard`` on, a run whose front comes within ``settings.boundary_margin``
    of an end (or leaves the domain) is repeated on a domain twice as long, up
    to ``protocol.max_length``; such estimates carry ``DomainExtended``.
    """
    return measure_front(spec, protocol, settings, period, guard).estimate


def measure_front(
    spec: ModelSpec,
    protocol: Protocol = Protocol(),
    settings: EstimatorSettings = DEFAULT_SETTINGS,
    period: float | None = None,
    guard: bool = True,
) -> FrontRun:
    """Like :func:`measure_speed`, also returning the final state and the trace."""
    model, factor = simulation_frame(spec, protocol.rescaled)
    length = protocol.length
    extended = False
    while True:
        run = _one_run(model, replace(protocol, length=length), factor, settings, period)
        flags = run.estimate.flags
        retry = Flag.BOUNDARY_TOO_CLOSE in flags or Flag.NO_CROSSING in flags
        if not (guard and retry and length * 2 <= protocol.max_length + 1e-9):
            break
        length *= 2
        extended = True
    if extended:
        run.estimate = run.estimate.with_flags(Flag.DOMAIN_EXTENDED)
    return run


def _one_run(model, protocol, factor, settings, period) -> FrontRun:
    grid = protocol.grid
    try:
        state, trace = track_front(
            model, grid, protocol.stepper, protocol.t_end, protocol.cadence,
            level=protocol.level, t_record=protocol.window[0], interface=protocol.interface,
        )
    except SolverError as exc:
        log.warning("solver failure: %s", exc)
        return FrontRun(failed_estimate(protocol.window, Flag.SOLVER_FAILURE, domain_length=grid.length),
                        None, None, grid)
    try:
        if period is None:
            est = estimate_speed(trace, protocol.window, factor, settings)
        else:
            est = estimate_pulsating_speed(trace, period, protocol.window, factor, settings)
    except EstimationError:
        est = failed_estimate(protocol.window, Flag.NO_CROSSING, domain_length=grid.length)
    return FrontRun(est, state, trace, grid)
