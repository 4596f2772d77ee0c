"""Prepackaged heterogeneous and alternative-competition experiments.

Every scenario returns a :class:`ScenarioOutcome`; when ``output_dir`` is
given it also writes ``<name>.json`` and the CSV traces/snapshots it used.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    CoefficientField,
    CompetitionKind,
    Constant,
    Grid1D,
    ModelSpec,
    Periodic,
    SineOscillation,
    State,
    field_bounds,
    patchy_field,
    symmetric_lv,
)
from .frontspeed import SpeedEstimate
from .simulate import FrontRun, Protocol, fit_dt, measure_front
from .stepper import Stepper, StepperConfig, check_stability, stable_dt, write_snapshot


class Classification(str, enum.Enum):
    U_INVADES = "UInvades"
    V_INVADES = "VInvades"
    PINNED = "Pinned"
    COEXISTENCE = "Coexistence"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Thresholds:
    speed_tol: float = 1e-3
    pinned_speed: float = 1e-3
    loser_supnorm: float = 0.01


@dataclass
class ScenarioOutcome:
    name: str
    measured: dict[str, float]
    classification: Classification
    artifacts: list[str] = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "classification": self.classification.value,
            "measured": {k: _jsonable(v) for k, v in self.measured.items()},
            "params": {k: _jsonable(v) for k, v in self.params.items()},
            "artifacts": list(self.artifacts),
        }

    def write(self, outdir: str | Path) -> Path:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        path = outdir / f"{self.name}.json"
        path.write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")
        return path


def _jsonable(v):
    if isinstance(v, (bool, int, str)) or v is None:
        return v
    if isinstance(v, float):
        return v if math.isfinite(v) else None
    if isinstance(v, (np.floating, np.integer)):
        return _jsonable(v.item())
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return str(v)


def classify_speed(speed: float, th: Thresholds = Thresholds()) -> Classification:
    """Sign of a front speed: negative means v takes over u's territory."""
    if not math.isfinite(speed):
        return Classification.INCONCLUSIVE
    if speed < -th.speed_tol:
        return Classification.V_INVADES
    if speed > th.speed_tol:
        return Classification.U_INVADES
    return Classification.PINNED


def _speed_metrics(est: SpeedEstimate) -> dict[str, float]:
    return {
        "speed": est.speed,
        "residual_rms": est.residual_rms,
        "wobble": est.wobble,
        "boundary_margin": est.boundary_margin,
        "domain_length": est.domain_length,
    }


def _dump_run(name: str, run: FrontRun, output_dir, suffix: str = "") -> list[str]:
    if output_dir is None:
        return []
    outdir = Path(output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    if run.trace is not None:
        p = outdir / f"{name}{suffix}_trace.csv"
        run.trace.to_csv(p)
        paths.append(str(p))
    if run.state is not None:
        p = outdir / f"{name}{suffix}_final.csv"
        write_snapshot(p, run.grid, run.state)
        paths.append(str(p))
    return paths


def _finish(outcome: ScenarioOutcome, output_dir) -> ScenarioOutcome:
    if output_dir is not None:
        outcome.artifacts.append(str(outcome.write(output_dir)))
    return outcome


def _coexistence_width(state: State, grid: Grid1D, floor: float = 0.1) -> float:
    both = (state.u > floor) & (state.v > floor)
    return float(both.sum() * grid.dx)


# --- periodic resources ---------------------------------------------------------

def _resource_minimum_offset(mu: CoefficientField, centre: float, dx: float) -> float:
    """Offset from ``centre`` to the nearest minimum of ``mu`` within one period, on the dual grid.

    A step placed there is invariant under swapping u and v and reflecting about
    the step whenever ``mu`` is symmetric about its minimum, so a pinned front
    starts at rest instead of creeping towards its equilibrium.
    """
    if not isinstance(mu, Periodic):
        return 0.0
    # half-cell points between nodes keep the discrete step data symmetric
    xs = centre - mu.period / 2 + (np.arange(int(round(mu.period / dx))) + 0.5) * dx
    vals = mu(xs)
    best = np.flatnonzero(vals <= vals.min() + 1e-12)
    pick = best[np.argmin(np.abs(xs[best] - centre))]
    return float(xs[pick] - centre)


def scenario_periodic_resources(
    d: float,
    k: float,
    mu: CoefficientField,
    length: float = 80.0,
    dx: float = 0.02,
    t_end: float = 20.0,
    thresholds: Thresholds = Thresholds(),
    output_dir=None,
) -> ScenarioOutcome:
    """Pulsating front of the symmetric system with resources ``mu(x)`` multiplying the reaction."""
    if field_bounds(mu)[0] <= 0:
        raise ValueError("mu must be uniformly positive")
    spec = replace(symmetric_lv(k, d), mu=mu)
    cadence = 0.1
    period = mu.period if isinstance(mu, Periodic) else dx
    proto = Protocol(
        length=length, dx=dx, dt=fit_dt(stable_dt(spec, 0.02), cadence), t_end=t_end,
        window=(t_end / 2, t_end), cadence=cadence, rescaled=False, max_length=4 * length,
        interface_offset=_resource_minimum_offset(mu, length / 2, dx),
    )
    run = measure_front(spec, proto, period=period)
    est = run.estimate
    measured = _speed_metrics(est)
    if run.state is not None:
        measured["coexistence_width"] = _coexistence_width(run.state, run.grid)
    width_limit = max(2.0 * period, 2.0)
    if not est.ok or measured.get("coexistence_width", math.inf) > width_limit:
        cls = Classification.INCONCLUSIVE
    elif est.pinned or abs(est.speed) <= thresholds.pinned_speed:
        cls = Classification.PINNED
    else:
        cls = classify_speed(est.speed, thresholds)
    name = "periodic-resources"
    outcome = ScenarioOutcome(
        name, measured, cls, _dump_run(name, run, output_dir),
        {"d": d, "k": k, "period": period, "dt": proto.dt, "dx": dx, "t_end": t_end,
         "flags": sorted(f.value for f in est.flags)},
    )
    return _finish(outcome, output_dir)


# --- oscillating diffusion ------------------------------------------------------

def scenario_oscillating_diffusion(
    k: float,
    frequency: int | None,
    alpha: float,
    amplitude: float = 0.75,
    length: float = 20.0,
    dx: float | None = None,
    t_end: float = 20.0,
    baseline: bool = True,
    thresholds: Thresholds = Thresholds(),
    output_dir=None,
) -> ScenarioOutcome:
    """v diffuses at ``1 + amplitude*sin(2*frequency*pi*x)`` and pays ``alpha*k*u*v``.

    ``frequency=None`` gives v the uniform rate 1.  With ``baseline`` the
    uniform-rate run is also measured and a reversal is reported when the
    oscillation turns a v-invasion into a u-invasion.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    d_v = Constant(1.0) if not frequency else SineOscillation(1.0, amplitude, int(frequency))
    if dx is None:
        target = 0.02 if not frequency else min(0.02, 1.0 / (20 * frequency))
        dx = length / math.ceil(length / target)
    spec = ModelSpec(d_u=Constant(1.0), d_v=d_v, h=k, k=k, alpha=alpha)
    cadence = 0.1
    proto = Protocol(
        length=length, dx=dx, dt=fit_dt(stable_dt(spec, 0.02), cadence), t_end=t_end,
        window=(t_end / 2, t_end), cadence=cadence, rescaled=False, max_length=4 * length,
    )
    period = 1.0 / frequency if frequency else dx
    run = measure_front(spec, proto, period=period)
    est = run.estimate
    measured = _speed_metrics(est)
    name = "oscillating-diffusion"
    artifacts = _dump_run(name, run, output_dir)
    if baseline and frequency:
        base = measure_front(replace(spec, d_v=Constant(1.0)), proto)
        measured["baseline_speed"] = base.estimate.speed
        measured["reversal"] = float(
            base.estimate.speed < -thresholds.speed_tol and est.speed > thresholds.speed_tol
        )
        artifacts += _dump_run(name, base, output_dir, "_baseline")
    cls = classify_speed(est.speed, thresholds) if est.ok else Classification.INCONCLUSIVE
    outcome = ScenarioOutcome(
        name, measured, cls, artifacts,
        {"k": k, "frequency": frequency, "alpha": alpha, "amplitude": amplitude, "dx": dx,
         "dt": proto.dt, "t_end": t_end, "flags": sorted(f.value for f in est.flags)},
    )
    return _finish(outcome, output_dir)


# --- bounded heterogeneous domain, blind competition ----------------------------

def scenario_dockery_bounded(
    a: CoefficientField,
    d: float,
    length: float = 10.0,
    dx: float = 0.05,
    dt: float = 0.02,
    t_max: float = 2000.0,
    check_every: float = 10.0,
    u0: np.ndarray | None = None,
    v0: np.ndarray | None = None,
    thresholds: Thresholds = Thresholds(),
    output_dir=None,
) -> ScenarioOutcome:
    """Blind competition (h = k = 1) with growth ``a(x)`` on a no-flux interval.

    Runs until one species' sup-norm drops below ``thresholds.loser_supnorm``
    or ``t_max`` is reached.
    """
    if isinstance(a, Constant):
        raise ValueError("the growth field a must be non-constant")
    spec = ModelSpec(d_u=Constant(1.0), d_v=Constant(float(d)), h=1.0, k=1.0, a=a)
    grid = Grid1D(length, dx)
    cfg = StepperConfig(dt=dt, rescaled=False)
    check_stability(spec, cfg)
    stepper = Stepper(spec, grid, cfg)
    u = np.full(grid.n, 0.5) if u0 is None else np.asarray(u0, dtype=float).copy()
    v = np.full(grid.n, 0.5) if v0 is None else np.asarray(v0, dtype=float).copy()
    state = State(0.0, u, v)
    max_gap = 0.0
    cls = Classification.INCONCLUSIVE
    while state.t < t_max - 1e-9:
        state = stepper.run(state, min(t_max, state.t + check_every))
        max_gap = max(max_gap, float(np.max(np.abs(state.u - state.v))))
        if state.v.max() < thresholds.loser_supnorm:
            cls = Classification.U_INVADES
            break
        if state.u.max() < thresholds.loser_supnorm:
            cls = Classification.V_INVADES
            break
    nxt = stepper.step(state)
    residual = max(np.max(np.abs(nxt.u - state.u)), np.max(np.abs(nxt.v - state.v))) / dt
    if cls is Classification.INCONCLUSIVE and residual < 1e-6 and min(state.u.max(), state.v.max()) > thresholds.loser_supnorm:
        cls = Classification.COEXISTENCE
    measured = {
        "u_sup": float(state.u.max()),
        "v_sup": float(state.v.max()),
        "t_final": float(state.t),
        "max_abs_u_minus_v": max_gap,
        "residual": float(residual),
    }
    name = "dockery"
    artifacts = []
    if output_dir is not None:
        Path(output_dir).mkdir(parents=True, exist_ok=True)
        p = Path(output_dir) / f"{name}_final.csv"
        write_snapshot(p, grid, state)
        artifacts.append(str(p))
    outcome = ScenarioOutcome(name, measured, cls, artifacts,
                              {"d": d, "length": length, "dx": dx, "dt": dt, "t_max": t_max})
    return _finish(outcome, output_dir)


# --- patchy segregated steady state ---------------------------------------------

@dataclass(frozen=True)
class PatchPlan:
    """Favorable patches separated by neutral gaps; the domain starts and ends in a favorable patch."""

    n_patches: int = 4
    favorable_width: float = 10.0
    neutral_width: float = 10.0
    mu_favorable: float = 1.0
    mu_neutral: float = 0.0

    @property
    def length(self) -> float:
        return self.n_patches * self.favorable_width + (self.n_patches - 1) * self.neutral_width

    def mu(self, dx: float) -> Periodic:
        return patchy_field([self.favorable_width, self.neutral_width], [self.mu_favorable, self.mu_neutral], dx)

    def patch_masks(self, x: np.ndarray) -> list[np.ndarray]:
        period = self.favorable_width + self.neutral_width
        return [(x >= p * period) & (x <= p * period + self.favorable_width) for p in range(self.n_patches)]


def _pattern(state: State, masks: list[np.ndarray]) -> tuple[bool, bool]:
    """(segregated as intended, both species present in every patch)."""
    segregated = True
    mixed = True
    for p, m in enumerate(masks):
        owner, other = (state.u, state.v) if p % 2 == 0 else (state.v, state.u)
        if not (owner[m].mean() > 0.5 and other[m].max() < 0.1):
            segregated = False
        if not (state.u[m].mean() > 0.5 and state.v[m].mean() > 0.5):
            mixed = False
    return segregated, mixed


def scenario_segregated_steady_state(
    plan: PatchPlan = PatchPlan(),
    k: float = 200.0,
    d: float = 1.0,
    dx: float = 0.1,
    t_settle: float = 400.0,
    t_probe: float = 100.0,
    check_every: float = 10.0,
    perturbation: float = 0.05,
    residual_target: float = 1e-6,
    output_dir=None,
) -> ScenarioOutcome:
    """u in the odd favorable patches, v in the even ones: settle, then perturb by ±5%.

    Settling stops once the time-derivative sup-norm is below
    ``residual_target``.  The perturbation scales u up and v down; the drift is
    the sup-distance to the settled state after ``t_probe``.
    """
    name = "segregated-steady-state"
    params = {"k": k, "d": d, "dx": dx, "n_patches": plan.n_patches,
              "favorable_width": plan.favorable_width, "neutral_width": plan.neutral_width}
    if plan.n_patches < 2:
        return _finish(ScenarioOutcome(name, {}, Classification.INCONCLUSIVE, [], params), output_dir)

    spec = ModelSpec(d_u=Constant(1.0), d_v=Constant(float(d)), h=k, k=k, mu=plan.mu(dx))
    grid = Grid1D(plan.length, dx)
    dt = stable_dt(spec, 0.02, safety=0.9)
    stepper = Stepper(spec, grid, StepperConfig(dt=dt, rescaled=False))
    x = grid.x
    masks = plan.patch_masks(x)
    u = np.zeros(grid.n)
    v = np.zeros(grid.n)
    for p, m in enumerate(masks):
        (u if p % 2 == 0 else v)[m] = 1.0
    state = State(0.0, u, v)

    def residual(s: State) -> float:
        nxt = stepper.step(s)
        return float(max(np.max(np.abs(nxt.u - s.u)), np.max(np.abs(nxt.v - s.v))) / dt)

    collapse_time = math.nan
    res = math.inf
    while state.t < t_settle - 1e-9:
        state = stepper.run(state, min(t_settle, state.t + check_every))
        segregated, _ = _pattern(state, masks)
        if k > 0 and not segregated:
            collapse_time = state.t
            break
        res = residual(state)
        if res < residual_target:
            break
    settled = state.copy()
    segregated, mixed = _pattern(settled, masks)
    measured = {"residual": res, "t_settled": settled.t, "segregated": float(segregated), "mixed": float(mixed)}

    if math.isfinite(collapse_time):
        measured["collapse_time"] = collapse_time
        cls = Classification.INCONCLUSIVE
    else:
        pert = State(settled.t, settled.u * (1 + perturbation), settled.v * (1 - perturbation))
        size = float(max(np.max(np.abs(pert.u - settled.u)), np.max(np.abs(pert.v - settled.v))))
        after = stepper.run(pert, pert.t + t_probe)
        drift = float(max(np.max(np.abs(after.u - settled.u)), np.max(np.abs(after.v - settled.v))))
        still, _ = _pattern(after, masks)
        measured.update({"perturbation": size, "drift": drift, "survives": float(still and drift < 0.1 * size)})
        if segregated and still and drift < 0.1 * size:
            cls = Classification.PINNED
        elif mixed:
            cls = Classification.COEXISTENCE
        else:
            cls = Classification.INCONCLUSIVE
    artifacts = []
    if output_dir is not None:
        Path(output_dir).mkdir(parents=True, exist_ok=True)
        p = Path(output_dir) / f"{name}_settled.csv"
        write_snapshot(p, grid, settled)
        artifacts.append(str(p))
    params["dt"] = dt
    return _finish(ScenarioOutcome(name, measured, cls, artifacts, params), output_dir)


# --- cubic competition ----------------------------------------------------------

def scenario_cubic_sign_law(
    r: float,
    h: float,
    k: float,
    d: float,
    d_alt: float | None = None,
    protocol: Protocol = Protocol(),
    thresholds: Thresholds = Thresholds(),
    output_dir=None,
) -> ScenarioOutcome:
    """Wave speed of the cubic-competition system at ``d`` and, optionally, ``d_alt``."""
    spec = ModelSpec(d_u=Constant(1.0), d_v=Constant(float(d)), r=r, h=h, k=k, kind=CompetitionKind.CUBIC)
    proto = replace(protocol, dt=fit_dt(stable_dt(spec, protocol.dt), protocol.cadence))
    run = measure_front(spec, proto)
    est = run.estimate
    measured = _speed_metrics(est)
    measured["expected_sign"] = float(np.sign(k - r * h))
    artifacts = _dump_run("cubic-sign-law", run, output_dir)
    if d_alt is not None:
        alt = measure_front(replace(spec, d_v=Constant(float(d_alt))), proto)
        measured["speed_alt"] = alt.estimate.speed
        measured["sign_consistent"] = float(
            classify_speed(est.speed, thresholds) == classify_speed(alt.estimate.speed, thresholds)
        )
        artifacts += _dump_run("cubic-sign-law", alt, output_dir, "_alt")
    cls = classify_speed(est.speed, thresholds) if est.ok else Classification.INCONCLUSIVE
    outcome = ScenarioOutcome("cubic-sign-law", measured, cls, artifacts,
                              {"r": r, "h": h, "k": k, "d": d, "d_alt": d_alt, "dt": proto.dt})
    return _finish(outcome, output_dir)


# --- asymptotic ladders ---------------------------------------------------------

def ma_huang_ou_region(k: float) -> list[tuple[float, float]]:
    """Open d-intervals where the symmetric speed is known to be negative (needs k > 5/3)."""
    if k <= 5 / 3:
        return []
    mid = 2 * k / (k - 1)
    return [(4.0, mid), (mid, 4 / (k - 1))]


def scenario_asymptotic_probes(
    regime: str,
    values: Sequence[float],
    fixed: float,
    protocol: Protocol = Protocol(),
    thresholds: Thresholds = Thresholds(),
    output_dir=None,
) -> list[ScenarioOutcome]:
    """Run a ladder of symmetric-system speeds and check the known brackets.

    ``regime``:
      * ``large-d``: k = ``fixed``, d over ``values``; speed/sqrt(d) in (-2, 0).
      * ``large-k``: d = ``fixed``, k over ``values``; speed in (-2 sqrt(d), 0).
      * ``ma-huang-ou``: k = ``fixed``, d over ``values`` (each must lie in the region); speed < 0.
      * ``near-blind``: k = 1 + fixed**2, d = 1 + value; sign of the speed only.
    """
    outcomes = []
    for value in values:
        if regime == "large-d":
            k, d = fixed, value
        elif regime == "large-k":
            k, d = value, fixed
        elif regime == "ma-huang-ou":
            k, d = fixed, value
            if not any(lo < d < hi for lo, hi in ma_huang_ou_region(k)):
                raise ValueError(f"d={d} is not inside the known negative region for k={k}")
        elif regime == "near-blind":
            k, d = 1 + fixed**2, 1 + value
        else:
            raise ValueError(f"unknown regime {regime!r}")
        spec = symmetric_lv(k, d)
        dt = fit_dt(stable_dt(spec, protocol.dt), protocol.cadence)
        run = measure_front(spec, replace(protocol, dt=dt))
        est = run.estimate
        measured = _speed_metrics(est)
        if regime == "large-d":
            value_checked = est.speed / math.sqrt(d)
            lo, hi = -2.0, 0.0
        elif regime == "large-k":
            value_checked = est.speed
            lo, hi = -2 * math.sqrt(d), 0.0
        else:
            value_checked = est.speed
            lo, hi = -math.inf, 0.0
        measured.update({"checked": value_checked, "lower": lo, "upper": hi,
                         "in_bracket": float(est.ok and lo < value_checked < hi)})
        name = f"asymptotic-{regime}-{len(outcomes)}"
        cls = classify_speed(est.speed, thresholds) if est.ok else Classification.INCONCLUSIVE
        outcome = ScenarioOutcome(name, measured, cls, _dump_run(name, run, output_dir),
                                  {"regime": regime, "k": k, "d": d, "dt": dt})
        outcomes.append(_finish(outcome, output_dir))
    return outcomes
