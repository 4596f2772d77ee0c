"""Semi-implicit time stepping: explicit reaction, then backward-Euler diffusion.

Diffusion uses the conservative second difference with face coefficients
``(D[j] + D[j+1]) / 2`` and ghost-node reflection at both ends (no flux).
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
from scipy.linalg import lapack

from .core import Constant, Grid1D, ModelSpec, State, reaction_with_fields

ROUNDOFF = 1e-12


class SolverError(RuntimeError):
    """The discrete solution left the admissible set (NaN, Inf or a real undershoot)."""

    def __init__(self, message: str, t: float, k: float, d: float | None):
        super().__init__(f"{message} (t={t:.6g}, k={k:.6g}, d={d if d is None else f'{d:.6g}'})")
        self.t = t
        self.k = k
        self.d = d


class StabilityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class StepperConfig:
    dt: float = 0.02
    rescaled: bool = True
    boundary: str = "no-flux"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.boundary != "no-flux":
            raise ValueError("only no-flux boundaries are supported")


def check_stability(spec: ModelSpec, cfg: StepperConfig) -> float:
    """Return dt * (reaction Lipschitz bound); warn when it reaches 1."""
    ratio = cfg.dt * spec.lipschitz_bound()
    if ratio >= 1.0:
        warnings.warn(
            f"dt={cfg.dt:g} with reaction Lipschitz bound {spec.lipschitz_bound():g}: "
            f"dt*L={ratio:.3g} >= 1, explicit reaction may lose positivity",
            StabilityWarning,
            stacklevel=2,
        )
    return ratio


def stable_dt(spec: ModelSpec, dt_max: float, safety: float = 0.5) -> float:
    """Largest dt <= dt_max with dt * L <= safety."""
    return min(dt_max, safety / spec.lipschitz_bound())


def apply_appendix_rescaling(spec: ModelSpec) -> tuple[ModelSpec, float]:
    """Stretch space by sqrt(d_v) so that v diffuses at rate 1.

    Returns the rescaled model and the factor that converts speeds measured
    in the rescaled frame back to original units.
    """
    fields = (spec.d_u, spec.d_v, spec.mu, spec.a)
    if not all(isinstance(f, Constant) for f in fields):
        raise ValueError("rescaling requires constant diffusion, resource and growth fields")
    dv = spec.d_v.value
    rescaled = replace(spec, d_u=Constant(spec.d_u.value / dv), d_v=Constant(1.0))
    return rescaled, math.sqrt(dv)


@dataclass
class TridiagonalSystem:
    """``lower[i]`` couples row i+1 to column i; ``upper[i]`` couples row i to column i+1."""

    lower: np.ndarray
    diagonal: np.ndarray
    upper: np.ndarray
    rhs: np.ndarray

    def is_diagonally_dominant(self) -> bool:
        off = np.zeros_like(self.diagonal)
        off[1:] += np.abs(self.lower)
        off[:-1] += np.abs(self.upper)
        return bool(np.all(np.abs(self.diagonal) > off))

    def solve(self) -> np.ndarray:
        return thomas_solve(self.lower, self.diagonal, self.upper, self.rhs)


def thomas_solve(lower, diagonal, upper, rhs) -> np.ndarray:
    """Thomas elimination without pivoting."""
    n = len(diagonal)
    c = np.empty(n - 1)
    y = np.empty(n)
    denom = diagonal[0]
    if denom == 0:
        raise ZeroDivisionError("zero pivot in tridiagonal system")
    c[0] = upper[0] / denom
    y[0] = rhs[0] / denom
    for i in range(1, n):
        denom = diagonal[i] - lower[i - 1] * c[i - 1]
        if denom == 0:
            raise ZeroDivisionError("zero pivot in tridiagonal system")
        if i < n - 1:
            c[i] = upper[i] / denom
        y[i] = (rhs[i] - lower[i - 1] * y[i - 1]) / denom
    for i in range(n - 2, -1, -1):
        y[i] -= c[i] * y[i + 1]
    return y


def diffusion_system(coeff: np.ndarray, dx: float, dt: float, rhs: np.ndarray | None = None) -> TridiagonalSystem:
    """Backward-Euler matrix ``I - dt*D`` for node diffusion coefficients ``coeff``."""
    coeff = np.asarray(coeff, dtype=float)
    face = 0.5 * (coeff[1:] + coeff[:-1]) * dt / dx**2
    n = len(coeff)
    diag = np.ones(n)
    diag[1:-1] += face[:-1] + face[1:]
    # ghost nodes u[-1] = u[1], u[n] = u[n-2] double the boundary face
    diag[0] += 2 * face[0]
    diag[-1] += 2 * face[-1]
    upper = -face.copy()
    lower = -face.copy()
    upper[0] *= 2
    lower[-1] *= 2
    return TridiagonalSystem(lower, diag, upper, np.zeros(n) if rhs is None else np.asarray(rhs, float))


class _Factored:
    """LU factors of a fixed tridiagonal matrix (LAPACK gttrf/gttrs)."""

    def __init__(self, system: TridiagonalSystem):
        dl, d, du, du2, ipiv, info = lapack.dgttrf(system.lower, system.diagonal, system.upper)
        if info != 0:
            raise np.linalg.LinAlgError("singular diffusion matrix")
        self._lu = (dl, d, du, du2, ipiv)

    def solve(self, b: np.ndarray) -> np.ndarray:
        x, info = lapack.dgttrs(*self._lu, b)
        if info != 0:
            raise np.linalg.LinAlgError("tridiagonal back-substitution failed")
        return x


class Stepper:
    """Precomputed operators for one (spec, grid, dt) triple."""

    def __init__(self, spec: ModelSpec, grid: Grid1D, cfg: StepperConfig):
        self.spec = spec
        self.grid = grid
        self.cfg = cfg
        x = grid.x
        self.x = x
        self._mu = np.asarray(spec.mu(x), dtype=float)
        self._a = np.asarray(spec.a(x), dtype=float)
        self._sys_u = diffusion_system(spec.d_u(x), grid.dx, cfg.dt)
        self._sys_v = diffusion_system(spec.d_v(x), grid.dx, cfg.dt)
        self._solve_u = _Factored(self._sys_u).solve
        self._solve_v = _Factored(self._sys_v).solve
        try:
            self._d = spec.d
        except ValueError:
            self._d = None

    def reaction(self, u: np.ndarray, v: np.ndarray):
        return reaction_with_fields(self.spec, u, v, self._mu, self._a)

    def diffuse(self, u: np.ndarray, v: np.ndarray):
        return self._solve_u(u), self._solve_v(v)

    def advance(self, u: np.ndarray, v: np.ndarray, t: float):
        """One Lie step on raw arrays; returns new arrays."""
        dt = self.cfg.dt
        f, g = self.reaction(u, v)
        u, v = self.diffuse(u + dt * f, v + dt * g)
        return self._guard(u, t + dt), self._guard(v, t + dt)

    def _guard(self, w: np.ndarray, t: float) -> np.ndarray:
        lo = w.min()
        if not math.isfinite(lo) or not np.all(np.isfinite(w)):
            raise SolverError("non-finite density", t, self.spec.k, self._d)
        if lo < 0:
            if lo < -ROUNDOFF:
                raise SolverError(f"negative density {lo:.3g} beyond roundoff", t, self.spec.k, self._d)
            np.maximum(w, 0.0, out=w)
        return w

    def step(self, state: State) -> State:
        u, v = self.advance(state.u, state.v, state.t)
        return State(state.t + self.cfg.dt, u, v)

    def run(
        self,
        state: State,
        t_end: float,
        observe: Callable[[float, np.ndarray, np.ndarray], None] | None = None,
        every: int = 1,
    ) -> State:
        """Advance to ``t_end``; ``observe(t, u, v)`` is called every ``every`` steps."""
        steps = int(round((t_end - state.t) / self.cfg.dt))
        u, v, t0 = state.u, state.v, state.t
        for s in range(1, steps + 1):
            u, v = self.advance(u, v, t0 + (s - 1) * self.cfg.dt)
            if observe is not None and s % every == 0:
                observe(t0 + s * self.cfg.dt, u, v)
        return State(t0 + steps * self.cfg.dt, u, v)


def diffusion_step(state: State, spec: ModelSpec, grid: Grid1D, dt: float) -> State:
    """Implicit diffusion substep only; time is not advanced."""
    x = grid.x
    u = diffusion_system(spec.d_u(x), grid.dx, dt, state.u).solve()
    v = diffusion_system(spec.d_v(x), grid.dx, dt, state.v).solve()
    return State(state.t, u, v)


def step(state: State, spec: ModelSpec, grid: Grid1D, cfg: StepperConfig) -> State:
    return Stepper(spec, grid, cfg).step(state)


def write_snapshot(path: str | Path, grid: Grid1D, state: State) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "u", "v"])
        for row in zip(grid.x, state.u, state.v):
            w.writerow([repr(float(c)) for c in row])


def snapshot_times_to_steps(times: Iterable[float], dt: float) -> dict[int, float]:
    return {int(round(t / dt)): float(t) for t in times}
