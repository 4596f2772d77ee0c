"""Model definitions shared by the solver, the front tracker and the scenarios.

The two densities ``u`` and ``v`` live on a uniform 1D node grid.  ``u`` is the
reference population; ``v`` carries the diffusion rate ``d`` that is varied.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any, Union

import numpy as np


class CompetitionKind(str, enum.Enum):
    LOTKA_VOLTERRA = "lotka-volterra"
    CUBIC = "cubic"


@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.value) if np.ndim(x) else float(self.value)


@dataclass(frozen=True)
class Periodic:
    """Piecewise-linear ``period``-periodic function.

    ``values`` are samples at ``linspace(0, period, len(values))``, so the first
    and last entries describe the same point and must agree.
    """

    period: float
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.period <= 0:
            raise ValueError("period must be positive")
        if len(self.values) < 2:
            raise ValueError("a periodic field needs at least two samples")
        if abs(self.values[0] - self.values[-1]) > 1e-12:
            raise ValueError("first and last periodic samples must coincide")

    @property
    def samples_per_period(self) -> int:
        return len(self.values)

    def __call__(self, x):
        nodes = np.linspace(0.0, self.period, len(self.values))
        out = np.interp(np.mod(x, self.period), nodes, self.values)
        return out if np.ndim(x) else float(out)


@dataclass(frozen=True)
class SineOscillation:
    """``mean + amplitude * sin(2 * frequency * pi * x)``."""

    mean: float
    amplitude: float
    frequency: int

    def __post_init__(self):
        if self.frequency <= 0:
            raise ValueError("frequency must be a positive integer")

    def __call__(self, x):
        out = self.mean + self.amplitude * np.sin(2.0 * self.frequency * np.pi * np.asarray(x, dtype=float))
        return out if np.ndim(x) else float(out)


CoefficientField = Union[Constant, Periodic, SineOscillation]


def evaluate_coefficient(f: CoefficientField, x):
    """Evaluate a coefficient field at a point or an array of points."""
    return f(x)


def field_bounds(f: CoefficientField) -> tuple[float, float]:
    """Exact (min, max) of a coefficient field over one period."""
    if isinstance(f, Constant):
        return f.value, f.value
    if isinstance(f, Periodic):
        return min(f.values), max(f.values)
    return f.mean - abs(f.amplitude), f.mean + abs(f.amplitude)


def periodic_from_function(func, period: float, samples: int) -> Periodic:
    xs = np.linspace(0.0, period, samples)
    vals = np.asarray(func(xs), dtype=float)
    vals[-1] = vals[0]
    return Periodic(period, tuple(vals))


def patchy_field(widths, levels, dx: float) -> Periodic:
    """Periodic field made of flat patches joined by one-cell linear ramps.

    ``widths[i]`` is the length of patch ``i`` and ``levels[i]`` its value.  The
    field is sampled every ``dx``, so neighbouring patches are connected by a
    ramp exactly one mesh cell wide.
    """
    widths = [float(w) for w in widths]
    if len(widths) != len(levels) or not widths:
        raise ValueError("widths and levels must be non-empty and of equal length")
    period = sum(widths)
    m = int(round(period / dx))
    if not math.isclose(m * dx, period, rel_tol=1e-12):
        raise ValueError("patch widths must be multiples of dx")
    # sample j covers [j*dx, (j+1)*dx) and takes the level of the patch holding its midpoint
    mids = (np.arange(m) + 0.5) * dx
    edges = np.cumsum(widths)
    idx = np.searchsorted(edges, mids)
    cell = np.asarray(levels, dtype=float)[idx]
    vals = np.append(cell, cell[0])
    return Periodic(period, tuple(vals))


@dataclass(frozen=True)
class ModelSpec:
    """A two-species competition-diffusion problem.

    Reaction terms (``mu``, ``a`` evaluated at x)::

        lotka-volterra: mu*(u*(a-u) - h*u*v),    mu*(r*v*(a-v) - alpha*k*u*v)
        cubic:          mu*(u*(a-u) - h*u*v^2),  mu*(r*v*(a-v) - k*u^2*v)
    """

    d_u: CoefficientField = Constant(1.0)
    d_v: CoefficientField = Constant(1.0)
    r: float = 1.0
    h: float = 2.0
    k: float = 2.0
    alpha: float = 1.0
    mu: CoefficientField = Constant(1.0)
    a: CoefficientField = Constant(1.0)
    kind: CompetitionKind = CompetitionKind.LOTKA_VOLTERRA

    def __post_init__(self):
        object.__setattr__(self, "kind", CompetitionKind(self.kind))
        if self.r <= 0:
            raise ValueError("r must be positive")
        if self.h < 0 or self.k < 0:
            raise ValueError("competition rates h and k must be nonnegative")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.alpha != 1.0 and self.kind is not CompetitionKind.LOTKA_VOLTERRA:
            raise ValueError("alpha != 1 is only defined for Lotka-Volterra competition")
        for name in ("d_u", "d_v"):
            lo, _ = field_bounds(getattr(self, name))
            if lo <= 0:
                raise ValueError(f"{name} must be uniformly positive")

    @property
    def d(self) -> float:
        """Constant diffusion ratio d_v/d_u; only defined for constant fields."""
        if not (isinstance(self.d_u, Constant) and isinstance(self.d_v, Constant)):
            raise ValueError("diffusion ratio requires constant diffusion fields")
        return self.d_v.value / self.d_u.value

    def is_homogeneous(self) -> bool:
        return all(isinstance(f, Constant) for f in (self.d_u, self.d_v, self.mu, self.a))

    def lipschitz_bound(self) -> float:
        """Row-sum bound on the reaction Jacobian over the invariant box [0, B]^2."""
        mu_max = max(abs(b) for b in field_bounds(self.mu))
        a_max = max(abs(b) for b in field_bounds(self.a))
        b = max(1.0, a_max)
        if self.kind is CompetitionKind.LOTKA_VOLTERRA:
            row_u = a_max + 2 * b + 2 * self.h * b
            row_v = self.r * (a_max + 2 * b) + 2 * self.alpha * self.k * b
        else:
            row_u = a_max + 2 * b + 3 * self.h * b * b
            row_v = self.r * (a_max + 2 * b) + 3 * self.k * b * b
        return mu_max * max(row_u, row_v)


def symmetric_lv(k: float, d: float) -> ModelSpec:
    """The symmetric system: r = 1, h = k, u diffuses at 1 and v at d."""
    return ModelSpec(d_u=Constant(1.0), d_v=Constant(float(d)), r=1.0, h=float(k), k=float(k))


def reaction_terms(spec: ModelSpec, u, v, x=0.0):
    """Reaction rates ``(f, g)`` at densities ``(u, v)`` and position ``x``.

    Works elementwise on arrays.
    """
    return reaction_with_fields(spec, u, v, spec.mu(x), spec.a(x))


def reaction_with_fields(spec: ModelSpec, u, v, mu, a):
    """Same as :func:`reaction_terms` with ``mu`` and ``a`` already evaluated."""
    uv = u * v
    if spec.kind is CompetitionKind.LOTKA_VOLTERRA:
        f = u * (a - u) - spec.h * uv
        g = spec.r * v * (a - v) - spec.alpha * spec.k * uv
    else:
        f = u * (a - u) - spec.h * uv * v
        g = spec.r * v * (a - v) - spec.k * uv * u
    return mu * f, mu * g


@dataclass(frozen=True)
class Grid1D:
    length: float
    dx: float

    def __post_init__(self):
        if self.dx <= 0:
            raise ValueError("dx must be positive")
        if self.length <= 0:
            raise ValueError("length must be positive")
        n = self.n
        if abs(self.dx * (n - 1) - self.length) > 1e-12 * self.length:
            raise ValueError(f"length {self.length} is not a multiple of dx {self.dx}")
        if n < 8:
            raise ValueError("grid needs at least 8 nodes")

    @property
    def n(self) -> int:
        return int(round(self.length / self.dx)) + 1

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n)

    def quadrature_weights(self) -> np.ndarray:
        """Trapezoid weights; the no-flux discrete Laplacian conserves sum(w*u)."""
        w = np.full(self.n, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w

    def mass(self, f: np.ndarray) -> float:
        return float(np.dot(self.quadrature_weights(), f))


@dataclass
class State:
    t: float
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.u.shape != self.v.shape or self.u.ndim != 1:
            raise ValueError("u and v must be 1D arrays of equal length")

    def check(self) -> None:
        for name, f in (("u", self.u), ("v", self.v)):
            if not np.all(np.isfinite(f)):
                raise ValueError(f"{name} has non-finite entries")
            if np.any(f < 0):
                raise ValueError(f"{name} has negative entries")

    def copy(self) -> "State":
        return State(self.t, self.u.copy(), self.v.copy())


def wave_initial_state(grid: Grid1D, interface: float | None = None) -> State:
    """Segregated data: u = 1, v = 0 left of the interface; u = 0, v = 1 from it on."""
    x = grid.x
    x0 = grid.length / 2 if interface is None else interface
    right = x >= x0
    return State(0.0, np.where(right, 0.0, 1.0), np.where(right, 1.0, 0.0))


# --- JSON (de)serialization -------------------------------------------------

def field_to_json(f: CoefficientField) -> Any:
    if isinstance(f, Constant):
        return f.value
    if isinstance(f, Periodic):
        return {"periodic": {"period": f.period, "values": list(f.values)}}
    return {"sine": {"mean": f.mean, "amplitude": f.amplitude, "frequency": f.frequency}}


def field_from_json(obj: Any, path: str = "field") -> CoefficientField:
    if isinstance(obj, bool):
        raise ValueError(f"{path}: expected a number or a field object")
    if isinstance(obj, (int, float)):
        return Constant(float(obj))
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ValueError(f"{path}: expected a number or one of 'constant', 'periodic', 'sine'")
    (tag, body), = obj.items()
    if tag == "constant":
        return Constant(float(body))
    if tag == "periodic":
        _require_keys(body, {"period", "values"}, set(), f"{path}.periodic")
        return Periodic(float(body["period"]), tuple(body["values"]))
    if tag == "sine":
        _require_keys(body, {"mean", "amplitude", "frequency"}, set(), f"{path}.sine")
        return SineOscillation(float(body["mean"]), float(body["amplitude"]), int(body["frequency"]))
    raise ValueError(f"{path}: unknown field type {tag!r}")


def _require_keys(obj: Any, required: set, optional: set, path: str) -> None:
    if not isinstance(obj, dict):
        raise ValueError(f"{path}: expected an object")
    unknown = set(obj) - required - optional
    if unknown:
        raise ValueError(f"{path}: unknown key(s) {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ValueError(f"{path}: missing key(s) {sorted(missing)}")


_MODEL_KEYS = {"d", "d_u", "d_v", "r", "h", "k", "alpha", "mu", "a", "kind"}


def model_to_json(spec: ModelSpec) -> dict:
    return {
        "d_u": field_to_json(spec.d_u),
        "d_v": field_to_json(spec.d_v),
        "r": spec.r,
        "h": spec.h,
        "k": spec.k,
        "alpha": spec.alpha,
        "mu": field_to_json(spec.mu),
        "a": field_to_json(spec.a),
        "kind": spec.kind.value,
    }


def model_from_json(obj: dict, path: str = "model") -> ModelSpec:
    """Build a ModelSpec; ``d`` is shorthand for a constant ``d_v`` and a missing ``h`` means ``h = k``."""
    _require_keys(obj, set(), _MODEL_KEYS, path)
    if "d" in obj and "d_v" in obj:
        raise ValueError(f"{path}: give either 'd' or 'd_v', not both")
    kw: dict[str, Any] = {}
    for key in ("d_u", "d_v", "mu", "a"):
        if key in obj:
            kw[key] = field_from_json(obj[key], f"{path}.{key}")
    if "d" in obj:
        kw["d_v"] = Constant(_number(obj["d"], f"{path}.d"))
    for key in ("r", "k", "alpha"):
        if key in obj:
            kw[key] = _number(obj[key], f"{path}.{key}")
    kw["h"] = _number(obj["h"], f"{path}.h") if "h" in obj else kw.get("k", ModelSpec.k)
    if "kind" in obj:
        try:
            kw["kind"] = CompetitionKind(obj["kind"])
        except ValueError:
            raise ValueError(f"{path}.kind: must be one of {[c.value for c in CompetitionKind]}") from None
    try:
        return ModelSpec(**kw)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{path}: expected a number")
    return float(value)
