"""Front location and speed estimation from level-set traces."""
from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import Grid1D, State


class Flag(str, enum.Enum):
    BOUNDARY_TOO_CLOSE = "BoundaryTooClose"
    NON_MONOTONE_FRONT = "NonMonotoneFront"
    HIGH_RESIDUAL = "HighResidual"
    NO_CROSSING = "NoCrossing"
    DOMAIN_EXTENDED = "DomainExtended"
    SOLVER_FAILURE = "SolverFailure"


class EstimationError(ValueError):
    """Too few usable samples in the fitting window."""


@dataclass(frozen=True)
class EstimatorSettings:
    min_samples: int = 5
    boundary_margin: float = 2.0
    residual_factor: float = 0.05
    pinned_speed: float = 1e-3


DEFAULT_SETTINGS = EstimatorSettings()


@dataclass
class FrontTrace:
    """Front positions over time; ``nan`` marks a sample without a crossing."""

    times: list[float] = field(default_factory=list)
    positions: list[float] = field(default_factory=list)
    level: float = 0.5
    species: str = "v"
    length: float = math.inf
    dx: float = 0.0

    def append(self, t: float, x_front: float | None) -> None:
        if self.times and t <= self.times[-1]:
            raise ValueError("trace times must be strictly increasing")
        self.times.append(float(t))
        self.positions.append(math.nan if x_front is None else float(x_front))

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.times, self.positions))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x_front"])
            for t, x in zip(self.times, self.positions):
                w.writerow([repr(t), repr(x)])


@dataclass(frozen=True)
class SpeedEstimate:
    speed: float
    residual_rms: float
    window: tuple[float, float]
    boundary_margin: float
    flags: frozenset = frozenset()
    samples: int = 0
    wobble: float = 0.0
    pinned: bool = False
    domain_length: float = math.nan

    @property
    def ok(self) -> bool:
        return math.isfinite(self.speed) and not (self.flags & {Flag.NO_CROSSING, Flag.SOLVER_FAILURE})

    def with_flags(self, *extra: Flag, **changes) -> "SpeedEstimate":
        return replace(self, flags=self.flags | frozenset(extra), **changes)

    def to_json(self) -> dict:
        return {
            "speed": self.speed if math.isfinite(self.speed) else None,
            "residual_rms": self.residual_rms if math.isfinite(self.residual_rms) else None,
            "window": list(self.window),
            "boundary_margin": self.boundary_margin if math.isfinite(self.boundary_margin) else None,
            "flags": sorted(f.value for f in self.flags),
            "samples": self.samples,
            "wobble": self.wobble,
            "pinned": self.pinned,
            "domain_length": self.domain_length if math.isfinite(self.domain_length) else None,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SpeedEstimate":
        def num(v):
            return math.nan if v is None else float(v)

        return cls(
            speed=num(obj["speed"]),
            residual_rms=num(obj["residual_rms"]),
            window=tuple(obj["window"]),
            boundary_margin=num(obj["boundary_margin"]),
            flags=frozenset(Flag(f) for f in obj["flags"]),
            samples=int(obj["samples"]),
            wobble=float(obj["wobble"]),
            pinned=bool(obj["pinned"]),
            domain_length=num(obj["domain_length"]),
        )


def failed_estimate(window, *flags: Flag, domain_length: float = math.nan) -> SpeedEstimate:
    return SpeedEstimate(math.nan, math.nan, tuple(window), math.nan, frozenset(flags), domain_length=domain_length)


def locate_front_array(x: np.ndarray, f: np.ndarray, level: float = 0.5) -> float | None:
    """Rightmost crossing of ``level`` by the nodal profile ``f``, linearly interpolated."""
    s = f - level
    if s[-1] == 0:
        return float(x[-1])
    cross = (s[:-1] * s[1:] < 0) | (s[:-1] == 0)
    idx = np.flatnonzero(cross)
    if idx.size == 0:
        return None
    j = idx[-1]
    if s[j] == 0:
        return float(x[j])
    theta = s[j] / (s[j] - s[j + 1])
    return float(x[j] + theta * (x[j + 1] - x[j]))


def locate_front(state: State, grid: Grid1D, level: float = 0.5, species: str = "v") -> float | None:
    """Position of the ``level`` crossing of one species, scanning from the right end.

    Returns ``None`` when the profile never crosses the level.
    """
    if species not in ("u", "v"):
        raise ValueError("species must be 'u' or 'v'")
    return locate_front_array(grid.x, getattr(state, species), level)


def _window_samples(trace: FrontTrace, window) -> tuple[np.ndarray, np.ndarray, int]:
    t = np.asarray(trace.times, dtype=float)
    x = np.asarray(trace.positions, dtype=float)
    t0, t1 = window
    eps = 1e-9 * max(1.0, abs(t1))
    inside = (t >= t0 - eps) & (t <= t1 + eps)
    missing = int(np.count_nonzero(inside & ~np.isfinite(x)))
    keep = inside & np.isfinite(x)
    return t[keep], x[keep], missing


def _line_fit(t: np.ndarray, x: np.ndarray) -> tuple[float, float]:
    tm = t.mean()
    xm = x.mean()
    dt = t - tm
    slope = float(np.dot(dt, x - xm) / np.dot(dt, dt))
    return slope, float(xm - slope * tm)


def estimate_speed(
    trace: FrontTrace,
    window: tuple[float, float],
    rescale_factor: float = 1.0,
    settings: EstimatorSettings = DEFAULT_SETTINGS,
) -> SpeedEstimate:
    """Least-squares slope of front position against time over ``window``.

    The slope is multiplied by ``rescale_factor`` to report the speed in
    original spatial units.  Raises :class:`EstimationError` with fewer than
    ``settings.min_samples`` usable samples.
    """
    t, x, missing = _window_samples(trace, window)
    if t.size < settings.min_samples:
        raise EstimationError(
            f"{t.size} usable samples in window {tuple(window)} "
            f"({missing} without crossing), need {settings.min_samples}"
        )
    slope, intercept = _line_fit(t, x)
    resid = x - (slope * t + intercept)
    rms = float(np.sqrt(np.mean(resid**2)))
    margin = float(min(np.min(x), np.min(trace.length - x)))

    flags = set()
    if missing:
        flags.add(Flag.NO_CROSSING)
    if margin < settings.boundary_margin:
        flags.add(Flag.BOUNDARY_TOO_CLOSE)
    if trace.dx > 0 and rms > settings.residual_factor * trace.dx * t.size:
        flags.add(Flag.HIGH_RESIDUAL)
    steps = np.diff(x)
    noise = 1e-6 * (trace.dx if trace.dx > 0 else 1.0)
    if np.any(steps > noise) and np.any(steps < -noise):
        flags.add(Flag.NON_MONOTONE_FRONT)

    return SpeedEstimate(
        speed=slope * rescale_factor,
        residual_rms=rms,
        window=(float(window[0]), float(window[1])),
        boundary_margin=margin,
        flags=frozenset(flags),
        samples=int(t.size),
        wobble=float(np.ptp(resid)),
        domain_length=trace.length,
    )


def estimate_pulsating_speed(
    trace: FrontTrace,
    period_L: float,
    window: tuple[float, float],
    rescale_factor: float = 1.0,
    settings: EstimatorSettings = DEFAULT_SETTINGS,
) -> SpeedEstimate:
    """Mean speed of a front that wobbles periodically around linear motion.

    Same regression as :func:`estimate_speed`; ``wobble`` is the peak-to-peak
    residual.  A front whose mean speed is below ``settings.pinned_speed`` and
    whose wobble stays within one period is classified as pinned.
    """
    est = estimate_speed(trace, window, rescale_factor, settings)
    span = window[1] - window[0]
    travelled = abs(est.speed / rescale_factor) * span
    if travelled < 3 * period_L and span < 10:
        warnings.warn(
            f"window {tuple(window)} covers {travelled / period_L:.2g} periods of front motion "
            "and less than 10 time units; the mean speed may be biased by the periodic wobble",
            stacklevel=2,
        )
    pinned = abs(est.speed) < settings.pinned_speed and est.wobble <= period_L
    # wobble is expected here, so it does not count against the fit quality
    flags = est.flags - {Flag.HIGH_RESIDUAL, Flag.NON_MONOTONE_FRONT}
    return replace(est, flags=flags, pinned=pinned)
