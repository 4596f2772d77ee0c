"""Catalogue of known values and signs of the symmetric wave speed.

Each anchor runs a handful of front-speed simulations and compares the result
with an exact value, a sign region or a bracket.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .core import symmetric_lv
from .scenarios import ma_huang_ou_region, scenario_asymptotic_probes, scenario_cubic_sign_law
from .simulate import Protocol, measure_speed

RODRIGO_MIMURA = -math.sqrt(6) / 12


@dataclass
class AnchorResult:
    anchor_id: str
    description: str
    measured: float
    expected: str
    tolerance: float
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class Anchor:
    anchor_id: str
    description: str
    tolerance: float
    run: Callable[[float], AnchorResult]


def _speed(k: float, d: float, protocol: Protocol = Protocol()) -> float:
    est = measure_speed(symmetric_lv(k, d), protocol)
    return est.speed if est.ok else math.nan


def _zero_speed(tol: float) -> AnchorResult:
    ks = (1.5, 2.0, 5.0, 10.0)
    speeds = [_speed(k, 1.0) for k in ks]
    worst = max(abs(s) for s in speeds)
    return AnchorResult("zero-speed-d1", "c(k, 1) = 0 for k in {1.5, 2, 5, 10}", worst, "0",
                        tol, worst <= tol, " ".join(f"{s:.2e}" for s in speeds))


def _rodrigo_mimura(tol: float) -> AnchorResult:
    c = _speed(11 / 6, 11 / 2)
    err = abs(c - RODRIGO_MIMURA)
    return AnchorResult("rodrigo-mimura", "c(11/6, 11/2) = -sqrt(6)/12", c, f"{RODRIGO_MIMURA:.6f}",
                        tol, err <= tol, f"error {err:.2e}")


def _rodrigo_mimura_fine(tol: float) -> AnchorResult:
    c = _speed(11 / 6, 11 / 2, Protocol(dx=0.01, dt=0.005))
    err = abs(c - RODRIGO_MIMURA)
    return AnchorResult("rodrigo-mimura-fine", "same at dx=0.01, dt=0.005", c, f"{RODRIGO_MIMURA:.6f}",
                        tol, err <= tol, f"error {err:.2e}")


def _negative(anchor_id: str, description: str, points: list[tuple[float, float]], tol: float) -> AnchorResult:
    speeds = [_speed(k, d) for k, d in points]
    worst = max(speeds)
    return AnchorResult(anchor_id, description, worst, f"< -{tol:g}", tol, worst < -tol,
                        " ".join(f"(k={k:g},d={d:g}):{s:.4f}" for (k, d), s in zip(points, speeds)))


def ma_huang_ou_samples(k: float = 1.8, per_interval: int = 2) -> list[float]:
    """d values strictly inside each known negative interval, evenly spaced."""
    out = []
    for lo, hi in ma_huang_ou_region(k):
        out += [round(lo + (hi - lo) * (q + 1) / (per_interval + 1), 10) for q in range(per_interval)]
    return out


def _guo_lin(tol: float) -> AnchorResult:
    return _negative("guo-lin", "c(k, 4) < 0 for 5/4 <= k <= 4/3",
                     [(k, 4.0) for k in (1.25, 1.30, 1.333)], tol)


def _ma_huang_ou(tol: float) -> AnchorResult:
    k = 1.8
    return _negative("ma-huang-ou", "c(1.8, d) < 0 for d in (4, 4.5) and (4.5, 5)",
                     [(k, d) for d in ma_huang_ou_samples(k)], tol)


def _large_d(tol: float) -> AnchorResult:
    (o,) = scenario_asymptotic_probes("large-d", [100.0], 2.0)
    x = o.measured["checked"]
    return AnchorResult("large-d", "c(2, 100)/sqrt(100) in (-2, 0)", x, "(-2, 0)", tol,
                        bool(o.measured["in_bracket"]) and x < -tol)


def _large_k(tol: float) -> AnchorResult:
    (o,) = scenario_asymptotic_probes("large-k", [500.0], 4.0)
    x = o.measured["checked"]
    return AnchorResult("large-k", "c(500, 4) in (-4, 0)", x, "(-4, 0)", tol,
                        bool(o.measured["in_bracket"]) and x < -tol, f"dt={o.params['dt']:.3g}")


CUBIC_GRID = {
    "rh": ((1.0, 1.5), (1.25, 1.6), (1.2, 2.5)),
    "k": (1.5, 2.0, 3.0),
    "d": (2.0, 5.0),
}


def cubic_grid_results(tol: float = 1e-3) -> list[dict]:
    rows = []
    for r, h in CUBIC_GRID["rh"]:
        for k in CUBIC_GRID["k"]:
            d, d_alt = CUBIC_GRID["d"]
            o = scenario_cubic_sign_law(r, h, k, d, d_alt)
            gap = k - r * h
            speeds = (o.measured["speed"], o.measured["speed_alt"])
            if abs(gap) < 1e-9:
                ok = all(abs(s) < tol for s in speeds)
            elif abs(gap) > 0.1:
                ok = all(math.copysign(1, s) == math.copysign(1, gap) and abs(s) > tol for s in speeds)
            else:
                ok = True
            ok = ok and bool(o.measured["sign_consistent"])
            rows.append({"r": r, "h": h, "k": k, "speeds": speeds, "gap": gap, "ok": ok})
    return rows


def _cubic(tol: float) -> AnchorResult:
    rows = cubic_grid_results(tol)
    bad = [row for row in rows if not row["ok"]]
    worst_zero = max(max(abs(s) for s in row["speeds"]) for row in rows if abs(row["gap"]) < 1e-9)
    return AnchorResult("cubic-sign-law", "sign c = sign(k - rh) on a 3x3x2 grid, d-independent",
                        float(len(bad)), "0 failures", tol, not bad,
                        f"max |c| at k=rh: {worst_zero:.1e}")


def symmetry_gap(k: float, d: float) -> float:
    """|c(k, d) + sqrt(d) c(k, 1/d)| with the 1/d run in unscaled coordinates."""
    direct = _speed(k, d)
    inverse = measure_speed(symmetric_lv(k, 1 / d), Protocol(rescaled=False))
    return abs(direct + math.sqrt(d) * inverse.speed)


def _symmetry(tol: float) -> AnchorResult:
    gaps = [symmetry_gap(k, d) for k, d in ((2.0, 4.0), (3.0, 9.0))]
    worst = max(gaps)
    return AnchorResult("symmetry-relation", "c(k, d) = -sqrt(d) c(k, 1/d) at (2, 4), (3, 9)", worst, "0",
                        tol, worst <= tol, " ".join(f"{g:.1e}" for g in gaps))


ANCHORS: dict[str, Anchor] = {
    a.anchor_id: a
    for a in (
        Anchor("zero-speed-d1", "c(k, 1) = 0", 1e-3, _zero_speed),
        Anchor("rodrigo-mimura", "exact speed", 0.02, _rodrigo_mimura),
        Anchor("rodrigo-mimura-fine", "exact speed, refined", 0.005, _rodrigo_mimura_fine),
        Anchor("guo-lin", "negative strip at d = 4", 1e-3, _guo_lin),
        Anchor("ma-huang-ou", "negative intervals at k = 1.8", 1e-3, _ma_huang_ou),
        Anchor("large-d", "large-d bracket", 1e-3, _large_d),
        Anchor("large-k", "large-k bracket", 1e-3, _large_k),
        Anchor("cubic-sign-law", "cubic competition", 1e-3, _cubic),
        Anchor("symmetry-relation", "d <-> 1/d relation", 0.02, _symmetry),
    )
}


def run_anchors(only: list[str] | None = None, tolerance: float | None = None) -> list[AnchorResult]:
    """Run the selected anchors; ``tolerance`` replaces every anchor's own tolerance."""
    ids = list(ANCHORS) if not only else only
    unknown = [i for i in ids if i not in ANCHORS]
    if unknown:
        raise KeyError(f"unknown anchor id(s): {', '.join(unknown)}; known: {', '.join(ANCHORS)}")
    return [ANCHORS[i].run(ANCHORS[i].tolerance if tolerance is None else tolerance) for i in ids]


def format_table(results: list[AnchorResult]) -> str:
    head = f"{'anchor':<20} {'result':<6} {'measured':>14} {'expected':>12} {'tol':>8}  detail"
    lines = [head, "-" * len(head)]
    for r in results:
        lines.append(
            f"{r.anchor_id:<20} {'PASS' if r.passed else 'FAIL':<6} {r.measured:>14.6g} "
            f"{r.expected:>12} {r.tolerance:>8.2g}  {r.detail}"
        )
    return "\n".join(lines)
