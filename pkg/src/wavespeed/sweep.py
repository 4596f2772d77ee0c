"""Parameter-plane sweeps of the symmetric wave speed and their level sets."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import symmetric_lv
from .frontspeed import Flag, SpeedEstimate
from .simulate import Protocol, measure_speed

log = logging.getLogger(__name__)

DEFAULT_LEVELS = tuple(round(-0.1 * i, 10) for i in range(13))


class CheckpointError(RuntimeError):
    """Checkpoint could not be read or written; finished cells stay on disk."""


def axis_values(rng: Sequence[float]) -> np.ndarray:
    lo, hi, step = (float(v) for v in rng)
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(n), 10)


@dataclass(frozen=True)
class SweepPlan:
    d_range: tuple[float, float, float] = (1.0, 21.0, 0.5)
    k_range: tuple[float, float, float] = (1.0, 21.0, 0.5)
    appendix_protocol: bool = True
    protocol: Protocol | None = None

    def __post_init__(self):
        for name in ("d_range", "k_range"):
            rng = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, rng)
            if len(rng) != 3:
                raise ValueError(f"{name} must be (min, max, step)")
            lo, hi, step = rng
            if step <= 0:
                raise ValueError(f"{name} step must be positive")
            if hi < lo:
                raise ValueError(f"{name} max must be >= min")
            if self.appendix_protocol and lo < 1:
                raise ValueError(f"{name} min must be >= 1 under the appendix protocol")

    @classmethod
    def full_resolution(cls) -> "SweepPlan":
        return cls(d_range=(1.0, 21.0, 0.1), k_range=(1.0, 21.0, 0.1))

    @property
    def d_values(self) -> np.ndarray:
        return axis_values(self.d_range)

    @property
    def k_values(self) -> np.ndarray:
        return axis_values(self.k_range)

    def resolved_protocol(self) -> Protocol:
        if self.protocol is not None:
            return self.protocol
        return Protocol() if self.appendix_protocol else Protocol(rescaled=False)

    def to_json(self) -> dict:
        out = {
            "d_range": list(self.d_range),
            "k_range": list(self.k_range),
            "appendix_protocol": self.appendix_protocol,
        }
        if self.protocol is not None:
            p = asdict(self.protocol)
            p["window"] = list(p["window"])
            out["protocol"] = p
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "SweepPlan":
        proto = obj.get("protocol")
        if proto is not None:
            proto = Protocol(**{**proto, "window": tuple(proto.get("window", Protocol.window))})
        return cls(
            d_range=tuple(obj.get("d_range", cls.d_range)),
            k_range=tuple(obj.get("k_range", cls.k_range)),
            appendix_protocol=bool(obj.get("appendix_protocol", True)),
            protocol=proto,
        )

    def digest(self) -> str:
        text = json.dumps({"plan": self.to_json(), "protocol": asdict(self.resolved_protocol())}, sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class SweepResult:
    d_values: np.ndarray
    k_values: np.ndarray
    cells: list[list[SpeedEstimate]]  # cells[i][j] is (k_values[i], d_values[j])
    metadata: dict = field(default_factory=dict)

    @property
    def speeds(self) -> np.ndarray:
        return np.array([[c.speed if c.ok else math.nan for c in row] for row in self.cells])

    def flag_strings(self) -> list[list[str]]:
        return [["|".join(sorted(f.value for f in c.flags)) for c in row] for row in self.cells]

    def speed_at(self, d: float, k: float) -> float:
        i = int(np.argmin(np.abs(self.k_values - k)))
        j = int(np.argmin(np.abs(self.d_values - d)))
        return float(self.speeds[i, j])

    def write_csv(self, outdir: str | Path) -> None:
        outdir = Path(outdir)
        write_matrix_csv(outdir / "speeds.csv", self.d_values, self.k_values,
                         [[repr(float(s)) for s in row] for row in self.speeds])
        write_matrix_csv(outdir / "flags.csv", self.d_values, self.k_values, self.flag_strings())


@dataclass
class SpeedGrid:
    """Speeds on the (k, d) lattice without per-cell diagnostics, e.g. as read back from CSV."""

    d_values: np.ndarray
    k_values: np.ndarray
    speeds: np.ndarray

    @classmethod
    def from_csv(cls, path: str | Path) -> "SpeedGrid":
        return cls(*read_speeds_csv(path))


def write_matrix_csv(path: Path, d_values, k_values, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k\\d"] + [repr(float(d)) for d in d_values])
        for k, row in zip(k_values, rows):
            w.writerow([repr(float(k))] + list(row))


def read_speeds_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of the ``speeds.csv`` layout: returns (d_values, k_values, speeds)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    d_values = np.array([float(v) for v in rows[0][1:]])
    k_values = np.array([float(r[0]) for r in rows[1:]])
    speeds = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return d_values, k_values, speeds


def run_single(d: float, k: float, plan: SweepPlan = SweepPlan()) -> SpeedEstimate:
    """Front speed of the symmetric system at (d, k) in original coordinates."""
    if d < 1 and plan.appendix_protocol:
        raise ValueError("d must be >= 1 under the appendix protocol")
    if k < 0:
        raise ValueError("k must be nonnegative")
    return measure_speed(symmetric_lv(k, d), plan.resolved_protocol())


def _cell(args):
    i, j, d, k, plan = args
    return i, j, run_single(d, k, plan)


class _Checkpoint:
    def __init__(self, path: Path | None, digest: str, every: int):
        self.path = path
        self.digest = digest
        self.every = max(1, every)
        self._pending: list[str] = []

    def load(self) -> dict[tuple[int, int], SpeedEstimate]:
        if self.path is None or not self.path.exists():
            return {}
        done = {}
        try:
            with open(self.path) as fh:
                text = fh.read()
        except OSError as exc:
            raise CheckpointError(f"cannot read checkpoint {self.path}: {exc}") from exc
        # every record ends in a newline, so an unterminated tail is a torn write
        lines = text.split("\n")
        torn_tail = lines.pop() != ""
        if not lines:
            self._truncate(0)  # not even a complete header; start over
            return {}
        try:
            header = json.loads(lines[0])
        except json.JSONDecodeError:
            raise CheckpointError(f"checkpoint {self.path} has no readable header") from None
        if header.get("plan") != self.digest:
            raise CheckpointError(f"checkpoint {self.path} belongs to a different plan")
        valid = len(lines[0]) + 1
        for line in lines[1:]:
            try:
                rec = json.loads(line)
                est = SpeedEstimate.from_json(rec["estimate"])
            except (json.JSONDecodeError, KeyError, TypeError):
                # torn final write: drop it so later appends start on a fresh line
                self._truncate(valid)
                break
            done[(rec["i"], rec["j"])] = est
            valid += len(line) + 1
        else:
            if torn_tail:
                self._truncate(valid)
        return done

    def _truncate(self, size: int) -> None:
        try:
            with open(self.path, "r+") as fh:
                fh.truncate(size)
        except OSError as exc:
            raise CheckpointError(f"cannot repair checkpoint {self.path}: {exc}") from exc

    def start(self) -> None:
        if self.path is None or (self.path.exists() and self.path.stat().st_size > 0):
            return
        self._write(json.dumps({"plan": self.digest}) + "\n", "w")

    def add(self, i: int, j: int, est: SpeedEstimate) -> None:
        if self.path is None:
            return
        self._pending.append(json.dumps({"i": i, "j": j, "estimate": est.to_json()}))
        if len(self._pending) >= self.every:
            self.flush()

    def flush(self) -> None:
        if self.path is None or not self._pending:
            return
        self._write("\n".join(self._pending) + "\n", "a")
        self._pending.clear()

    def _write(self, text: str, mode: str) -> None:
        try:
            with open(self.path, mode) as fh:
                fh.write(text)
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise CheckpointError(f"cannot write checkpoint {self.path}: {exc}") from exc


def run_sweep(
    plan: SweepPlan,
    workers: int = 1,
    checkpoint: str | Path | None = None,
    checkpoint_every: int = 16,
    progress: Callable[[int, int], None] | None = None,
) -> SweepResult:
    """Compute every (d, k) cell of ``plan``.

    Cells are independent and deterministic, so the result does not depend on
    ``workers``.  With ``checkpoint`` set, finished cells are appended to that
    file and skipped when the sweep is started again.
    """
    d_values, k_values = plan.d_values, plan.k_values
    if len(d_values) * len(k_values) > 10_000:
        warnings.warn(f"sweep of {len(k_values)}x{len(d_values)} cells will take a long time", stacklevel=2)
    started = time.perf_counter()
    ckpt = _Checkpoint(Path(checkpoint) if checkpoint else None, plan.digest(), checkpoint_every)
    done = ckpt.load()
    ckpt.start()
    tasks = [
        (i, j, float(d), float(k), plan)
        for i, k in enumerate(k_values)
        for j, d in enumerate(d_values)
        if (i, j) not in done
    ]
    total = len(d_values) * len(k_values)

    def record(i, j, est):
        done[(i, j)] = est
        ckpt.add(i, j, est)
        if progress is not None:
            progress(len(done), total)

    try:
        if workers <= 1:
            for task in tasks:
                record(*_cell(task))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_cell, task) for task in tasks]
                try:
                    for fut in as_completed(futures):
                        record(*fut.result())
                except BaseException:
                    for f in futures:
                        f.cancel()
                    raise
    finally:
        ckpt.flush()

    cells = [[done[(i, j)] for j in range(len(d_values))] for i in range(len(k_values))]
    proto = plan.resolved_protocol()
    meta = {
        "plan_hash": plan.digest(),
        "wall_time_s": time.perf_counter() - started,
        "workers": workers,
        "scheme": {**asdict(proto), "window": list(proto.window)},
    }
    return SweepResult(d_values, k_values, cells, meta)


# --- level sets -----------------------------------------------------------

@dataclass
class ContourSet:
    levels: list[float]
    polylines: dict[float, list[np.ndarray]]  # level -> chains of (d, k) vertices

    def to_json(self) -> dict:
        return {
            "levels": [float(l) for l in self.levels],
            "polylines": {
                repr(float(l)): [[[float(a), float(b)] for a, b in chain] for chain in self.polylines[l]]
                for l in self.levels
            },
        }


def extract_contours(result: SweepResult | SpeedGrid, levels: Sequence[float] = DEFAULT_LEVELS) -> ContourSet:
    return ContourSet(
        list(levels),
        {float(l): marching_squares(result.d_values, result.k_values, result.speeds, l) for l in levels},
    )


# corners: 0=(i,j) 1=(i,j+1) 2=(i+1,j+1) 3=(i+1,j); edge e joins corners e and e+1 (mod 4)
_EDGE_CORNERS = ((0, 1), (1, 2), (2, 3), (3, 0))


def _edge_key(i: int, j: int, e: int) -> tuple:
    if e == 0:
        return ("h", i, j)
    if e == 1:
        return ("v", i, j + 1)
    if e == 2:
        return ("h", i + 1, j)
    return ("v", i, j)


def marching_squares(xs, ys, z, level: float) -> list[np.ndarray]:
    """Level-``level`` polylines of ``z[i, j]`` sampled at ``(xs[j], ys[i])``.

    Cells with a NaN corner are skipped.  Saddle cells are split according to
    the mean of the four corners.  Closed chains repeat their first vertex.
    """
    z = np.asarray(z, dtype=float)
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    ni, nj = z.shape
    points: dict[tuple, tuple[float, float]] = {}
    links: dict[tuple, list[tuple]] = {}

    def point(i, j, e):
        key = _edge_key(i, j, e)
        if key not in points:
            ca, cb = _EDGE_CORNERS[e]
            (ia, ja), (ib, jb) = _corner(i, j, ca), _corner(i, j, cb)
            za, zb = z[ia, ja], z[ib, jb]
            t = (level - za) / (zb - za)
            points[key] = (xs[ja] + t * (xs[jb] - xs[ja]), ys[ia] + t * (ys[ib] - ys[ia]))
        return key

    for i in range(ni - 1):
        for j in range(nj - 1):
            c = [z[_corner(i, j, q)] for q in range(4)]
            if any(math.isnan(v) for v in c):
                continue
            above = [v >= level for v in c]
            crossed = [e for e, (a, b) in enumerate(_EDGE_CORNERS) if above[a] != above[b]]
            if not crossed:
                continue
            if len(crossed) == 2:
                pairs = [tuple(crossed)]
            else:
                centre_above = sum(c) / 4.0 >= level
                if centre_above == above[0]:
                    # corners 0 and 2 join through the centre; cut off 1 and 3
                    pairs = [(0, 1), (2, 3)]
                else:
                    pairs = [(3, 0), (1, 2)]
            for ea, eb in pairs:
                ka, kb = point(i, j, ea), point(i, j, eb)
                links.setdefault(ka, []).append(kb)
                links.setdefault(kb, []).append(ka)

    return [np.array([points[k] for k in chain]) for chain in _chains(links)]


def _corner(i: int, j: int, q: int) -> tuple[int, int]:
    return ((i, j), (i, j + 1), (i + 1, j + 1), (i + 1, j))[q]


def _chains(links: dict[tuple, list[tuple]]) -> list[list[tuple]]:
    unused = {k: list(v) for k, v in links.items()}

    def take(a, b):
        unused[a].remove(b)
        unused[b].remove(a)

    chains = []
    # open chains start at dangling ends; sorted for deterministic output
    starts = sorted(k for k, v in links.items() if len(v) == 1)
    for s in starts + sorted(links):
        while unused[s]:
            chain = [s]
            cur = s
            while unused[cur]:
                nxt = unused[cur][0]
                take(cur, nxt)
                chain.append(nxt)
                cur = nxt
            chains.append(chain)
    return chains


# --- monotonicity probes ----------------------------------------------------

def monotonicity_report(
    result: SweepResult,
    tol: float = 2e-2,
    k_lines: Sequence[float] = (2.0, 5.0, 10.0),
    d_lines: Sequence[float] = (2.0, 5.0, 10.0),
) -> dict:
    """Count increases of the speed along d and along k beyond ``tol``.

    Monotonicity is conjectural, so this only reports.
    """
    s = result.speeds
    inc_d = np.zeros_like(s, dtype=bool)
    inc_k = np.zeros_like(s, dtype=bool)
    inc_d[:, 1:] = (s[:, 1:] - s[:, :-1]) > tol
    inc_k[1:, :] = (s[1:, :] - s[:-1, :]) > tol
    report = {"tolerance": tol, "lines": []}
    for k in k_lines:
        i = int(np.argmin(np.abs(result.k_values - k)))
        report["lines"].append({"axis": "d", "k": float(result.k_values[i]), "violations": int(inc_d[i].sum())})
    for d in d_lines:
        j = int(np.argmin(np.abs(result.d_values - d)))
        report["lines"].append({"axis": "k", "d": float(result.d_values[j]), "violations": int(inc_k[:, j].sum())})
    finite = np.isfinite(s)
    bad = (inc_d | inc_k) & finite
    report["violating_cells"] = int(bad.sum())
    report["cells"] = int(finite.sum())
    report["fraction"] = float(bad.sum() / max(1, finite.sum()))
    return report


def failed_cells(result: SweepResult) -> list[tuple[float, float, list[str]]]:
    out = []
    for i, row in enumerate(result.cells):
        for j, est in enumerate(row):
            if not est.ok:
                out.append((float(result.d_values[j]), float(result.k_values[i]), sorted(f.value for f in est.flags)))
    return out


def extended_cells(result: SweepResult) -> int:
    return sum(Flag.DOMAIN_EXTENDED in est.flags for row in result.cells for est in row)
