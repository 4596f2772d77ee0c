"""Command-line entry point: ``wavespeed <command> [--config file.json] ...``.

Exit codes: 0 success, 1 anchor failure, 2 configuration error, 3 runtime or
solver failure.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

from .core import (
    Grid1D,
    ModelSpec,
    _number,
    _require_keys,
    field_from_json,
    model_from_json,
    model_to_json,
    symmetric_lv,
    wave_initial_state,
)
from .frontspeed import Flag, FrontTrace, locate_front_array
from .simulate import Protocol, measure_front, simulation_frame
from .stepper import SolverError, Stepper, StepperConfig, check_stability, write_snapshot
from .sweep import DEFAULT_LEVELS, CheckpointError, SpeedGrid, SweepPlan, extract_contours, run_sweep

log = logging.getLogger(__name__)

COMMANDS = ("simulate", "speed", "sweep", "contour", "validate", "scenario")
SCENARIOS = (
    "periodic-resources",
    "oscillating-diffusion",
    "dockery-bounded",
    "segregated-steady-state",
    "cubic-sign-law",
    "asymptotic-probes",
)

EXIT_OK, EXIT_ANCHOR, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


@dataclass(frozen=True)
class Measurement:
    """Run length and front sampling; defaults follow the homogeneous protocol."""

    t_end: float = 40.0
    window: tuple[float, float] = (32.0, 40.0)
    cadence: float = 0.5
    level: float = 0.5
    max_length: float = 160.0
    snapshot_times: tuple[float, ...] = ()


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: ModelSpec = field(default_factory=lambda: symmetric_lv(2.0, 1.0))
    grid: Grid1D = Grid1D(40.0, 0.02)
    stepper: StepperConfig = StepperConfig()
    measurement: Measurement = Measurement()
    plan: SweepPlan | None = None
    levels: tuple[float, ...] = DEFAULT_LEVELS
    output_dir: str = "wavespeed-out"
    scenario_name: str | None = None
    scenario: dict = field(default_factory=dict)

    def protocol(self) -> Protocol:
        m = self.measurement
        return Protocol(
            length=self.grid.length, dx=self.grid.dx, dt=self.stepper.dt, t_end=m.t_end, window=m.window,
            cadence=m.cadence, level=m.level, rescaled=self.stepper.rescaled, max_length=m.max_length,
        )


_TOP_KEYS = {"command", "model", "grid", "stepper", "measurement", "plan", "levels",
             "output_dir", "scenario_name", "scenario"}


def _positive(obj: dict, key: str, path: str, default: float) -> float:
    if key not in obj:
        return default
    value = _number(obj[key], f"{path}.{key}")
    if not value > 0:
        raise ConfigError(f"{path}.{key}: {key} must be positive")
    return value


def _floats(value: Any, path: str, length: int | None = None) -> tuple[float, ...]:
    if not isinstance(value, list):
        raise ConfigError(f"{path}: expected a list of numbers")
    out = tuple(_number(v, f"{path}[{i}]") for i, v in enumerate(value))
    if length is not None and len(out) != length:
        raise ConfigError(f"{path}: expected {length} numbers")
    return out


def parse_config(text: str) -> RunConfig:
    """Validated :class:`RunConfig` from JSON text; raises :class:`ConfigError`."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from None
    try:
        return _parse(obj)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def _parse(obj: Any) -> RunConfig:
    _require_keys(obj, {"command"}, _TOP_KEYS - {"command"}, "config")
    command = obj["command"]
    if command not in COMMANDS:
        raise ConfigError(f"command: must be one of {list(COMMANDS)}")

    model = model_from_json(obj["model"], "model") if "model" in obj else symmetric_lv(2.0, 1.0)

    g = obj.get("grid", {})
    _require_keys(g, set(), {"length", "dx"}, "grid")
    grid_length = _positive(g, "length", "grid", 40.0)
    dx = _positive(g, "dx", "grid", 0.02)
    try:
        grid = Grid1D(grid_length, dx)
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None

    s = obj.get("stepper", {})
    _require_keys(s, set(), {"dt", "rescaled", "boundary"}, "stepper")
    dt = _positive(s, "dt", "stepper", 0.02)
    rescaled = s.get("rescaled", True)
    if not isinstance(rescaled, bool):
        raise ConfigError("stepper.rescaled: expected true or false")
    boundary = s.get("boundary", "no-flux")
    if boundary != "no-flux":
        raise ConfigError("stepper.boundary: only 'no-flux' is supported")
    stepper = StepperConfig(dt, rescaled, boundary)

    m = obj.get("measurement", {})
    _require_keys(m, set(), {"t_end", "window", "cadence", "level", "max_length", "snapshot_times"}, "measurement")
    t_end = _positive(m, "t_end", "measurement", 40.0)
    default_window = (0.8 * t_end, t_end)
    window = _floats(m["window"], "measurement.window", 2) if "window" in m else default_window
    if not (0 <= window[0] < window[1] <= t_end):
        raise ConfigError("measurement.window: must satisfy 0 <= t0 < t1 <= t_end")
    level = _number(m.get("level", 0.5), "measurement.level")
    if not 0 < level < 1:
        raise ConfigError("measurement.level: must lie in (0, 1)")
    measurement = Measurement(
        t_end=t_end,
        window=window,
        cadence=_positive(m, "cadence", "measurement", 0.5),
        level=level,
        max_length=_positive(m, "max_length", "measurement", 160.0),
        snapshot_times=_floats(m.get("snapshot_times", []), "measurement.snapshot_times"),
    )

    plan = None
    if "plan" in obj:
        p = obj["plan"]
        _require_keys(p, set(), {"d_range", "k_range", "appendix_protocol"}, "plan")
        kw: dict[str, Any] = {}
        for key in ("d_range", "k_range"):
            if key in p:
                kw[key] = _floats(p[key], f"plan.{key}", 3)
        if "appendix_protocol" in p:
            if not isinstance(p["appendix_protocol"], bool):
                raise ConfigError("plan.appendix_protocol: expected true or false")
            kw["appendix_protocol"] = p["appendix_protocol"]
        try:
            plan = SweepPlan(**kw)
        except ValueError as exc:
            raise ConfigError(f"plan: {exc}") from None
    if command in ("sweep", "contour") and plan is None:
        plan = SweepPlan()
    if command not in ("sweep", "contour") and plan is not None:
        raise ConfigError(f"plan: only allowed for sweep and contour, not {command!r}")

    levels = _floats(obj["levels"], "levels") if "levels" in obj else DEFAULT_LEVELS
    output_dir = obj.get("output_dir", RunConfig.output_dir)
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("output_dir: expected a non-empty path string")

    name = obj.get("scenario_name")
    scenario = obj.get("scenario", {})
    if command == "scenario":
        if name not in SCENARIOS:
            raise ConfigError(f"scenario_name: must be one of {list(SCENARIOS)}")
        if not isinstance(scenario, dict):
            raise ConfigError("scenario: expected an object of scenario parameters")
    elif name is not None or "scenario" in obj:
        raise ConfigError("scenario_name: only allowed with the scenario command")

    cfg = RunConfig(command, model, grid, stepper, measurement, plan, levels, output_dir, name, dict(scenario))
    if command in ("simulate", "speed"):
        try:
            cfg.protocol()
        except ValueError as exc:
            raise ConfigError(f"measurement: {exc}") from None
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    """JSON text that :func:`parse_config` maps back to ``cfg``."""
    m = cfg.measurement
    obj: dict[str, Any] = {
        "command": cfg.command,
        "model": model_to_json(cfg.model),
        "grid": {"length": cfg.grid.length, "dx": cfg.grid.dx},
        "stepper": {"dt": cfg.stepper.dt, "rescaled": cfg.stepper.rescaled, "boundary": cfg.stepper.boundary},
        "measurement": {
            "t_end": m.t_end, "window": list(m.window), "cadence": m.cadence, "level": m.level,
            "max_length": m.max_length, "snapshot_times": list(m.snapshot_times),
        },
        "levels": list(cfg.levels),
        "output_dir": cfg.output_dir,
    }
    if cfg.plan is not None:
        obj["plan"] = {"d_range": list(cfg.plan.d_range), "k_range": list(cfg.plan.k_range),
                       "appendix_protocol": cfg.plan.appendix_protocol}
    if cfg.command == "scenario":
        obj["scenario_name"] = cfg.scenario_name
        obj["scenario"] = cfg.scenario
    return json.dumps(obj, indent=2, sort_keys=True)


# --- commands -----------------------------------------------------------------

def _write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _write_metadata(out: Path, cfg: RunConfig, extra: dict | None = None) -> None:
    meta = {
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "command": cfg.command,
        "config": json.loads(serialize_config(cfg)),
        **(extra or {}),
    }
    _write_json(out / "metadata.json", meta)


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    model, factor = simulation_frame(cfg.model, cfg.stepper.rescaled)
    m = cfg.measurement
    check_stability(model, cfg.stepper)
    stepper = Stepper(model, cfg.grid, cfg.stepper)
    trace = FrontTrace(level=m.level, length=cfg.grid.length, dx=cfg.grid.dx)
    x = cfg.grid.x

    def observe(t, u, v):
        q = t / m.cadence
        if abs(q - round(q)) < 1e-9:
            trace.append(t, locate_front_array(x, v, m.level))

    state = wave_initial_state(cfg.grid)
    written = []
    for t_snap in sorted({t for t in m.snapshot_times if 0 < t < m.t_end} | {m.t_end}):
        state = stepper.run(state, t_snap, observe)
        name = f"snapshot_t{t_snap:g}.csv"
        write_snapshot(out / name, cfg.grid, state)
        written.append(name)
    trace.to_csv(out / "trace.csv")
    _write_metadata(out, cfg, {"speed_factor": factor, "snapshots": written})
    print(f"simulated to t={state.t:g}; wrote {', '.join(written)} and trace.csv")
    return EXIT_OK


def cmd_speed(cfg: RunConfig, out: Path) -> int:
    run = measure_front(cfg.model, cfg.protocol())
    est = run.estimate
    _write_json(out / "speed.json", est.to_json())
    if run.trace is not None:
        run.trace.to_csv(out / "trace.csv")
        write_snapshot(out / "final.csv", run.grid, run.state)
    _write_metadata(out, cfg)
    flags = ",".join(sorted(f.value for f in est.flags)) or "none"
    print(f"speed {est.speed:.6g}  residual {est.residual_rms:.3g}  flags {flags}")
    if Flag.SOLVER_FAILURE in est.flags or Flag.NO_CROSSING in est.flags:
        return EXIT_RUNTIME
    return EXIT_OK


def _progress(done: int, total: int) -> None:
    if done == total or done % max(1, total // 20) == 0:
        print(f"  {done}/{total} cells", file=sys.stderr)


def _emit_plots(grid, levels, out: Path) -> None:
    from .render import emit_heatmap

    contours = extract_contours(grid, levels)
    _write_json(out / "contours.json", contours.to_json())
    emit_heatmap(grid, "pgm", out / "heatmap.pgm")
    emit_heatmap(grid, "svg", out / "heatmap.svg", contours)


def cmd_sweep(cfg: RunConfig, out: Path, workers: int) -> int:
    from .sweep import extended_cells, failed_cells, monotonicity_report

    checkpoint = out / "checkpoint.jsonl"
    result = run_sweep(cfg.plan, workers=workers, checkpoint=checkpoint, progress=_progress)
    result.write_csv(out)
    _emit_plots(result, cfg.levels, out)
    report = monotonicity_report(result)
    failed = failed_cells(result)
    checkpoint.unlink(missing_ok=True)  # finished: the CSVs carry everything
    _write_metadata(out, cfg, {**result.metadata, "monotonicity": report,
                               "failed_cells": len(failed), "extended_cells": extended_cells(result)})
    print(f"{len(result.k_values)}x{len(result.d_values)} sweep in {result.metadata['wall_time_s']:.1f}s; "
          f"failed cells {len(failed)}; monotonicity violations {report['fraction']:.1%}")
    return EXIT_OK


def cmd_contour(cfg: RunConfig, out: Path, workers: int) -> int:
    csv_path = out / "speeds.csv"
    if csv_path.exists():
        grid = SpeedGrid.from_csv(csv_path)
        same = (len(grid.d_values) == len(cfg.plan.d_values) and len(grid.k_values) == len(cfg.plan.k_values)
                and all(abs(a - b) < 1e-9 for a, b in zip(grid.d_values, cfg.plan.d_values))
                and all(abs(a - b) < 1e-9 for a, b in zip(grid.k_values, cfg.plan.k_values)))
        if not same:
            raise ConfigError(f"output_dir: {csv_path} does not match the plan axes")
        _emit_plots(grid, cfg.levels, out)
        _write_metadata(out, cfg, {"source": "speeds.csv"})
        print(f"contours from existing {csv_path}")
        return EXIT_OK
    return cmd_sweep(cfg, out, workers)


def cmd_validate(only: Sequence[str] | None, tolerance: float | None) -> int:
    from .anchors import ANCHORS, format_table, run_anchors

    if only:
        unknown = [i for i in only if i not in ANCHORS]
        if unknown:
            raise ConfigError(f"--only: unknown anchor {unknown[0]!r}; known: {', '.join(ANCHORS)}")
    results = run_anchors(list(only) if only else None, tolerance)
    print(format_table(results))
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} anchor(s) failed: {', '.join(r.anchor_id for r in failed)}")
        return EXIT_ANCHOR
    return EXIT_OK


def _scenario_kwargs(params: dict) -> dict:
    from .scenarios import PatchPlan, Thresholds

    kw = dict(params)
    for key in ("mu", "a"):
        if key in kw:
            kw[key] = field_from_json(kw[key], f"scenario.{key}")
    if "thresholds" in kw:
        _require_keys(kw["thresholds"], set(), {"speed_tol", "pinned_speed", "loser_supnorm"}, "scenario.thresholds")
        kw["thresholds"] = Thresholds(**kw["thresholds"])
    if "plan" in kw:
        kw["plan"] = PatchPlan(**kw["plan"])
    for key in ("u0", "v0"):
        if key in kw:
            import numpy as np

            kw[key] = np.asarray(kw[key], dtype=float)
    return kw


def cmd_scenario(cfg: RunConfig, out: Path) -> int:
    from . import scenarios as sc

    funcs = {
        "periodic-resources": sc.scenario_periodic_resources,
        "oscillating-diffusion": sc.scenario_oscillating_diffusion,
        "dockery-bounded": sc.scenario_dockery_bounded,
        "segregated-steady-state": sc.scenario_segregated_steady_state,
        "cubic-sign-law": sc.scenario_cubic_sign_law,
        "asymptotic-probes": sc.scenario_asymptotic_probes,
    }
    try:
        kw = _scenario_kwargs(cfg.scenario)
        outcome = funcs[cfg.scenario_name](**kw, output_dir=out)
    except TypeError as exc:
        raise ConfigError(f"scenario: {exc}") from None
    outcomes = outcome if isinstance(outcome, list) else [outcome]
    _write_metadata(out, cfg)
    for o in outcomes:
        print(f"{o.name}: {o.classification.value}  " + "  ".join(
            f"{k}={v:.4g}" for k, v in o.measured.items() if isinstance(v, float)))
    return EXIT_OK


# --- entry point ----------------------------------------------------------------

def _workers(arg: int | None) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("WAVESPEED_WORKERS")
    if env is None:
        return os.cpu_count() or 1
    try:
        n = int(env)
    except ValueError:
        raise ConfigError("WAVESPEED_WORKERS: expected a positive integer") from None
    if n < 1:
        raise ConfigError("WAVESPEED_WORKERS: expected a positive integer")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wavespeed", description="Front speeds of competition-diffusion systems.")
    p.add_argument("command", nargs="?", choices=COMMANDS, help="defaults to the command in --config")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--workers", type=int, help="sweep worker processes (default: $WAVESPEED_WORKERS or CPU count)")
    p.add_argument("--output", help="output directory (overrides output_dir)")
    p.add_argument("--only", action="append", help="validate: run only this anchor id (repeatable)")
    p.add_argument("--full-resolution", action="store_true", help="sweep on the fine 201x201 lattice")
    p.add_argument("--tolerance", type=float, help="validate: one tolerance for every anchor")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load_config(args: argparse.Namespace) -> RunConfig:
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"--config: {exc}") from None
        cfg = parse_config(text)
        if args.command and args.command != cfg.command:
            raise ConfigError(f"command: {args.command!r} given but config says {cfg.command!r}")
    elif args.command:
        cfg = parse_config(json.dumps({"command": args.command}))
    else:
        raise ConfigError("command: give a command or --config")
    if args.output:
        cfg = replace(cfg, output_dir=args.output)
    if args.full_resolution:
        if cfg.command not in ("sweep", "contour"):
            raise ConfigError("--full-resolution: only valid for sweep and contour")
        cfg = replace(cfg, plan=SweepPlan.full_resolution())
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers: must be at least 1")
        if args.tolerance is not None and not args.tolerance > 0:
            raise ConfigError("--tolerance: must be positive")
        if cfg.command == "validate":
            return cmd_validate(args.only, args.tolerance)
        workers = _workers(args.workers)
        out = Path(cfg.output_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            probe = out / ".write-test"
            probe.write_text("")
            probe.unlink()
        except OSError as exc:
            raise ConfigError(f"output_dir: not writable ({exc})") from None
        if cfg.command == "simulate":
            return cmd_simulate(cfg, out)
        if cfg.command == "speed":
            return cmd_speed(cfg, out)
        if cfg.command == "sweep":
            return cmd_sweep(cfg, out, workers)
        if cfg.command == "contour":
            return cmd_contour(cfg, out, workers)
        return cmd_scenario(cfg, out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, CheckpointError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        # scenario/model construction problems surfacing after parsing
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
