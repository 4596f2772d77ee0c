import math

import pytest

from wavespeed.core import Constant, ModelSpec, symmetric_lv
from wavespeed.frontspeed import Flag
from wavespeed.simulate import Protocol, fit_dt, measure_front, measure_speed, simulation_frame, track_front
from wavespeed.stepper import StepperConfig


def test_protocol_defaults():
    p = Protocol()
    assert (p.length, p.dx, p.dt, p.t_end, p.window, p.cadence, p.level) == (
        40.0, 0.02, 0.02, 40.0, (32.0, 40.0), 0.5, 0.5)
    assert p.interface == 20.0 and p.rescaled


@pytest.mark.parametrize("kw", [{"window": (30, 50)}, {"cadence": 0.03}, {"dx": 0.0}])
def test_protocol_validation(kw):
    with pytest.raises(ValueError):
        Protocol(**kw)


@pytest.mark.parametrize("dt_max,cadence", [(0.02, 0.5), (0.003, 0.5), (0.0007, 0.1), (1.0, 0.5)])
def test_fit_dt_divides_cadence(dt_max, cadence):
    dt = fit_dt(dt_max, cadence)
    assert dt <= dt_max + 1e-15
    assert cadence / dt == pytest.approx(round(cadence / dt), abs=1e-9)


def test_trace_cadence_and_window():
    spec, _ = simulation_frame(symmetric_lv(2.0, 4.0), True)
    p = Protocol()
    _, tr = track_front(spec, p.grid, StepperConfig(0.02), 40.0, 0.5, t_record=32.0)
    assert len(tr.times) == 17
    assert tr.times[0] == pytest.approx(32.0) and tr.times[-1] == pytest.approx(40.0)


def test_zero_speed_at_equal_diffusion():
    est = measure_speed(symmetric_lv(2.0, 1.0))
    assert abs(est.speed) < 1e-6 and est.ok


def test_rescaled_and_unscaled_frames_agree():
    a = measure_speed(symmetric_lv(2.0, 4.0))
    b = measure_speed(symmetric_lv(2.0, 4.0), Protocol(rescaled=False, length=80.0, dx=0.04))
    assert a.speed == pytest.approx(b.speed, abs=5e-3)


def test_domain_escape_guard_extends_domain():
    # short domain, fast front: the guard doubles the domain until the margin is respected
    est = measure_speed(symmetric_lv(2.0, 20.0), Protocol(length=10.0, max_length=40.0))
    assert Flag.DOMAIN_EXTENDED in est.flags
    assert est.domain_length > 10.0
    off = measure_speed(symmetric_lv(2.0, 20.0), Protocol(length=10.0), guard=False)
    assert Flag.DOMAIN_EXTENDED not in off.flags and not off.ok


def test_solver_failure_becomes_flag():
    spec = ModelSpec(d_u=Constant(1.0), d_v=Constant(1.0), h=500.0, k=500.0)
    with pytest.warns(UserWarning):
        run = measure_front(spec, Protocol(dt=0.5, cadence=0.5, t_end=20, window=(10, 20)))
    assert Flag.SOLVER_FAILURE in run.estimate.flags
    assert math.isnan(run.estimate.speed) and run.state is None
