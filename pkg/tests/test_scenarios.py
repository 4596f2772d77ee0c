import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from wavespeed.core import Constant, Grid1D, ModelSpec, State, periodic_from_function
from wavespeed.scenarios import (
    Classification,
    PatchPlan,
    Thresholds,
    classify_speed,
    ma_huang_ou_region,
    scenario_asymptotic_probes,
    scenario_cubic_sign_law,
    scenario_dockery_bounded,
    scenario_oscillating_diffusion,
    scenario_periodic_resources,
    scenario_segregated_steady_state,
)
from wavespeed.stepper import Stepper, StepperConfig


def _sine_mu(amplitude=0.5, period=1.0):
    return periodic_from_function(lambda x: 1 + amplitude * np.sin(2 * np.pi * x / period), period, 101)


def _dockery_growth():
    return periodic_from_function(lambda x: 1 + 0.5 * np.sin(2 * np.pi * x / 10), 10.0, 201)


def test_classify_speed_thresholds():
    th = Thresholds()
    assert classify_speed(-0.01, th) is Classification.V_INVADES
    assert classify_speed(0.01, th) is Classification.U_INVADES
    assert classify_speed(5e-4, th) is Classification.PINNED


# --- periodic resources ------------------------------------------------------------

def test_periodic_resources_homogeneous_limit():
    out = scenario_periodic_resources(4.0, 100.0, Constant(1.0))
    assert out.measured["speed"] < -1e-3
    assert out.classification is Classification.V_INVADES


def test_periodic_resources_symmetric_is_pinned():
    out = scenario_periodic_resources(1.0, 100.0, _sine_mu())
    assert abs(out.measured["speed"]) < 1e-3
    assert out.classification is Classification.PINNED


def test_periodic_resources_invasion_confirmed_at_double_resolution(tmp_path):
    coarse = scenario_periodic_resources(10.0, 100.0, _sine_mu(), output_dir=tmp_path)
    fine = scenario_periodic_resources(10.0, 100.0, _sine_mu(), dx=0.01)
    assert coarse.measured["speed"] < 0 and fine.measured["speed"] < 0
    assert coarse.measured["speed"] == pytest.approx(fine.measured["speed"], abs=0.01)
    assert coarse.classification is Classification.V_INVADES
    saved = json.loads((tmp_path / "periodic-resources.json").read_text())
    assert saved["classification"] == "VInvades"
    assert coarse.artifacts and all(Path(p).exists() for p in coarse.artifacts)


def test_periodic_resources_needs_positive_mu():
    with pytest.raises(ValueError):
        scenario_periodic_resources(2.0, 100.0, _sine_mu(amplitude=1.5))


# --- oscillating diffusion -------------------------------------------------------------

def test_uniform_diffusion_with_alpha_advantage_v_invades():
    out = scenario_oscillating_diffusion(10.0, None, 0.9)
    assert out.measured["speed"] < -1e-3
    assert out.classification is Classification.V_INVADES


def test_full_symmetry_gives_zero_speed():
    out = scenario_oscillating_diffusion(10.0, None, 1.0)
    assert abs(out.measured["speed"]) < 1e-3


def test_oscillation_reverses_invasion_and_sign_is_resolution_stable():
    out = scenario_oscillating_diffusion(40.0, 20, 0.9)
    assert out.measured["baseline_speed"] < 0
    assert out.measured["reversal"] == 1.0 and out.measured["speed"] > 0
    fine = scenario_oscillating_diffusion(40.0, 20, 0.9, dx=out.params["dx"] / 2, baseline=False)
    assert math.copysign(1, fine.measured["speed"]) == math.copysign(1, out.measured["speed"])


# --- Dockery ---------------------------------------------------------------------------

def test_dockery_slow_u_wins():
    out = scenario_dockery_bounded(_dockery_growth(), 2.0)
    assert out.classification is Classification.U_INVADES
    assert out.measured["v_sup"] < 0.01 and out.measured["u_sup"] > 0.5


def test_dockery_slow_v_wins():
    out = scenario_dockery_bounded(_dockery_growth(), 0.5)
    assert out.classification is Classification.V_INVADES
    assert out.measured["u_sup"] < 0.01


def test_dockery_identical_data_stay_identical():
    g = Grid1D(10.0, 0.05)
    u0 = 0.3 + 0.2 * np.cos(g.x)
    out = scenario_dockery_bounded(_dockery_growth(), 1.0, u0=u0, v0=u0.copy(), t_max=200)
    assert out.measured["max_abs_u_minus_v"] == 0.0


def test_dockery_requires_heterogeneity():
    with pytest.raises(ValueError):
        scenario_dockery_bounded(Constant(1.0), 2.0)


# --- segregated steady state ------------------------------------------------------------

def test_segregated_state_is_stable(tmp_path):
    out = scenario_segregated_steady_state(output_dir=tmp_path)
    m = out.measured
    assert out.classification is Classification.PINNED
    assert m["residual"] < 1e-4 and m["survives"] == 1.0
    assert m["drift"] < 0.1 * m["perturbation"]

    # oracle: continue from the settled profile with half the time step; the residual keeps shrinking
    rows = list(csv.reader(open(tmp_path / "segregated-steady-state_settled.csv")))[1:]
    x, u, v = (np.array([float(r[c]) for r in rows]) for c in range(3))
    plan = PatchPlan()
    dx = out.params["dx"]
    spec = ModelSpec(d_u=Constant(1.0), d_v=Constant(1.0), h=200.0, k=200.0, mu=plan.mu(dx))
    dt = out.params["dt"] / 2
    stepper = Stepper(spec, Grid1D(plan.length, dx), StepperConfig(dt=dt, rescaled=False))

    def residual(s):
        n = stepper.step(s)
        return max(np.max(np.abs(n.u - s.u)), np.max(np.abs(n.v - s.v))) / dt

    s = State(0.0, u, v)
    r0 = residual(s)
    s = stepper.run(s, 50.0)
    assert residual(s) < max(r0, 1e-4) and residual(s) < 1e-4


def test_no_competition_mixes():
    out = scenario_segregated_steady_state(k=0.0, t_settle=200)
    assert out.measured["mixed"] == 1.0 and out.measured["segregated"] == 0.0
    assert out.classification is Classification.COEXISTENCE


def test_single_patch_is_inconclusive():
    out = scenario_segregated_steady_state(PatchPlan(n_patches=1))
    assert out.classification is Classification.INCONCLUSIVE


# --- cubic competition ----------------------------------------------------------------------

def test_cubic_positive_sign():
    out = scenario_cubic_sign_law(1.0, 1.0, 2.0, 3.0)
    assert out.measured["speed"] > 1e-3 and out.measured["expected_sign"] == 1.0


@pytest.mark.parametrize("d", [1.0, 2.5])
def test_cubic_balanced_is_zero(d):
    out = scenario_cubic_sign_law(1.0, 2.0, 2.0, d)
    assert abs(out.measured["speed"]) < 1e-3


def test_cubic_sign_independent_of_d():
    out = scenario_cubic_sign_law(2.0, 1.0, 1.0, 1.0, d_alt=5.0)
    assert out.measured["speed"] < -1e-3 and out.measured["speed_alt"] < -1e-3
    assert out.measured["sign_consistent"] == 1.0


def test_scenario_rerun_is_byte_identical(tmp_path):
    a = scenario_cubic_sign_law(1.25, 1.6, 3.0, 2.0, output_dir=tmp_path / "a")
    b = scenario_cubic_sign_law(1.25, 1.6, 3.0, 2.0, output_dir=tmp_path / "b")
    assert json.dumps(a.measured) == json.dumps(b.measured)
    for name in ("cubic-sign-law.json", "cubic-sign-law_trace.csv", "cubic-sign-law_final.csv"):
        assert (tmp_path / "a" / name).read_bytes().replace(b"/a/", b"/b/") == \
            (tmp_path / "b" / name).read_bytes()


# --- asymptotic ladders ---------------------------------------------------------------------

def test_ma_huang_ou_endpoints():
    (lo1, hi1), (lo2, hi2) = ma_huang_ou_region(1.8)
    assert (lo1, hi1, lo2, hi2) == (4.0, pytest.approx(4.5), pytest.approx(4.5), pytest.approx(5.0))
    assert ma_huang_ou_region(1.5) == []


BRACKET_TOL = 0.05


def _inside(o):
    """Strictly inside the bracket, with the measurement tolerance kept clear of both ends."""
    m = o.measured
    return m["lower"] + BRACKET_TOL < m["checked"] < m["upper"] - BRACKET_TOL


def test_large_d_ladder():
    for o in scenario_asymptotic_probes("large-d", [10.0, 30.0, 100.0], 2.0):
        assert _inside(o) and o.measured["in_bracket"] == 1.0


def test_large_k_ladder():
    for o in scenario_asymptotic_probes("large-k", [10.0, 100.0], 4.0):
        assert _inside(o) and o.measured["in_bracket"] == 1.0


@pytest.mark.slow
def test_large_k_ladder_far_point():
    (o,) = scenario_asymptotic_probes("large-k", [1000.0], 4.0)
    assert _inside(o)


def test_ma_huang_ou_probe():
    (o,) = scenario_asymptotic_probes("ma-huang-ou", [4.3], 1.8)
    assert o.measured["speed"] < 0
    with pytest.raises(ValueError):
        scenario_asymptotic_probes("ma-huang-ou", [5.2], 1.8)


def test_near_blind_probe_reports_sign():
    (o,) = scenario_asymptotic_probes("near-blind", [0.05], 0.5 ** 0.5)
    assert o.params["k"] == pytest.approx(1.5) and o.params["d"] == pytest.approx(1.05)
    assert o.measured["speed"] < 0


def test_unknown_regime():
    with pytest.raises(ValueError):
        scenario_asymptotic_probes("tiny-d", [1.0], 1.0)
