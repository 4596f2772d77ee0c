import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wavespeed.core import (
    CompetitionKind,
    Constant,
    Grid1D,
    ModelSpec,
    Periodic,
    SineOscillation,
    State,
    evaluate_coefficient,
    field_bounds,
    field_from_json,
    field_to_json,
    model_from_json,
    model_to_json,
    patchy_field,
    periodic_from_function,
    reaction_terms,
    symmetric_lv,
    wave_initial_state,
)

unit = st.floats(0.0, 1.5, allow_nan=False)


def test_constant_ignores_x():
    assert evaluate_coefficient(Constant(1.0), 3.7) == 1.0


def test_sine_oscillation_at_origin():
    assert evaluate_coefficient(SineOscillation(1.0, 0.75, 5), 0.0) == pytest.approx(1.0, abs=1e-15)


def test_sine_oscillation_formula():
    f = SineOscillation(1.0, 0.75, 3)
    x = np.linspace(0, 2, 17)
    np.testing.assert_allclose(f(x), 1 + 0.75 * np.sin(6 * np.pi * x), atol=1e-15)


def test_periodic_wraps_to_midpoint():
    assert evaluate_coefficient(Periodic(1.0, (1.0, 0.0, 1.0)), 1.5) == pytest.approx(0.0, abs=1e-15)


def test_periodic_rejects_mismatched_ends():
    with pytest.raises(ValueError):
        Periodic(1.0, (1.0, 0.0, 0.5))


@given(
    values=st.lists(st.floats(0.1, 5.0), min_size=2, max_size=12),
    period=st.floats(0.1, 20.0),
    x=st.floats(-100.0, 100.0),
)
def test_periodic_field_is_periodic(values, period, x):
    f = Periodic(period, tuple(values + [values[0]]))
    assert f(x) == pytest.approx(f(x + period), abs=1e-12)


def test_periodic_from_function_closes_period():
    f = periodic_from_function(lambda x: 1 + 0.5 * np.sin(2 * np.pi * x), 1.0, 101)
    assert f.values[0] == f.values[-1]
    assert f(0.25) == pytest.approx(1.5, abs=1e-3)


def test_patchy_field_levels_and_ramp():
    dx = 0.1
    f = patchy_field([2.0, 3.0], [1.0, 0.0], dx)
    assert f.period == pytest.approx(5.0)
    assert f(1.0) == 1.0 and f(3.5) == 0.0
    # transition between the two levels happens inside a single cell
    xs = np.linspace(0, 5, 5001)
    inter = xs[(f(xs) > 1e-12) & (f(xs) < 1 - 1e-12)]
    assert inter.size
    assert np.all((np.abs(inter - 2.0) < dx + 1e-9) | (inter > 5 - dx - 1e-9))


def test_field_bounds():
    assert field_bounds(SineOscillation(1.0, -0.75, 2)) == (0.25, 1.75)
    assert field_bounds(Periodic(2.0, (1.0, 3.0, 1.0))) == (1.0, 3.0)


# --- reaction terms -------------------------------------------------------------

def test_reaction_at_semi_extinct_state():
    assert reaction_terms(symmetric_lv(2.0, 1.0), 1.0, 0.0) == (0.0, 0.0)


def test_reaction_at_half_half():
    f, g = reaction_terms(symmetric_lv(2.0, 1.0), 0.5, 0.5)
    assert f == pytest.approx(-0.25) and g == pytest.approx(-0.25)


def test_cubic_reaction_direct_substitution():
    spec = ModelSpec(d_u=Constant(1.0), d_v=Constant(1.0), r=1.0, h=1.0, k=1.0, kind=CompetitionKind.CUBIC)
    f, g = reaction_terms(spec, 1.0, 1.0)
    assert (f, g) == (pytest.approx(-1.0), pytest.approx(-1.0))


def test_cubic_reaction_formula():
    spec = ModelSpec(d_u=Constant(1.0), d_v=Constant(2.0), r=1.3, h=0.7, k=2.1, kind=CompetitionKind.CUBIC)
    u, v = 0.3, 0.6
    f, g = reaction_terms(spec, u, v)
    assert f == pytest.approx(u * (1 - u) - 0.7 * u * v**2)
    assert g == pytest.approx(1.3 * v * (1 - v) - 2.1 * u**2 * v)


def test_alpha_scales_v_loss_only():
    spec = ModelSpec(d_u=Constant(1.0), d_v=Constant(1.0), h=3.0, k=3.0, alpha=0.9)
    f, g = reaction_terms(spec, 0.4, 0.5)
    assert f == pytest.approx(0.4 * 0.6 - 3 * 0.2)
    assert g == pytest.approx(0.5 * 0.5 - 0.9 * 3 * 0.2)


def test_alpha_requires_lotka_volterra():
    with pytest.raises(ValueError):
        ModelSpec(d_u=Constant(1.0), d_v=Constant(1.0), alpha=0.9, kind=CompetitionKind.CUBIC)


def test_mu_and_a_modulate_reaction():
    spec = ModelSpec(d_u=Constant(1.0), d_v=Constant(1.0), h=2.0, k=2.0,
                     mu=Constant(0.5), a=Constant(2.0))
    f, g = reaction_terms(spec, 0.5, 0.25)
    assert f == pytest.approx(0.5 * (0.5 * (2 - 0.5) - 2 * 0.5 * 0.25))
    assert g == pytest.approx(0.5 * (0.25 * (2 - 0.25) - 2 * 0.5 * 0.25))


@pytest.mark.parametrize("k", [0.0, 0.5, 2.0, 10.0])
@pytest.mark.parametrize("kind", list(CompetitionKind))
def test_steady_states_annihilate_reaction(k, kind):
    spec = ModelSpec(d_u=Constant(1.0), d_v=Constant(3.0), r=1.0, h=k, k=k, kind=kind)
    for u, v in ((0, 0), (1, 0), (0, 1)):
        assert reaction_terms(spec, u, v) == (0.0, 0.0)


@given(u=unit, v=unit, k=st.floats(0.0, 50.0))
def test_symmetric_reaction_swaps(u, v, k):
    spec = symmetric_lv(k, 3.0)
    f, g = reaction_terms(spec, u, v)
    f2, g2 = reaction_terms(spec, v, u)
    assert f == pytest.approx(g2, abs=1e-12) and g == pytest.approx(f2, abs=1e-12)


def test_symmetric_lv_shape():
    spec = symmetric_lv(3.0, 4.0)
    assert spec.d == 4.0 and spec.h == spec.k == 3.0 and spec.r == 1.0
    assert spec.d_u == Constant(1.0) and spec.is_homogeneous()


def test_nonpositive_diffusion_rejected():
    with pytest.raises(ValueError):
        ModelSpec(d_u=Constant(1.0), d_v=SineOscillation(1.0, 1.5, 1))


# --- grid and state ----------------------------------------------------------------

def test_grid_nodes():
    g = Grid1D(40.0, 0.02)
    assert g.n == 2001
    assert g.dx * (g.n - 1) == pytest.approx(40.0, rel=1e-12)
    assert g.x[-1] == pytest.approx(40.0)


@pytest.mark.parametrize("length,dx", [(40.0, 0.0), (1.0, 0.5), (1.0, 0.3)])
def test_grid_rejects_bad_sizes(length, dx):
    with pytest.raises(ValueError):
        Grid1D(length, dx)


def test_trapezoid_mass():
    g = Grid1D(2.0, 0.25)
    assert g.mass(np.ones(g.n)) == pytest.approx(2.0)
    assert g.mass(g.x) == pytest.approx(2.0)


def test_state_rejects_negative_and_nan():
    with pytest.raises(ValueError):
        State(0.0, np.array([0.1, -0.1]), np.zeros(2)).check()
    with pytest.raises(ValueError):
        State(0.0, np.array([0.1, math.nan]), np.zeros(2)).check()


def test_wave_initial_state_step():
    g = Grid1D(4.0, 0.5)
    s = wave_initial_state(g)
    assert list(s.u) == [1, 1, 1, 1, 0, 0, 0, 0, 0]
    assert list(s.v) == [0, 0, 0, 0, 1, 1, 1, 1, 1]


# --- JSON -------------------------------------------------------------------------------

@pytest.mark.parametrize("field", [Constant(2.5), Periodic(2.0, (1.0, 3.0, 1.0)), SineOscillation(1.0, 0.75, 4)])
def test_field_json_round_trip(field):
    assert field_from_json(json.loads(json.dumps(field_to_json(field)))) == field


def test_model_json_round_trip():
    spec = ModelSpec(d_u=Constant(1.0), d_v=SineOscillation(1.0, 0.75, 2), r=1.2, h=1.5, k=2.0, alpha=0.9,
                     mu=Periodic(1.0, (1.0, 0.5, 1.0)))
    assert model_from_json(json.loads(json.dumps(model_to_json(spec)))) == spec


def test_model_json_shorthand():
    spec = model_from_json({"k": 2, "d": 4})
    assert spec == symmetric_lv(2.0, 4.0)


def test_model_json_errors_name_the_path():
    with pytest.raises(ValueError, match=r"model: unknown key"):
        model_from_json({"k": 2, "bogus": 1})
    with pytest.raises(ValueError, match=r"model\.k"):
        model_from_json({"k": "two"})
    with pytest.raises(ValueError, match=r"model\.mu"):
        model_from_json({"mu": {"triangle": 1}})
