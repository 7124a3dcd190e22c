import math

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from delaylqg import matrixcore as mc
from delaylqg.errors import DivergingCostError, SynthesisError
from delaylqg.lqgsynth import (
    control_residual, delay_free_cost, filter_residual, solve_control_riccati,
    solve_filter_riccati, synthesize, uncontrolled_cost,
)
from delaylqg.plantmodel import (
    build_synthesis_model, check_assumptions, preset_damped_cavity, preset_harmonic, synthesis_model_from_matrices,
)

angles = st.floats(0, 2 * math.pi).filter(lambda p: abs(math.cos(p)) > 1e-2)


def _hurwitz(M):
    return mc.spectral_abscissa(M) < 0


@settings(max_examples=40, deadline=None)
@given(angles, st.sampled_from(["cavity", "harmonic", "unstable"]))
def test_riccati_residuals_and_stability(phi, which):
    if which == "unstable":
        m = synthesis_model_from_matrices(
            A=[[1.0, 1.0], [0.0, -3.0]], B1=np.eye(2), B2=[[0.0], [1.0]],
            C2=[[2 * math.cos(phi), 2 * math.sin(phi)]],
            S=[[1.0, math.sin(phi)], [math.sin(phi), 1.0]], phi=phi)
    else:
        plant = {"cavity": preset_damped_cavity(0.5, 1.0),
                 "harmonic": preset_harmonic(1.0, 1.0)}[which]
        m = build_synthesis_model(plant, phi)
    X, F = solve_control_riccati(m)
    Y, L = solve_filter_riccati(m)
    assert np.max(np.abs(control_residual(m, X, F))) <= 1e-9
    assert np.max(np.abs(filter_residual(m, Y, L))) <= 1e-9
    assert _hurwitz(m.A + m.B2 @ F) and _hurwitz(m.A + L @ m.C2)
    assert np.array_equal(X, X.T) and np.array_equal(Y, Y.T)
    assert np.min(np.linalg.eigvalsh(X)) > -1e-12 and np.min(np.linalg.eigvalsh(Y)) > -1e-12


def test_control_solution_independent_of_angle(cavity):
    X1, F1 = solve_control_riccati(build_synthesis_model(cavity, 0.5))
    X2, F2 = solve_control_riccati(build_synthesis_model(cavity, 1.98))
    np.testing.assert_allclose(X1, X2, atol=1e-12)
    np.testing.assert_allclose(F1, F2, atol=1e-12)


@pytest.mark.parametrize("phi", np.linspace(-1.4, 1.4, 9))
def test_harmonic_filter_identities(phi):
    m_, w = 1.0, 1.0
    model = build_synthesis_model(preset_harmonic(m_, w), phi)
    Y, L = solve_filter_riccati(model)
    l1, l2 = L.ravel()
    assert l1 ** 2 + (l2 / (m_ * w)) ** 2 == pytest.approx(1 / (m_ * w) ** 2, abs=1e-9)
    y11, y12 = Y[0, 0], Y[0, 1]
    c, s = math.cos(phi), math.sin(phi)
    assert 4 * c * c * y12 ** 2 + (2 * m_ * w * w - 2 * math.sin(2 * phi)) * y12 \
        + s * s - 1 == pytest.approx(0, abs=1e-9)
    assert 2 * m_ * c * c * y11 ** 2 - y12 == pytest.approx(0, abs=1e-9)


def test_harmonic_unit_gain_other_parameters():
    model = build_synthesis_model(preset_harmonic(2.0, 3.0), 0.4)
    _, L = solve_filter_riccati(model)
    l1, l2 = L.ravel()
    assert l1 ** 2 + (l2 / 6.0) ** 2 == pytest.approx(1 / 36.0, abs=1e-9)


def test_delay_free_cost_cases(cavity, cavity_model, cavity_gains):
    g = cavity_gains
    assert g.J0 == pytest.approx(1.2110285, abs=1e-7)
    assert g.J0 < 4 / 3
    zero_F = np.zeros_like(g.F)
    assert delay_free_cost(cavity_model, g.X, g.Y, zero_F) == pytest.approx(
        np.trace(cavity_model.noise_drive @ g.X), rel=1e-15)
    lo = synthesize(build_synthesis_model(cavity, 1.88)).J0
    hi = synthesize(build_synthesis_model(cavity, 2.08)).J0
    assert lo > g.J0 - 1e-4 and hi > g.J0 - 1e-4


@pytest.mark.parametrize("phi", [0.0, 0.7, 1.98, 2.9, 4.0])
def test_uncontrolled_cost(cavity, phi):
    assert uncontrolled_cost(build_synthesis_model(cavity, phi)) == pytest.approx(4 / 3, abs=1e-12)


def test_uncontrolled_cost_errors_and_zero_weight(harmonic, cavity):
    with pytest.raises(DivergingCostError):
        uncontrolled_cost(build_synthesis_model(harmonic, 0.0))
    m = build_synthesis_model(cavity, 1.0, C1=np.zeros((2, 2)))
    assert uncontrolled_cost(m) == 0.0


def test_synthesis_error_for_unstabilizable():
    # gamma > delta^2 makes the first quadrature unstable and unreachable from B2
    m = build_synthesis_model(preset_damped_cavity(2.0, 1.0), 0.3)
    assert not check_assumptions(m).stabilizable
    with pytest.raises(SynthesisError):
        solve_control_riccati(m)

    m = synthesis_model_from_matrices(
        A=[[1.0, 0.0], [0.0, -1.0]], B1=np.eye(2), B2=[[0.0], [1.0]],
        C2=[[1.0, 1.0]], S=np.eye(2), phi=0.0)
    with pytest.raises(SynthesisError):
        solve_control_riccati(m)
