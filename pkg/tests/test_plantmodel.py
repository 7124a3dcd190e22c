import json
import math

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from delaylqg.errors import DomainError, SingularAngleError
from delaylqg.plantmodel import (
    PlantSpec, SynthesisModel, build_synthesis_model, check_assumptions,
    classify_stability, preset_damped_cavity, preset_harmonic,
)

SIGMA = np.array([[0.0, 1.0], [-1.0, 0.0]])
angles = st.floats(0, 2 * math.pi).filter(
    lambda p: abs(math.cos(p)) > 1e-3)


def test_cavity_matrices(cavity):
    assert np.array_equal(cavity.G, [[0, 0.5], [0.5, 0]])
    assert np.array_equal(cavity.C, [1, 1j])
    assert np.array_equal(cavity.B, [0, 1])
    m = build_synthesis_model(cavity, 1.98)
    np.testing.assert_allclose(m.A, np.diag([-0.5, -1.5]), atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(angles)
def test_cavity_output_row(phi):
    m = build_synthesis_model(preset_damped_cavity(), phi)
    np.testing.assert_allclose(m.C2, [[2 * math.cos(phi), 2 * math.sin(phi)]], atol=1e-14)
    assert m.C2.dtype == float
    assert m.E2 == 1.0
    np.testing.assert_array_equal(m.D21, [[1.0, 0.0]])


def test_harmonic_matrices(harmonic):
    m = build_synthesis_model(harmonic, 0.0)
    np.testing.assert_allclose(m.A, SIGMA, atol=1e-15)
    np.testing.assert_allclose(m.B1, [[0, 0], [0, -1]], atol=1e-15)
    p = preset_harmonic(2.0, 3.0)
    np.testing.assert_allclose(p.A, [[0, 0.5], [-18, 0]])
    ev = np.linalg.eigvals(p.A)
    np.testing.assert_allclose(sorted(ev.imag), [-3, 3])
    assert np.all(np.conj(p.C) @ np.diag([1, 1]) @ p.C.imag == 0)


@settings(max_examples=50, deadline=None)
@given(angles)
def test_noise_drive_is_angle_invariant(phi):
    cav = build_synthesis_model(preset_damped_cavity(0.5, 1.0), phi)
    np.testing.assert_allclose(cav.noise_drive, np.eye(2), atol=1e-10)
    osc = build_synthesis_model(preset_harmonic(), phi)
    np.testing.assert_allclose(osc.noise_drive, np.diag([0.0, 1.0]), atol=1e-10)


def test_singular_angles_rejected(cavity):
    for phi in (math.pi / 2, 3 * math.pi / 2, math.pi / 2 + 5e-7, -math.pi / 2):
        with pytest.raises(SingularAngleError):
            build_synthesis_model(cavity, phi)


def test_plant_validation():
    with pytest.raises(DomainError):
        PlantSpec(G=np.array([[0, 1.0], [0, 0]]), C=np.array([1, 1j]), B=np.array([0, 1.0]))
    for bad in ((0.0, 1.0), (-1.0, 1.0), (1.0, 0.0)):
        with pytest.raises(DomainError):
            preset_damped_cavity(*bad)
        with pytest.raises(DomainError):
            preset_harmonic(*bad)


def test_stability_classes():
    assert classify_stability(preset_damped_cavity(0.5, 1.0).A) == "stable"
    assert classify_stability(SIGMA) == "marginal"
    assert classify_stability(np.diag([1.0, -3.0])) == "unstable"
    unstable = preset_damped_cavity(2.0, 1.0)
    np.testing.assert_allclose(unstable.A, np.diag([1.0, -3.0]), atol=1e-15)
    assert classify_stability(unstable.A) == "unstable"
    assert classify_stability(preset_damped_cavity(1.0, 1.0).A) == "marginal"


def test_assumptions(cavity, harmonic):
    assert check_assumptions(build_synthesis_model(cavity, 1.98)).passed
    assert check_assumptions(build_synthesis_model(harmonic, 0.0)).passed
    m = build_synthesis_model(harmonic, 0.0)
    m.C2 = np.zeros((1, 2))
    rep = check_assumptions(m)
    assert not rep.detectable and not rep.passed
    assert rep.stabilizable


def test_json_round_trip(cavity):
    p = PlantSpec.from_dict(json.loads(json.dumps(cavity.to_dict())))
    assert np.array_equal(p.C, cavity.C) and np.array_equal(p.G, cavity.G)
    m = build_synthesis_model(cavity, 0.7)
    m2 = SynthesisModel.from_dict(json.loads(json.dumps(m.to_dict())))
    for k in ("A", "B1", "B2", "C1", "C2", "D12", "D21", "S_phi"):
        np.testing.assert_array_equal(getattr(m2, k), getattr(m, k))
    assert m2.E1 == m.E1 == 2.0
