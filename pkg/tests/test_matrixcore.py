import math

from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
import mpmath
import numpy as np
import pytest

from delaylqg import matrixcore as mc
from delaylqg.errors import (
    DimensionError, DomainError, ResonanceError, UnsupportedDimensionError,
)

SIGMA = np.array([[0.0, 1.0], [-1.0, 0.0]])

small = st.floats(-3, 3, allow_nan=False, allow_infinity=False)
mat2 = arrays(np.float64, (2, 2), elements=small)
mat3 = arrays(np.float64, (3, 3), elements=small)


def mp_expm(M):
    mpmath.mp.dps = 40
    E = mpmath.expm(mpmath.matrix(M.tolist()))
    return np.array(E.tolist(), dtype=float)


def series_expm(M, terms=60):
    out = np.eye(len(M))
    term = np.eye(len(M))
    for k in range(1, terms):
        term = term @ M / k
        out = out + term
    return out


def test_expm_zero_is_identity():
    assert np.array_equal(mc.expm(np.zeros((2, 2))), np.eye(2))


@pytest.mark.parametrize("t", [0.0, 0.3, 1.0, 7.5, 40.0])
def test_expm_diagonal(t):
    E = mc.expm(np.diag([-0.5, -1.5]) * t)
    ref = np.diag([math.exp(-0.5 * t), math.exp(-1.5 * t)])
    np.testing.assert_allclose(E, ref, rtol=1e-13, atol=1e-300)


def test_expm_rotation_against_series():
    t = 0.3
    E = mc.expm(SIGMA * t)
    rot = np.array([[math.cos(t), math.sin(t)], [-math.sin(t), math.cos(t)]])
    np.testing.assert_allclose(E, rot, atol=1e-15)
    np.testing.assert_allclose(E, series_expm(SIGMA * t), atol=1e-15)


@pytest.mark.parametrize("seed", range(6))
def test_expm_matches_high_precision(seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(3, 3)) * (1 + 2 * seed)
    E = mc.expm(M)
    ref = mp_expm(M)
    assert np.max(np.abs(E - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))


def test_expm_rejects_bad_input():
    with pytest.raises(DimensionError):
        mc.expm(np.zeros((2, 3)))
    with pytest.raises(DomainError):
        mc.expm(np.array([[np.nan, 0.0], [0.0, 1.0]]))


@settings(max_examples=60, deadline=None)
@given(mat3, st.floats(-1, 1), st.floats(-1, 1))
def test_expm_semigroup(M, s, t):
    lhs = mc.expm(M * (s + t))
    rhs = mc.expm(M * s) @ mc.expm(M * t)
    scale = max(1.0, np.max(np.abs(lhs)))
    assert np.max(np.abs(lhs - rhs)) <= 1e-11 * scale


@settings(max_examples=60, deadline=None)
@given(mat3)
def test_expm_determinant_is_exp_trace(M):
    assert math.isclose(np.linalg.det(mc.expm(M)), math.exp(np.trace(M)), rel_tol=1e-10)


@settings(max_examples=40, deadline=None)
@given(mat2, st.floats(-1, 1))
def test_expm_derivative(M, t):
    eps = 1e-5
    fd = (mc.expm(M * (t + eps)) - mc.expm(M * (t - eps))) / (2 * eps)
    exact = M @ mc.expm(M * t)
    assert np.max(np.abs(fd - exact)) <= 1e-6 * max(1.0, np.max(np.abs(exact)))


def test_eigenvalues_examples():
    np.testing.assert_allclose(mc.eigenvalues(np.diag([-0.5, -1.5])), [-1.5, -0.5])
    ev = mc.eigenvalues(SIGMA)
    np.testing.assert_allclose(sorted(ev, key=lambda z: z.imag), [-1j, 1j], atol=1e-14)
    np.testing.assert_allclose(mc.eigenvalues(np.array([[1.0, 0.0], [0.0, -3.0]])), [-3, 1])


def test_eigenvalues_rejects_large():
    with pytest.raises(UnsupportedDimensionError):
        mc.eigenvalues(np.eye(5))


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: arrays(np.float64, (n, n), elements=small)))
def test_eigenvalues_against_charpoly_invariants(M):
    ev = np.array(mc.eigenvalues(M))
    assert abs(ev.sum() - np.trace(M)) <= 1e-8 * max(1.0, np.abs(M).sum())
    assert abs(np.prod(ev) - np.linalg.det(M)) <= 1e-6 * max(1.0, np.abs(M).sum()) ** len(M)
    # real input: spectrum closed under conjugation
    np.testing.assert_allclose(np.sort_complex(ev), np.sort_complex(ev.conj()), atol=1e-6)


def test_lyapunov_examples():
    P = mc.solve_lyapunov(np.diag([-0.5, -1.5]), np.eye(2))
    np.testing.assert_allclose(P, np.diag([1.0, 1 / 3]), atol=1e-15)
    assert np.array_equal(mc.solve_lyapunov(-np.eye(2), np.zeros((2, 2))), np.zeros((2, 2)))


def test_lyapunov_resonance_names_pair():
    with pytest.raises(ResonanceError) as exc:
        mc.solve_lyapunov(SIGMA, np.eye(2))
    lam_i, lam_j = exc.value.pair
    assert abs(lam_i + lam_j) < 1e-12


@settings(max_examples=60, deadline=None)
@given(mat3, mat3)
def test_lyapunov_residual(M, R):
    A = M - (np.max(np.abs(np.linalg.eigvals(M).real)) + 0.5) * np.eye(3)
    Q = R @ R.T
    P = mc.solve_lyapunov(A, Q)
    assert np.array_equal(P, P.T)
    res = A @ P + P @ A.T + Q
    assert np.max(np.abs(res)) <= 1e-9 * max(1.0, np.max(np.abs(Q)))
    assert np.min(np.linalg.eigvalsh(P)) >= -1e-9 * max(1.0, np.max(np.abs(P)))


def test_gramian_trivial_cases():
    A = np.array([[0.3, 1.0], [-2.0, 0.1]])
    assert np.array_equal(mc.finite_horizon_gramian(A, np.eye(2), 0.0), np.zeros((2, 2)))
    np.testing.assert_allclose(mc.finite_horizon_gramian(np.zeros((2, 2)), np.eye(2), 2.0),
                               2 * np.eye(2), atol=1e-15)
    with pytest.raises(DomainError):
        mc.finite_horizon_gramian(A, np.eye(2), -1.0)


def _diag_gramian(a, w, h):
    return np.diag([wi * (math.exp(2 * ai * h) - 1) / (2 * ai) for ai, wi in zip(a, w)])


@pytest.mark.parametrize("h", [0.1, 1.0, 10.0, 40.0])
def test_gramian_diagonal_closed_form(h):
    a, w = (-0.5, -1.5), (1.0, 1.0)
    G = mc.finite_horizon_gramian(np.diag(a), np.diag(w), h)
    np.testing.assert_allclose(G, _diag_gramian(a, w, h), rtol=1e-13, atol=1e-300)


def test_gramian_matches_simpson():
    A, W = np.diag([-0.5, -1.5]), np.eye(2)
    G = mc.finite_horizon_gramian(A, W, 1.0)
    Q = mc.gramian_quadrature(A, W, 1.0)
    ref = _diag_gramian((-0.5, -1.5), (1, 1), 1.0)
    np.testing.assert_allclose(Q, ref, atol=1e-12)
    np.testing.assert_allclose(G, Q, atol=1e-12)


def test_gramian_tends_to_lyapunov_solution():
    A = np.array([[-0.2, 1.0], [-1.0, -0.3]])
    W = np.array([[1.0, 0.2], [0.2, 0.5]])
    np.testing.assert_allclose(mc.finite_horizon_gramian(A, W, 300.0),
                               mc.solve_lyapunov(A, W), rtol=1e-10)


@settings(max_examples=40, deadline=None)
@given(mat2, st.floats(0.01, 5), st.floats(0.01, 5))
def test_gramian_monotone_and_additive(M, h1, dh):
    W = np.eye(2)
    G1 = mc.finite_horizon_gramian(M, W, h1)
    G2 = mc.finite_horizon_gramian(M, W, h1 + dh)
    scale = max(1.0, np.max(np.abs(G2)))
    assert np.min(np.linalg.eigvalsh(G2 - G1)) >= -1e-10 * scale
    # G(h1 + dh) = G(h1) + e^{A h1} G(dh) e^{A^T h1}
    E = mc.expm(M * h1)
    rhs = G1 + E @ mc.finite_horizon_gramian(M, W, dh) @ E.T
    assert np.max(np.abs(G2 - rhs)) <= 1e-9 * scale


def test_adaptive_simpson_scalar_and_array():
    assert math.isclose(mc.adaptive_simpson(math.sin, 0.0, math.pi), 2.0, rel_tol=1e-11)
    val = mc.adaptive_simpson(lambda t: np.array([math.exp(t), t ** 3]), 0.0, 1.0)
    np.testing.assert_allclose(val, [math.e - 1, 0.25], rtol=1e-11)


def test_spectral_abscissa():
    assert mc.spectral_abscissa(np.diag([-0.5, -1.5])) == pytest.approx(-0.5)
    assert mc.spectral_abscissa(SIGMA) == pytest.approx(0.0, abs=1e-14)
