"""
Delay-free LQG synthesis: the two algebraic Riccati equations and the costs.

Control side::

    X A + A^T X + C1^T C1 - F^T E1 F = 0,   F = -E1^-1 (B2^T X + D12^T C1)

Filter side::

    Y A^T + A Y + B1 S B1^T - L E2 L^T = 0,  L = -(Y C2^T + B1 S D21^T) E2^-1

Both are solved through the stable invariant subspace of the 4x4 Hamiltonian
and then polished with Newton (Kleinman) steps.
"""

from dataclasses import dataclass

import numpy as np

from . import matrixcore as mc
from .errors import DivergingCostError, ResonanceError, SynthesisError
from .plantmodel import classify_stability, control_hamiltonian

RESIDUAL_TOL = 1e-9
_NEWTON_STEPS = 4


@dataclass(frozen=True)
class GainSet:
    X: np.ndarray
    Y: np.ndarray
    F: np.ndarray
    L: np.ndarray
    J0: float
    J_unc: float = float("nan")

    def to_dict(self):
        return {
            "X": self.X.tolist(), "Y": self.Y.tolist(),
            "F": self.F.tolist(), "L": self.L.tolist(),
            "J0": self.J0, "J_unc": None if np.isnan(self.J_unc) else self.J_unc,
        }


def _care_residual(A, B, Q, N, R, X):
    K = np.linalg.solve(np.atleast_2d(R), B.T @ X + N.T)
    return A.T @ X + X @ A + Q - (X @ B + N) @ K


def _stable_subspace(H):
    """Basis ``[U1; U2]`` of the stable invariant subspace of a 2n x 2n Hamiltonian."""
    m = H.shape[0]
    n = m // 2
    lams = mc.eigenvalues(H)
    scale = max(1.0, np.linalg.norm(H, 1))
    if any(abs(z.real) <= 1e-8 * scale for z in lams):
        raise SynthesisError("Hamiltonian has eigenvalues on the imaginary axis")
    stable = [z for z in lams if z.real < 0]
    unstable = [z for z in lams if z.real > 0]
    if len(stable) != n:
        raise SynthesisError("Hamiltonian spectrum is not split evenly")

    distinct = all(abs(stable[i] - stable[j]) > 1e-6 * scale
                   for i in range(n) for j in range(i + 1, n))
    if distinct:
        U = np.column_stack([mc.eigvec(H, z)[1] for z in stable])
        if np.linalg.cond(U[:n]) < 1e10:
            return U
    # repeated or ill-separated stable eigenvalues: range of p(H) with p
    # vanishing on the unstable spectrum spans the stable subspace
    P = np.eye(m, dtype=complex)
    for z in unstable:
        P = P @ (H - z * np.eye(m))
    u, _, _ = np.linalg.svd(P)
    return u[:, :n]


def _solve_care(A, B, Q, N, R, what):
    """Stabilizing solution of ``A^T X + X A + Q - (XB+N) R^-1 (B^T X+N^T) = 0``.

    Returns ``(X, K)`` with ``K = -R^-1 (B^T X + N^T)`` so that ``A + B K`` is
    Hurwitz.
    """
    n = A.shape[0]
    R = np.atleast_2d(R)
    H = control_hamiltonian(A, B, Q, N, R)
    U = _stable_subspace(H)
    try:
        X = np.real(np.linalg.solve(U[:n].T, U[n:].T).T)
    except np.linalg.LinAlgError:
        raise SynthesisError(f"{what}: stable subspace is not a graph") from None
    X = 0.5 * (X + X.T)

    def gain(X):
        return -np.linalg.solve(R, B.T @ X + N.T)

    best = X
    best_res = np.linalg.norm(_care_residual(A, B, Q, N, R, X))
    for _ in range(_NEWTON_STEPS):
        K = gain(best)
        Acl = A + B @ K
        W = Q + N @ K + K.T @ N.T + K.T @ R @ K
        try:
            Xn = mc.solve_lyapunov(Acl.T, W)
        except ResonanceError:
            break
        res = np.linalg.norm(_care_residual(A, B, Q, N, R, Xn))
        if not res < best_res:
            break
        best, best_res = Xn, res
        if res <= 1e-14 * max(1.0, np.linalg.norm(Q)):
            break

    X = best
    K = gain(X)
    if not best_res <= RESIDUAL_TOL:
        raise SynthesisError(f"{what}: Riccati residual {best_res:.3g} exceeds tolerance")
    if not mc.spectral_abscissa(A + B @ K) < 0:
        raise SynthesisError(f"{what}: closed loop is not Hurwitz")
    return X, K


def solve_control_riccati(model):
    """Stabilizing ``X`` and state-feedback gain ``F`` (1 x n)."""
    C1, D12 = model.C1, model.D12
    X, F = _solve_care(model.A, model.B2, C1.T @ C1, C1.T @ D12, model.E1, "control")
    return X, F


def solve_filter_riccati(model):
    """Stabilizing ``Y`` and observer gain ``L`` (n x 1)."""
    Y, Kt = _solve_care(model.A.T, model.C2.T, model.noise_drive, model.cross_noise,
                        model.E2, "filter")
    return Y, Kt.T


def control_residual(model, X, F):
    return model.A.T @ X + X @ model.A + model.C1.T @ model.C1 - model.E1 * (F.T @ F)


def filter_residual(model, Y, L):
    return model.A @ Y + Y @ model.A.T + model.noise_drive - model.E2 * (L @ L.T)


def delay_free_cost(model, X, Y, F):
    """``tr(B1 S B1^T X) + tr(F^T E1 F Y)``."""
    J0 = np.trace(model.noise_drive @ X) + model.E1 * np.trace(F.T @ F @ Y)
    return float(J0)


def uncontrolled_cost(model):
    """Steady-state ``<z^T z>`` with ``u = 0``; needs a Hurwitz ``A``."""
    if classify_stability(model.A) != "stable":
        raise DivergingCostError("plant is not Hurwitz, the uncontrolled cost diverges")
    P = mc.solve_lyapunov(model.A, model.noise_drive)
    return float(np.trace(model.C1 @ P @ model.C1.T))


def synthesize(model, X=None, F=None):
    """Solve both Riccati equations and bundle the gains and costs.

    A precomputed control-side pair ``(X, F)`` may be passed in; it does not
    depend on the detector angle.
    """
    if X is None or F is None:
        X, F = solve_control_riccati(model)
    Y, L = solve_filter_riccati(model)
    J0 = delay_free_cost(model, X, Y, F)
    try:
        J_unc = uncontrolled_cost(model)
    except DivergingCostError:
        J_unc = float("nan")
    return GainSet(X=X, Y=Y, F=F, L=L, J0=J0, J_unc=J_unc)
