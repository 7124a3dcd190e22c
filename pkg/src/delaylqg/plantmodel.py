"""
Plant data and the synthesis-form state-space model.

A single bosonic mode with quadratures ``x = (q, p)`` evolves as::

    dx = A x dt + B1 dw + B2 u(t - h) dt
    z  = C1 x + D12 u(t - h)
    dy = C2 x dt + D21 dw

where ``dw`` has (symmetrized) covariance ``S_phi dt`` and ``phi`` is the
homodyne detector angle.  :func:`build_synthesis_model` maps physical data
(Hamiltonian form ``G``, coupling row ``C``, drive vector ``B``) onto these
matrices; :func:`synthesis_model_from_matrices` accepts them directly.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import matrixcore as mc
from .errors import DimensionError, DomainError, SingularAngleError

SIGMA = np.array([[0.0, 1.0], [-1.0, 0.0]])

STABILITY_EPS = 1e-9
SINGULAR_ANGLE_TOL = 1e-6

DEFAULT_C1 = np.eye(2)
DEFAULT_D12 = np.array([[1.0], [1.0]])


@dataclass(frozen=True)
class PlantSpec:
    """Physical description of a one-mode linear quantum plant.

    Attributes:
        G: 2x2 real symmetric matrix of the quadratic Hamiltonian.
        C: length-2 complex coupling row, ``c = C x``.
        B: length-2 real drive vector.
        label: free-form name.
    """

    G: np.ndarray
    C: np.ndarray
    B: np.ndarray
    label: str = ""

    def __post_init__(self):
        G = np.asarray(self.G, dtype=float)
        C = np.asarray(self.C, dtype=complex).reshape(-1)
        B = np.asarray(self.B, dtype=float).reshape(-1)
        if G.shape != (2, 2) or C.shape != (2,) or B.shape != (2,):
            raise DimensionError("PlantSpec expects G 2x2, C and B of length 2")
        for name, arr in (("G", G), ("C", C), ("B", B)):
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} has non-finite entries")
        if np.max(np.abs(G - G.T)) > 1e-14:
            raise DomainError("G must be symmetric")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "B", B)

    @property
    def A(self):
        CdC = np.outer(np.conj(self.C), self.C)
        return SIGMA @ (self.G + CdC.imag)

    def to_dict(self):
        return {
            "G": self.G.tolist(),
            "C": [[z.real, z.imag] for z in self.C],
            "B": self.B.tolist(),
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, d):
        C = [_parse_complex(z) for z in d["C"]]
        return cls(G=np.array(d["G"], float), C=np.array(C), B=np.array(d["B"], float),
                   label=d.get("label", ""))


def _parse_complex(z):
    if isinstance(z, (list, tuple)):
        if len(z) != 2:
            raise DomainError(f"complex numbers are encoded as [re, im], got {z!r}")
        return complex(float(z[0]), float(z[1]))
    return complex(z)


@dataclass
class SynthesisModel:
    """State-space data for the delayed LQG problem at a fixed detector angle.

    Vectors are stored as 2-D arrays: ``B2`` and ``D12`` are columns, ``C2``
    and ``D21`` are rows.  ``E1`` and ``E2`` are scalars.
    """

    phi: float
    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    D12: np.ndarray
    D21: np.ndarray
    S_phi: np.ndarray
    h: float = 0.0
    label: str = ""
    E1: float = field(init=False)
    E2: float = field(init=False)

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = self.A.shape[0]
        self.B1 = np.asarray(self.B1, dtype=float).reshape(n, -1)
        self.B2 = np.asarray(self.B2, dtype=float).reshape(n, 1)
        self.C1 = np.atleast_2d(np.asarray(self.C1, dtype=float))
        self.C2 = np.asarray(self.C2, dtype=float).reshape(1, n)
        self.D12 = np.asarray(self.D12, dtype=float).reshape(self.C1.shape[0], 1)
        self.D21 = np.asarray(self.D21, dtype=float).reshape(1, -1)
        self.S_phi = np.asarray(self.S_phi, dtype=float)
        nw = self.B1.shape[1]
        if self.A.shape != (n, n) or self.C1.shape[1] != n:
            raise DimensionError("inconsistent state dimension")
        if self.D21.shape[1] != nw or self.S_phi.shape != (nw, nw):
            raise DimensionError("inconsistent noise dimension")
        if self.h < 0 or not math.isfinite(self.h):
            raise DomainError(f"delay must be finite and nonnegative, got {self.h}")
        self.E1 = float((self.D12.T @ self.D12)[0, 0])
        self.E2 = float((self.D21 @ self.S_phi @ self.D21.T)[0, 0])

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def noise_drive(self):
        """``B1 S B1^T``, the plant noise intensity."""
        return self.B1 @ self.S_phi @ self.B1.T

    @property
    def cross_noise(self):
        """``B1 S D21^T``, the plant/measurement noise correlation."""
        return self.B1 @ self.S_phi @ self.D21.T

    def to_dict(self):
        d = {k: np.asarray(getattr(self, k)).tolist()
             for k in ("A", "B1", "B2", "C1", "C2", "D12", "D21", "S_phi")}
        d.update(phi=self.phi, h=self.h, label=self.label, E1=self.E1, E2=self.E2)
        return d

    @classmethod
    def from_dict(cls, d):
        S = d.get("S_phi", d.get("S"))
        return synthesis_model_from_matrices(
            A=d["A"], B1=d["B1"], B2=d["B2"], C1=d.get("C1", DEFAULT_C1), C2=d["C2"],
            D12=d.get("D12", DEFAULT_D12), D21=d.get("D21", [[1.0, 0.0]]), S=S,
            phi=d.get("phi", float("nan")), h=d.get("h", 0.0), label=d.get("label", ""),
        )


@dataclass
class AssumptionReport:
    stabilizable: bool
    detectable: bool
    no_imaginary_axis_zeros_12: bool
    no_imaginary_axis_zeros_21: bool
    E1_nonsingular: bool
    E2_nonsingular: bool
    details: str = ""

    FLAGS = ("stabilizable", "detectable", "no_imaginary_axis_zeros_12",
             "no_imaginary_axis_zeros_21", "E1_nonsingular", "E2_nonsingular")

    @property
    def passed(self):
        return all(getattr(self, f) for f in self.FLAGS)

    def to_dict(self):
        d = {f: bool(getattr(self, f)) for f in self.FLAGS}
        d["passed"] = self.passed
        d["details"] = self.details
        return d

    def format_text(self):
        width = max(len(f) for f in self.FLAGS)
        lines = [f"{f:<{width}}  {'yes' if getattr(self, f) else 'NO'}" for f in self.FLAGS]
        lines.append(f"{'overall':<{width}}  {'PASS' if self.passed else 'FAIL'}")
        if self.details:
            lines.append(self.details)
        return "\n".join(lines)


def detector_covariance(phi):
    """Symmetrized noise covariance ``[[1, sin phi], [sin phi, 1]]``."""
    s = math.sin(phi)
    return np.array([[1.0, s], [s, 1.0]])


def _normalize_angle(phi):
    phi = float(phi)
    if not math.isfinite(phi):
        raise DomainError("detector angle must be finite")
    return phi % (2 * math.pi)


def is_admissible_angle(phi, tol=SINGULAR_ANGLE_TOL):
    phi = _normalize_angle(phi)
    return min(abs(phi - math.pi / 2), abs(phi - 3 * math.pi / 2)) > tol


def build_synthesis_model(plant, phi, C1=None, D12=None, h=0.0):
    """Synthesis-form matrices for ``plant`` observed at detector angle ``phi``."""
    phi = _normalize_angle(phi)
    if not is_admissible_angle(phi):
        raise SingularAngleError(
            f"detector angle {phi:.9g} is within {SINGULAR_ANGLE_TOL:g} of pi/2 or 3pi/2; "
            "the noise input matrix is singular there"
        )
    C = plant.C
    c, s = math.cos(phi), math.sin(phi)
    row = np.array([1.0 / c, -s / c + 1j])
    B1 = SIGMA @ np.outer(np.conj(C), row).imag
    C2c = np.exp(-1j * phi) * C + np.exp(1j * phi) * np.conj(C)
    if np.max(np.abs(C2c.imag)) > 1e-14 * max(1.0, np.max(np.abs(C))):
        raise DomainError("output map has a non-real residue")
    return SynthesisModel(
        phi=phi,
        A=plant.A,
        B1=B1,
        B2=plant.B,
        C1=DEFAULT_C1 if C1 is None else C1,
        C2=C2c.real,
        D12=DEFAULT_D12 if D12 is None else D12,
        D21=np.array([[1.0, 0.0]]),
        S_phi=detector_covariance(phi),
        h=h,
        label=plant.label,
    )


def synthesis_model_from_matrices(A, B1, B2, C2, S, C1=None, D12=None, D21=None,
                                  phi=float("nan"), h=0.0, label="generic"):
    """Generic input path: build a :class:`SynthesisModel` from raw matrices."""
    return SynthesisModel(
        phi=float(phi),
        A=A, B1=B1, B2=B2,
        C1=DEFAULT_C1 if C1 is None else C1,
        C2=C2,
        D12=DEFAULT_D12 if D12 is None else D12,
        D21=np.array([[1.0, 0.0]]) if D21 is None else D21,
        S_phi=S, h=h, label=label,
    )


def classify_stability(A, eps=STABILITY_EPS):
    """Return ``"stable"``, ``"marginal"`` or ``"unstable"`` from the spectrum of ``A``."""
    re = [z.real for z in mc.eigenvalues(A)]
    if all(r < -eps for r in re):
        return "stable"
    if any(r > eps for r in re):
        return "unstable"
    return "marginal"


def _full_row_rank(M, tol=1e-9):
    sv = np.linalg.svd(M, compute_uv=False)
    return sv[-1] > tol * max(1.0, sv[0])


def _pbh(A, B, eps):
    n = A.shape[0]
    bad = []
    for lam in mc.eigenvalues(A):
        if lam.real >= -eps:
            M = np.hstack([A.astype(complex) - lam * np.eye(n), B.astype(complex)])
            if not _full_row_rank(M):
                bad.append(lam)
    return bad


def control_hamiltonian(A, B, Q, N, R):
    """Hamiltonian of ``A^T X + X A + Q - (X B + N) R^-1 (B^T X + N^T) = 0``."""
    Rinv = np.linalg.inv(np.atleast_2d(R))
    At = A - B @ Rinv @ N.T
    return np.block([[At, -B @ Rinv @ B.T],
                     [-(Q - N @ Rinv @ N.T), -At.T]])


def _no_imag_axis(H, tol=1e-8):
    return all(abs(z.real) > tol for z in mc.eigenvalues(H))


def check_assumptions(model, eps=STABILITY_EPS):
    """Evaluate stabilizability, detectability, imaginary-axis zeros and
    nonsingularity of the weights; never raises."""
    notes = []
    bad_s = _pbh(model.A, model.B2, eps)
    bad_d = _pbh(model.A.T, model.C2.T, eps)
    if bad_s:
        notes.append("uncontrollable modes: " + ", ".join(f"{z:.6g}" for z in bad_s))
    if bad_d:
        notes.append("unobservable modes: " + ", ".join(f"{z:.6g}" for z in bad_d))
    e1_ok = abs(model.E1) > 1e-12
    e2_ok = abs(model.E2) > 1e-12
    ctrl_ok = filt_ok = False
    if e1_ok:
        Hc = control_hamiltonian(model.A, model.B2, model.C1.T @ model.C1,
                                 model.C1.T @ model.D12, model.E1)
        ctrl_ok = _no_imag_axis(Hc)
        if not ctrl_ok:
            notes.append("control Hamiltonian has imaginary-axis eigenvalues")
    else:
        notes.append("E1 is singular")
    if e2_ok:
        Hf = control_hamiltonian(model.A.T, model.C2.T, model.noise_drive,
                                 model.cross_noise, model.E2)
        filt_ok = _no_imag_axis(Hf)
        if not filt_ok:
            notes.append("filter Hamiltonian has imaginary-axis eigenvalues")
    else:
        notes.append("E2 is singular")
    return AssumptionReport(
        stabilizable=not bad_s,
        detectable=not bad_d,
        no_imaginary_axis_zeros_12=ctrl_ok,
        no_imaginary_axis_zeros_21=filt_ok,
        E1_nonsingular=e1_ok,
        E2_nonsingular=e2_ok,
        details="; ".join(notes),
    )


def preset_damped_cavity(gamma=0.5, delta=1.0):
    """Damped cavity with an on-threshold parametric down converter.

    ``H = gamma/2 (qp + pq) - u q`` and ``c = delta (q + i p)``.  Stable when
    ``gamma < delta**2``.
    """
    if not (gamma > 0 and delta > 0):
        raise DomainError("gamma and delta must be positive")
    return PlantSpec(
        G=np.array([[0.0, gamma], [gamma, 0.0]]),
        C=np.array([delta, 1j * delta]),
        B=np.array([0.0, 1.0]),
        label=f"damped-cavity(gamma={gamma:g},delta={delta:g})",
    )


def preset_harmonic(m=1.0, omega=1.0):
    """Particle in a harmonic trap probed through its position, ``c = q``."""
    if not (m > 0 and omega > 0):
        raise DomainError("mass and frequency must be positive")
    return PlantSpec(
        G=np.diag([m * omega ** 2, 1.0 / m]),
        C=np.array([1.0 + 0j, 0.0 + 0j]),
        B=np.array([0.0, 1.0]),
        label=f"harmonic(m={m:g},omega={omega:g})",
    )


PRESETS = {
    "damped-cavity": preset_damped_cavity,
    "harmonic": preset_harmonic,
}
