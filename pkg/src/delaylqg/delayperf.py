"""
Cost of feedback delay.

With delay ``h`` the best achievable cost is the delay-free optimum plus a
penalty ``int_0^h (F e^{A tau} L)^2 dtau``.  This module evaluates that
penalty, sweeps it over delay grids, searches the detector angle that
minimizes the delayed cost, and fits the linear-plus-ripple law obeyed by
marginally stable (oscillator) plants.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import matrixcore as mc
from .errors import DomainError, FitError, OptimizationError, SynthesisError
from .lqgsynth import GainSet, solve_control_riccati, synthesize
from .plantmodel import build_synthesis_model, classify_stability

METHODS = ("gramian", "quadrature")
PHI_SCAN_POINTS = 720
PHI_EXCLUSION = 1e-3
PHI_TOL = 1e-6
_GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass
class PerformanceCurve:
    phi: float
    h_grid: np.ndarray
    J_values: np.ndarray
    method: str
    gains: GainSet = field(repr=False)

    def rows(self):
        return list(zip(self.h_grid.tolist(), self.J_values.tolist()))


@dataclass(frozen=True)
class FitResult:
    offset: float
    slope_A: float
    amplitude_B: float
    phase_theta: float
    rms_residual: float
    omega: float

    def evaluate(self, h):
        h = np.asarray(h, dtype=float)
        return (self.offset + self.slope_A * h
                + self.amplitude_B * np.sin(self.omega * h + self.phase_theta))

    def to_dict(self):
        return {
            "offset": self.offset, "slope_A": self.slope_A,
            "amplitude_B": self.amplitude_B, "phase_theta": self.phase_theta,
            "rms_residual": self.rms_residual, "omega": self.omega,
        }


def _check_h(h):
    h = float(h)
    if not math.isfinite(h) or h < 0:
        raise DomainError(f"delay must be finite and nonnegative, got {h}")
    return h


def delay_penalty(F, A, L, h, method="gramian"):
    r"""Penalty :math:`\int_0^h (F e^{A\tau} L)^2\,d\tau` for a scalar input."""
    h = _check_h(h)
    F = np.atleast_2d(F)
    L = np.asarray(L, dtype=float).reshape(-1, 1)
    if h == 0:
        return 0.0
    if method == "gramian":
        G = mc.finite_horizon_gramian(A, L @ L.T, h)
    elif method == "quadrature":
        G = mc.gramian_quadrature(A, L @ L.T, h)
    else:
        raise DomainError(f"unknown method {method!r}; expected one of {METHODS}")
    return max(0.0, float((F @ G @ F.T)[0, 0]))


def optimal_cost(model, gains, h, method="gramian", weighted=False):
    """Delayed optimal cost ``J0 + penalty(h)``.

    With ``weighted=True`` the penalty is scaled by ``E1 * E2``, which is the
    steady-state cost actually attained by the delay-compensating controller
    when ``D12^T D12 != 1``.  The default leaves the penalty unweighted.
    """
    scale = model.E1 * model.E2 if weighted else 1.0
    return gains.J0 + scale * delay_penalty(gains.F, model.A, gains.L, h, method)


def sweep_delay(model, gains, h_grid, method="gramian", weighted=False):
    """Optimal cost at each delay of a sorted nonnegative grid.

    The quadrature method integrates grid interval by grid interval and
    accumulates, so a sweep costs one pass over ``[0, max h]``.
    """
    h = np.asarray(h_grid, dtype=float).reshape(-1)
    if h.size == 0:
        raise DomainError("delay grid is empty")
    if np.any(~np.isfinite(h)) or np.any(h < 0) or np.any(np.diff(h) < 0):
        raise DomainError("delay grid must be sorted, finite and nonnegative")
    if method == "gramian":
        J = np.array([optimal_cost(model, gains, hk, weighted=weighted) for hk in h])
    elif method == "quadrature":
        A, L, F = model.A, gains.L, gains.F
        scale = model.E1 * model.E2 if weighted else 1.0
        acc, prev = 0.0, 0.0
        J = np.empty_like(h)
        for k, hk in enumerate(h):
            if hk > prev:
                G = mc.gramian_quadrature(A, L @ L.T, hk, t0=prev)
                acc += float((F @ G @ F.T)[0, 0])
                prev = hk
            J[k] = gains.J0 + scale * max(acc, 0.0)
    else:
        raise DomainError(f"unknown method {method!r}; expected one of {METHODS}")
    return PerformanceCurve(phi=model.phi, h_grid=h, J_values=J, method=method, gains=gains)


class DetectorScan:
    """Delayed cost as a function of detector angle for a fixed plant.

    The control-side Riccati solution is angle independent and computed once;
    filter-side gains are cached per angle so that several delays can share
    one scan.
    """

    def __init__(self, plant, C1=None, D12=None):
        self.plant = plant
        self.C1, self.D12 = C1, D12
        ref = build_synthesis_model(plant, 0.0, C1, D12)
        self.A = ref.A
        self.X, self.F = solve_control_riccati(ref)
        self._cache = {}

    def gains(self, phi):
        g = self._cache.get(phi)
        if g is None:
            model = build_synthesis_model(self.plant, phi, self.C1, self.D12)
            g = synthesize(model, self.X, self.F)
            self._cache[phi] = g
        return g

    def cost(self, phi, h):
        g = self.gains(phi)
        return g.J0 + delay_penalty(g.F, self.A, g.L, h)


def admissible_scan_angles(n=PHI_SCAN_POINTS, exclusion=PHI_EXCLUSION):
    phis = 2 * math.pi * np.arange(n) / n
    keep = (np.abs(phis - math.pi / 2) > exclusion) & (np.abs(phis - 3 * math.pi / 2) > exclusion)
    return phis[keep]


def _golden_section(f, a, b, tol):
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def optimize_phi(plant, C1=None, D12=None, h=0.0, scan=None):
    """Detector angle minimizing the delayed optimal cost.

    A dense scan over admissible angles locates the best bracket, which is
    then refined by golden-section search.  Returns ``(phi_opt, J_opt)``.
    Angles whose costs tie to 1e-12 relative resolve to the smallest angle.
    """
    h = _check_h(h)
    if scan is None:
        scan = DetectorScan(plant, C1, D12)
    phis = admissible_scan_angles()
    J = np.full(phis.shape, np.inf)
    for k, p in enumerate(phis):
        try:
            J[k] = scan.cost(float(p), h)
        except SynthesisError:
            pass
    if not np.any(np.isfinite(J)):
        raise OptimizationError("synthesis failed at every scanned detector angle")
    best = np.min(J)
    i = int(np.flatnonzero(J <= best + 1e-12 * abs(best))[0])

    step = 2 * math.pi / PHI_SCAN_POINTS
    lo, hi = phis[i] - step, phis[i] + step
    for sing in (math.pi / 2, 3 * math.pi / 2):
        if lo < sing < hi:
            if phis[i] < sing:
                hi = sing - PHI_EXCLUSION
            else:
                lo = sing + PHI_EXCLUSION

    def f(p):
        try:
            return scan.cost(p % (2 * math.pi), h)
        except SynthesisError:
            return math.inf

    phi_opt, J_opt = _golden_section(f, lo, hi, PHI_TOL)
    if J[i] < J_opt:
        phi_opt, J_opt = float(phis[i]), float(J[i])
    return float(phi_opt % (2 * math.pi)), float(J_opt)


def ripple_frequency(A):
    """Angular frequency of the ripple in the delayed cost of an oscillator plant.

    The penalty integrand is the square of a sinusoid at the plant frequency
    ``omega``, so the ripple oscillates at ``2 omega``.
    """
    if classify_stability(A) != "marginal":
        raise FitError("plant not marginal: the delay law needs imaginary-axis eigenvalues")
    omega = max(abs(z.imag) for z in mc.eigenvalues(A))
    if omega <= 0:
        raise FitError("plant not marginal: no oscillatory mode")
    return 2.0 * omega


def fit_linear_sinusoid(curve, omega):
    """Least-squares fit of ``c + A h + B sin(omega h + theta)`` to a curve."""
    h = np.asarray(curve.h_grid, dtype=float)
    J = np.asarray(curve.J_values, dtype=float)
    if h.size < 8:
        raise FitError("need at least 8 grid points")
    if omega <= 0 or (h[-1] - h[0]) * omega < 2 * math.pi:
        raise FitError("grid must span at least one period of the ripple")
    X = np.column_stack([np.ones_like(h), h, np.sin(omega * h), np.cos(omega * h)])
    coef, _, rank, sv = np.linalg.lstsq(X, J, rcond=None)
    if rank < 4 or sv[-1] <= 1e-10 * sv[0]:
        raise FitError("design matrix is rank deficient")
    c0, c1, cs, cc = coef
    amp = math.hypot(cs, cc)
    theta = math.atan2(cc, cs) % (2 * math.pi) if amp > 0 else 0.0
    resid = J - X @ coef
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return FitResult(offset=float(c0), slope_A=float(c1), amplitude_B=float(amp),
                     phase_theta=float(theta), rms_residual=rms, omega=float(omega))


def delay_law_fit(model, gains, h_grid):
    """Sweep and fit in one go for a marginal plant."""
    curve = sweep_delay(model, gains, h_grid)
    return fit_linear_sinusoid(curve, ripple_frequency(model.A)), curve


def default_h_grid(h_max=10.0, step=0.1):
    n = int(round(h_max / step))
    return step * np.arange(n + 1)
