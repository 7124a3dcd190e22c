"""
Discrete-time realization of the delay-compensating LQG controller.

In continuous time the controller is::

    dxh = (A + B2 F + e^{Ah} L C2 e^{-Ah}) xh dt - e^{Ah} L (dy + pi dt)
    u   = F xh
    pi  = C2 int_{t-h}^{t} e^{A(t-h-tau)} B2 u(tau) dtau

``xh`` predicts the plant state ``h`` ahead and ``pi`` removes from the
measurement the effect of inputs still in flight.  The estimator is
stepped with explicit Euler; ``pi`` is a trapezoidal FIR over the last
``N + 1`` controller outputs, with kernel ``k_j = C2 e^{A(j dt - h)} B2``
acting on ``u(t - j dt)``.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import matrixcore as mc
from .errors import DivergenceError, DomainError


@dataclass
class DelayController:
    A_cl: np.ndarray
    injection: np.ndarray
    F: np.ndarray
    C2: np.ndarray
    h: float
    dt: float
    N: int
    kernel: np.ndarray
    weights: np.ndarray
    h_requested: float
    C2_back: np.ndarray = field(repr=False)
    xhat: np.ndarray = field(init=False)
    eta: float = field(init=False, default=0.0)
    _hist: np.ndarray = field(init=False, repr=False)
    _pos: int = field(init=False, default=0, repr=False)

    def __post_init__(self):
        self.weighted_kernel = self.kernel * self.weights
        self.reset()

    @property
    def snapped(self):
        """True when the requested delay was rounded to a multiple of ``dt``."""
        return abs(self.h - self.h_requested) > 1e-12 * max(1.0, self.h_requested)

    def reset(self):
        n = self.A_cl.shape[0]
        self.xhat = np.zeros(n)
        self.eta = 0.0
        # doubled ring: entries k and k + N + 1 mirror each other so the
        # newest-first window is always the contiguous slice [pos, pos + N + 1)
        self._hist = np.zeros(2 * (self.N + 1))
        self._pos = 0

    @property
    def u_history(self):
        """Past outputs, newest first (length ``N + 1``)."""
        return self._hist[self._pos:self._pos + self.N + 1].copy()

    def prediction_correction(self):
        """Current value of the finite-time integral ``pi``."""
        if self.N == 0:
            return 0.0
        window = self._hist[self._pos:self._pos + self.N + 1]
        return float(window @ self.weighted_kernel)

    def step(self, dy):
        """Consume one measurement increment and return the next control value."""
        dy = float(dy)
        if not math.isfinite(dy):
            raise DivergenceError("non-finite measurement increment")
        pi = self.prediction_correction()
        innov = dy + pi * self.dt
        self.eta += innov - float(self.C2_back @ self.xhat) * self.dt
        self.xhat = self.xhat + self.dt * (self.A_cl @ self.xhat) - self.injection * innov
        u = float(self.F @ self.xhat)
        if not math.isfinite(u):
            raise DivergenceError("controller state blew up")
        self._push(u)
        return u

    def _push(self, u):
        size = self.N + 1
        self._pos = (self._pos - 1) % size
        self._hist[self._pos] = u
        self._hist[self._pos + size] = u


def synthesize_controller(model, gains, h, dt):
    """Precompute the discretized controller for delay ``h`` and step ``dt``.

    ``h`` is snapped to the nearest multiple of ``dt``; the requested value is
    kept in ``h_requested``.
    """
    dt = float(dt)
    if not (dt > 0 and math.isfinite(dt)):
        raise DomainError(f"time step must be positive, got {dt}")
    h = float(h)
    if not (h >= 0 and math.isfinite(h)):
        raise DomainError(f"delay must be finite and nonnegative, got {h}")
    N = int(round(h / dt))
    h_eff = N * dt
    A, B2, C2 = model.A, model.B2, model.C2
    F = np.asarray(gains.F, float).reshape(1, -1)
    L = np.asarray(gains.L, float).reshape(-1, 1)

    Eh = mc.expm(A * h_eff)
    Ehinv = mc.expm(-A * h_eff)
    inj = Eh @ L
    A_cl = A + B2 @ F + inj @ C2 @ Ehinv

    kernel = np.array([(C2 @ mc.expm(A * (j * dt - h_eff)) @ B2)[0, 0] for j in range(N + 1)])
    weights = np.full(N + 1, dt)
    weights[0] = weights[-1] = 0.5 * dt
    if N == 0:
        weights[:] = 0.0

    return DelayController(
        A_cl=A_cl, injection=inj.reshape(-1), F=F.reshape(-1), C2=C2.reshape(-1),
        h=h_eff, dt=dt, N=N, kernel=kernel, weights=weights, h_requested=h,
        C2_back=(C2 @ Ehinv).reshape(-1),
    )


def controller_step(ctrl, dy):
    return ctrl.step(dy)


def closed_loop_matrix(model, ctrl):
    """Noise-free plant-plus-controller generator for a delay-free controller."""
    if ctrl.N != 0:
        raise DomainError("closed-loop matrix is finite-dimensional only for h = 0")
    B2F = model.B2 @ ctrl.F.reshape(1, -1)
    inj = ctrl.injection.reshape(-1, 1)
    return np.block([[model.A, B2F],
                     [-inj @ model.C2, ctrl.A_cl]])
