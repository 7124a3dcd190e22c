"""
Monte Carlo validation of the delayed-LQG cost.

The closed loop (delayed plant plus discretized controller) is integrated
with Euler-Maruyama under classical Gaussian noise whose covariance is the
symmetrized detector covariance ``S_phi``.  Each trajectory owns an RNG
substream derived from ``(seed, traj_index)``, so results do not depend on
how trajectories are scheduled.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math

import numba
import numpy as np

from .delayperf import optimal_cost
from .errors import DivergenceError, DomainError
from .smithctrl import synthesize_controller

DIVERGENCE_NORM = 1e6


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    T_burn: float = 20.0
    T_avg: float = 80.0
    n_traj: int = 64
    seed: int = 0

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise DomainError("dt must be positive")
        if not (self.T_burn >= 0 and self.T_avg > 0):
            raise DomainError("burn-in must be nonnegative and averaging horizon positive")
        if int(self.n_traj) != self.n_traj or self.n_traj < 1:
            raise DomainError("n_traj must be a positive integer")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DomainError("seed must fit in 64 bits")

    @property
    def n_burn(self):
        return int(round(self.T_burn / self.dt))

    @property
    def n_avg(self):
        return int(round(self.T_avg / self.dt))


@dataclass(frozen=True)
class SimEstimate:
    J_hat: float
    stderr: float
    n_effective: int
    diverged: int
    J_formula: float
    J_weighted: float
    h: float
    per_trajectory: tuple = ()

    def agrees(self, rel_tol=0.03, n_sigma=3.0, weighted=False):
        """``|J_hat - J| <= max(n_sigma * stderr, rel_tol * J)`` against the
        unweighted (default) or ``E1``-weighted closed-form cost."""
        if self.diverged:
            return False
        J = self.J_weighted if weighted else self.J_formula
        return abs(self.J_hat - J) <= max(n_sigma * self.stderr, rel_tol * abs(J))


def factor_noise(S):
    """Square factor ``M`` with ``M M^T = S`` for a PSD covariance.

    Cholesky when ``S`` is positive definite, eigen-factorization on the
    rank-deficient boundary.
    """
    S = np.asarray(S, dtype=float)
    S = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(S)
    if w[0] < -1e-12 * max(1.0, abs(w[-1])):
        raise DomainError(f"covariance is not PSD (eigenvalue {w[0]:.3g})")
    if w[0] > 1e-12 * max(1.0, abs(w[-1])):
        try:
            return np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            pass
    return V @ np.diag(np.sqrt(np.clip(w, 0.0, None)))


def trajectory_rng(seed, traj_index):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(traj_index),))
    return np.random.Generator(np.random.PCG64(ss))


@numba.njit(cache=True, nogil=True)
def _run(A, B1M, B2, C2, D21M, C1, D12, Acl, inj, F, wk, N, dt, xi,
         n_burn, n_avg, open_loop, noise_scale, u_record):
    n = A.shape[0]
    nw = B1M.shape[1]
    p = C1.shape[0]
    size = N + 1
    hist = np.zeros(2 * size)
    pos = 0
    x = np.zeros(n)
    xh = np.zeros(n)
    xn = np.zeros(n)
    xhn = np.zeros(n)
    dw = np.zeros(nw)
    sq = math.sqrt(dt) * noise_scale
    acc = 0.0
    n_steps = n_burn + n_avg
    record = u_record.shape[0] > 0
    for k in range(n_steps):
        for a in range(nw):
            dw[a] = xi[k, a] * sq
        u_plant = 0.0 if open_loop else hist[pos + N]
        if k >= n_burn:
            for r in range(p):
                zr = D12[r] * u_plant
                for c in range(n):
                    zr += C1[r, c] * x[c]
                acc += zr * zr
        dy = 0.0
        for c in range(n):
            dy += C2[c] * x[c]
        dy *= dt
        for a in range(nw):
            dy += D21M[a] * dw[a]
        for i in range(n):
            s = 0.0
            for c in range(n):
                s += A[i, c] * x[c]
            s = x[i] + dt * (s + B2[i] * u_plant)
            for a in range(nw):
                s += B1M[i, a] * dw[a]
            xn[i] = s
        pi = 0.0
        for j in range(size):
            pi += wk[j] * hist[pos + j]
        innov = dy + pi * dt
        for i in range(n):
            s = 0.0
            for c in range(n):
                s += Acl[i, c] * xh[c]
            xhn[i] = xh[i] + dt * s - inj[i] * innov
        u = 0.0
        norm2 = 0.0
        for i in range(n):
            x[i] = xn[i]
            xh[i] = xhn[i]
            u += F[i] * xh[i]
            norm2 += x[i] * x[i]
        if not (norm2 <= DIVERGENCE_NORM * DIVERGENCE_NORM):
            return math.nan, True
        pos -= 1
        if pos < 0:
            pos += size
        hist[pos] = u
        hist[pos + size] = u
        if record:
            u_record[k] = u
    return acc / n_avg, False


def _kernel_args(model, ctrl, M):
    return (
        np.ascontiguousarray(model.A, dtype=np.float64),
        np.ascontiguousarray(model.B1 @ M, dtype=np.float64),
        np.ascontiguousarray(model.B2.reshape(-1), dtype=np.float64),
        np.ascontiguousarray(model.C2.reshape(-1), dtype=np.float64),
        np.ascontiguousarray((model.D21 @ M).reshape(-1), dtype=np.float64),
        np.ascontiguousarray(model.C1, dtype=np.float64),
        np.ascontiguousarray(model.D12.reshape(-1), dtype=np.float64),
        np.ascontiguousarray(ctrl.A_cl, dtype=np.float64),
        np.ascontiguousarray(ctrl.injection, dtype=np.float64),
        np.ascontiguousarray(ctrl.F, dtype=np.float64),
        np.ascontiguousarray(ctrl.weighted_kernel, dtype=np.float64),
        int(ctrl.N),
        float(ctrl.dt),
    )


def _one(args, cfg, traj_index, open_loop, noise_scale, u_record):
    nw = args[1].shape[1]
    xi = trajectory_rng(cfg.seed, traj_index).standard_normal((cfg.n_burn + cfg.n_avg, nw))
    return _run(*args, xi, cfg.n_burn, cfg.n_avg, open_loop, float(noise_scale), u_record)


def simulate_closed_loop(model, controller, cfg, traj_index, open_loop=False,
                         noise_scale=1.0, record_u=False):
    """Time average of ``z^T z`` over ``[T_burn, T_burn + T_avg]`` for one trajectory.

    The controller supplies gains and kernel only; its own state is not
    touched.  With ``record_u`` the per-step controller outputs are returned
    as well.  Raises :class:`DivergenceError` if the state norm exceeds 1e6.
    """
    if abs(controller.dt - cfg.dt) > 1e-15 * cfg.dt:
        raise DomainError("controller and simulation use different time steps")
    M = factor_noise(model.S_phi)
    args = _kernel_args(model, controller, M)
    u_rec = np.zeros(cfg.n_burn + cfg.n_avg if record_u else 0)
    avg, diverged = _one(args, cfg, traj_index, open_loop, noise_scale, u_rec)
    if diverged:
        raise DivergenceError(f"trajectory {traj_index} diverged")
    return (avg, u_rec) if record_u else avg


def _mean_stderr(values):
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def estimate_cost(model, gains, h, cfg, jobs=1, open_loop=False):
    """Ensemble estimate of the steady-state cost at delay ``h``.

    Trajectories are independent; ``jobs > 1`` runs them on a thread pool.
    The reduction uses exactly rounded sums so the result is independent of
    scheduling.
    """
    ctrl = synthesize_controller(model, gains, h, cfg.dt)
    M = factor_noise(model.S_phi)
    args = _kernel_args(model, ctrl, M)
    empty = np.zeros(0)

    def work(k):
        return _one(args, cfg, k, open_loop, 1.0, empty)

    idx = range(cfg.n_traj)
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=int(jobs)) as pool:
            results = list(pool.map(work, idx))
    else:
        results = [work(k) for k in idx]

    values = [v for v, bad in results if not bad]
    diverged = sum(1 for _, bad in results if bad)
    if values:
        J_hat, se = _mean_stderr(values)
    else:
        J_hat, se = math.nan, math.nan
    if open_loop:
        J_formula = J_weighted = gains.J_unc
    else:
        J_formula = optimal_cost(model, gains, ctrl.h)
        J_weighted = optimal_cost(model, gains, ctrl.h, weighted=True)
    return SimEstimate(
        J_hat=J_hat, stderr=se, n_effective=len(values), diverged=diverged,
        J_formula=float(J_formula), J_weighted=float(J_weighted), h=ctrl.h,
        per_trajectory=tuple(v for v, _ in results),
    )
