"""
Small dense matrix utilities.

Everything here works on plain ``numpy`` arrays of modest size (the plant has
two states, Riccati Hamiltonians have four).  Products and linear solves are
delegated to numpy; the exponential, the eigenvalue routine, the Lyapunov
solver and the finite-horizon gramian are implemented here so that their
accuracy contracts are under our control.
"""

import math

import numpy as np

from .errors import DimensionError, DomainError, ResonanceError, UnsupportedDimensionError

# scaled norm bound for the Pade approximant
_EXPM_THETA = 0.5
_PADE_ORDER = 8


def _as_square(M, name="M"):
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise DomainError(f"{name} has non-finite entries")
    return M


def _pade_coefficients(m):
    c = [1.0]
    for k in range(1, m + 1):
        c.append(c[-1] * (m - k + 1) / (k * (2 * m - k + 1)))
    return c


_PADE_C = _pade_coefficients(_PADE_ORDER)


def expm(M):
    """Matrix exponential by scaling and squaring with a diagonal Pade approximant.

    The matrix is scaled by ``2**-s`` until its 1-norm is at most 0.5, the
    [8/8] Pade approximant is evaluated and the result is squared ``s`` times.
    """
    M = _as_square(M)
    n = M.shape[0]
    dtype = np.result_type(M.dtype, np.float64)
    norm = np.linalg.norm(M, 1)
    s = 0
    if norm > _EXPM_THETA:
        s = max(0, int(math.ceil(math.log2(norm / _EXPM_THETA))))
    X = M.astype(dtype) / (2.0 ** s)

    ident = np.eye(n, dtype=dtype)
    U = np.zeros((n, n), dtype=dtype)
    V = np.zeros((n, n), dtype=dtype)
    P = ident
    for k, c in enumerate(_PADE_C):
        if k > 0:
            P = P @ X
        if k % 2 == 0:
            V = V + c * P
        else:
            U = U + c * P
    E = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        E = E @ E
    return E


def _charpoly(M):
    """Monic characteristic polynomial coefficients via Faddeev-LeVerrier."""
    n = M.shape[0]
    coeffs = [1.0]
    Mk = np.zeros_like(M, dtype=np.float64 if not np.iscomplexobj(M) else complex)
    ident = np.eye(n)
    for k in range(1, n + 1):
        Mk = M @ (Mk + coeffs[-1] * ident)
        coeffs.append(-np.trace(Mk) / k)
    return np.array(coeffs)


def _durand_kerner(coeffs, tol=1e-15, max_iter=500):
    n = len(coeffs) - 1
    if n == 1:
        return np.array([-coeffs[1]], dtype=complex)
    bound = 1.0 + max(abs(c) for c in coeffs[1:])
    z = np.array([bound * (0.4 + 0.9j) ** k for k in range(n)], dtype=complex)
    for _ in range(max_iter):
        z_old = z.copy()
        for i in range(n):
            den = 1.0 + 0j
            for j in range(n):
                if j != i:
                    den *= z[i] - z[j]
            if den == 0:
                den = 1e-300
            z[i] = z[i] - np.polyval(coeffs, z[i]) / den
        if np.max(np.abs(z - z_old)) <= tol * bound:
            break
    return z


def eigvec(M, lam, iters=3):
    """Eigenvector for an approximate eigenvalue ``lam`` by inverse iteration.

    Returns ``(lam_refined, v)`` with ``v`` of unit 2-norm.  The eigenvalue is
    refined with the Rayleigh quotient of the final iterate.
    """
    M = np.asarray(M)
    n = M.shape[0]
    scale = max(1.0, np.linalg.norm(M, 1))
    shift = lam + 1e-13 * scale
    Ms = M.astype(complex) - shift * np.eye(n)
    v = np.ones(n, dtype=complex) / math.sqrt(n)
    v[0] += 0.1j
    for _ in range(iters):
        try:
            w = np.linalg.solve(Ms, v)
        except np.linalg.LinAlgError:
            Ms = Ms - 1e-12 * scale * np.eye(n)
            w = np.linalg.solve(Ms, v)
        nw = np.linalg.norm(w)
        if not np.isfinite(nw) or nw == 0:
            break
        v = w / nw
    lam_r = np.vdot(v, M @ v) / np.vdot(v, v)
    return lam_r, v


def eigenvalues(M):
    """All eigenvalues of a real square matrix of order at most 4.

    Roots of the characteristic polynomial are found simultaneously
    (Durand-Kerner), polished by inverse iteration, paired into exact complex
    conjugates and sorted by real part, then imaginary part.
    """
    M = _as_square(M)
    n = M.shape[0]
    if n > 4:
        raise UnsupportedDimensionError(f"eigenvalues supports n <= 4, got n = {n}")
    if n == 0:
        return []
    M = M.astype(np.float64)
    roots = _durand_kerner(_charpoly(M))
    scale = max(1.0, np.linalg.norm(M, 1))
    refined = []
    for r in roots:
        lam, v = eigvec(M, r)
        if not np.isfinite(lam) or abs(lam - r) > 1e-4 * scale:
            lam = r
        refined.append(complex(lam))

    # real input: enforce conjugate symmetry
    tol = 1e-10 * scale
    out = []
    remaining = list(refined)
    while remaining:
        z = remaining.pop(0)
        if abs(z.imag) <= tol:
            out.append(complex(z.real, 0.0))
            continue
        j = min(range(len(remaining)), key=lambda k: abs(remaining[k] - z.conjugate()), default=None)
        if j is not None and abs(remaining[j] - z.conjugate()) <= 1e-6 * scale:
            w = remaining.pop(j)
            re = 0.5 * (z.real + w.real)
            im = 0.5 * (abs(z.imag) + abs(w.imag))
            out.extend([complex(re, -im), complex(re, im)])
        else:
            out.append(z)
    out.sort(key=lambda z: (z.real, z.imag))
    return out


def spectral_abscissa(M):
    """Largest real part among the eigenvalues of ``M``."""
    return max(z.real for z in eigenvalues(M))


def solve_lyapunov(A, Q):
    """Solve ``A P + P A^T + Q = 0`` for symmetric ``P``.

    Uses the Kronecker-vectorized linear system.  Raises ``ResonanceError``
    when two eigenvalues of ``A`` sum to (numerically) zero.
    """
    A = _as_square(A, "A").astype(np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    n = A.shape[0]
    if Q.shape != (n, n):
        raise DimensionError(f"Q must be {n}x{n}, got {Q.shape}")
    if not np.all(np.isfinite(Q)):
        raise DomainError("Q has non-finite entries")
    Q = 0.5 * (Q + Q.T)

    scale = max(1.0, np.linalg.norm(A, 1))
    if n <= 4:
        lams = eigenvalues(A)
        for i in range(n):
            for j in range(i, n):
                if abs(lams[i] + lams[j]) <= 1e-10 * scale:
                    raise ResonanceError(lams[i], lams[j])
    ident = np.eye(n)
    K = np.kron(ident, A) + np.kron(A, ident)
    try:
        vecP = np.linalg.solve(K, -Q.reshape(-1, order="F"))
    except np.linalg.LinAlgError:
        lams = np.linalg.eigvals(A)
        i, j = min(
            ((i, j) for i in range(n) for j in range(i, n)),
            key=lambda ij: abs(lams[ij[0]] + lams[ij[1]]),
        )
        raise ResonanceError(lams[i], lams[j]) from None
    P = vecP.reshape(n, n, order="F")
    return 0.5 * (P + P.T)


def finite_horizon_gramian(A, W, h):
    r"""Integral :math:`\int_0^h e^{A\tau} W e^{A^T\tau}\,d\tau`.

    The exponential of the block matrix ``[[A, W], [0, -A^T]] t`` gives the
    gramian over a short base interval ``t = h / 2**k``; the interval is then
    doubled ``k`` times with ``G(2t) = G(t) + e^{At} G(t) e^{A^T t}``, which
    avoids forming the growing factor ``e^{-A^T h}`` for long horizons.
    """
    A = _as_square(A, "A").astype(np.float64)
    W = np.asarray(W, dtype=np.float64)
    n = A.shape[0]
    if W.shape != (n, n):
        raise DimensionError(f"W must be {n}x{n}, got {W.shape}")
    h = float(h)
    if not math.isfinite(h) or h < 0:
        raise DomainError(f"horizon must be finite and nonnegative, got {h}")
    if h == 0:
        return np.zeros((n, n))

    k = 0
    normA = np.linalg.norm(A, 1)
    if normA * h > 1.0:
        k = int(math.ceil(math.log2(normA * h)))
    t = h / 2.0 ** k
    blk = np.zeros((2 * n, 2 * n))
    blk[:n, :n] = A
    blk[:n, n:] = W
    blk[n:, n:] = -A.T
    E = expm(blk * t)
    Phi = E[:n, :n]
    G = E[:n, n:] @ Phi.T
    G = 0.5 * (G + G.T)
    for _ in range(k):
        G = G + Phi @ G @ Phi.T
        G = 0.5 * (G + G.T)
        Phi = Phi @ Phi
    return G


def adaptive_simpson(f, a, b, tol=1e-12, max_depth=50):
    """Adaptive Simpson quadrature of a scalar- or array-valued ``f`` on [a, b].

    The error test uses the max-abs norm; ``tol`` is absolute on each
    subinterval, scaled by its share of ``b - a``.
    """
    if b == a:
        return np.zeros_like(np.asarray(f(a), dtype=float))
    fa, fb = np.asarray(f(a), float), np.asarray(f(b), float)
    m = 0.5 * (a + b)
    fm = np.asarray(f(m), float)
    whole = (b - a) / 6.0 * (fa + 4 * fm + fb)
    total = np.zeros_like(whole)
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        a_, b_, fa_, fm_, fb_, S, eps, depth = stack.pop()
        m_ = 0.5 * (a_ + b_)
        lm, rm = 0.5 * (a_ + m_), 0.5 * (m_ + b_)
        flm, frm = np.asarray(f(lm), float), np.asarray(f(rm), float)
        left = (m_ - a_) / 6.0 * (fa_ + 4 * flm + fm_)
        right = (b_ - m_) / 6.0 * (fm_ + 4 * frm + fb_)
        err = np.max(np.abs(left + right - S))
        if depth >= max_depth or err <= 15 * eps:
            total = total + left + right + (left + right - S) / 15.0
        else:
            stack.append((m_, b_, fm_, frm, fb_, right, eps / 2, depth + 1))
            stack.append((a_, m_, fa_, flm, fm_, left, eps / 2, depth + 1))
    return total


def gramian_quadrature(A, W, h, tol=1e-13, t0=0.0):
    """Same integral as :func:`finite_horizon_gramian`, over [t0, h], by adaptive Simpson."""
    A = _as_square(A, "A").astype(np.float64)
    W = np.asarray(W, dtype=np.float64)
    if h < 0 or t0 < 0:
        raise DomainError("horizon must be nonnegative")

    def integrand(tau):
        E = expm(A * tau)
        return E @ W @ E.T

    G = adaptive_simpson(integrand, float(t0), float(h), tol=tol)
    return 0.5 * (G + G.T)
