"""The elliptic modular function lambda.

lambda(tau) = theta_2(q)^4 / theta_3(q)^4 with nome q = exp(i*pi*tau).  Points
are first reduced into the standard fundamental domain of SL2(Z); the
effect of the reducing matrix on lambda is one of the six anharmonic maps
u, 1/u, 1-u, 1/(1-u), u/(u-1), (u-1)/u, tracked as a 2x2 integer matrix.

Values near the cusps can overflow a double, so ``log_abs_lambda`` and
``spherical_derivative`` never form lambda itself when it is huge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import MODULAR


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


class ConvergenceError(ArithmeticError):
    """Series evaluated outside its convergence guard."""


@dataclass(frozen=True)
class LambdaValue:
    value: np.ndarray | complex
    derivative: np.ndarray | complex
    precision_warning: bool = False


def nome(tau):
    tau = np.asarray(tau, dtype=complex)
    if np.any(tau.imag <= 0):
        raise DomainError("nome requires Im tau > 0")
    out = np.exp(1j * np.pi * tau)
    return out if out.ndim else complex(out)


def _n_terms(qabs_max, rtol):
    # number of terms n >= 0 with |q|^(n(n+1)) still above rtol
    if qabs_max <= 0.0:
        return 1
    lq = np.log(qabs_max)
    n = 1
    while n * (n + 1) * lq > np.log(rtol) - 1.0:
        n += 1
        if n > 10_000:
            break
    return n + 1


def _check_guard(q, guard):
    if np.any(np.abs(q) > 1.0 - guard):
        raise ConvergenceError(f"|q| exceeds 1 - {guard}")


def theta3(q, rtol=MODULAR.series_rtol, guard=MODULAR.q_guard):
    """theta_3(q) = 1 + 2 sum_{n>=1} q^(n^2)."""
    q = np.asarray(q, dtype=complex)
    _check_guard(q, guard)
    qmax = float(np.max(np.abs(q))) if q.size else 0.0
    out = np.ones_like(q)
    n = 1
    while True:
        term = 2.0 * q ** (n * n)
        out = out + term
        if qmax == 0.0 or qmax ** (n * n) < rtol * 1e-2:
            break
        n += 1
    return out if out.ndim else complex(out)


def theta2(q, rtol=MODULAR.series_rtol, guard=MODULAR.q_guard):
    """theta_2(q) = 2 sum_{n>=0} q^((n+1/2)^2), principal branch of q^(1/4)."""
    q = np.asarray(q, dtype=complex)
    _check_guard(q, guard)
    qmax = float(np.max(np.abs(q))) if q.size else 0.0
    s = np.zeros_like(q)
    n = 0
    while True:
        s = s + q ** (n * (n + 1))
        if qmax == 0.0 or qmax ** ((n + 1) * (n + 2)) < rtol * 1e-2:
            break
        n += 1
    out = 2.0 * q ** 0.25 * s
    return out if out.ndim else complex(out)


def _series(q, nterms):
    """Return R, R_q with lambda = q*R(q) and R_q = dR/dq."""
    p = np.zeros_like(q)
    dp = np.zeros_like(q)
    t3 = np.ones_like(q)
    dt3 = np.zeros_like(q)
    for n in range(nterms):
        e = n * (n + 1)
        p += q ** e
        if e:
            dp += e * q ** (e - 1)
        if n >= 1:
            t3 += 2.0 * q ** (n * n)
            dt3 += 2.0 * n * n * q ** (n * n - 1)
    ratio = p / t3
    r = 16.0 * ratio ** 4
    r_q = 64.0 * ratio ** 3 * (dp * t3 - p * dt3) / t3 ** 2
    return r, r_q


# anharmonic generators acting on u = lambda(reduced point)
_SHIFT = np.array([[1, 0], [1, -1]])     # lambda(tau+1) = u/(u-1)
_INVERT = np.array([[-1, 1], [0, 1]])    # lambda(-1/tau) = 1-u


def _prepare(tau, min_im):
    tau = np.asarray(tau, dtype=complex)
    if np.any(~np.isfinite(tau)):
        raise DomainError("non-finite tau")
    if np.any(tau.imag <= 0):
        raise DomainError("lambda requires Im tau > 0")
    if min_im is not None and np.any(tau.imag < min_im):
        raise DomainError(f"Im tau below the near-real threshold {min_im:g}")
    return tau


def _reduce_with_matrix(tau, max_steps):
    """Reduce into |Re| <= 1/2, |tau| >= 1, tracking the SL2(Z) matrix."""
    tau = np.asarray(tau, dtype=complex)
    shape = tau.shape
    t = tau.ravel().copy()
    n = t.size
    g = np.broadcast_to(np.eye(2, dtype=np.int64), (n, 2, 2)).copy()
    M = np.broadcast_to(np.eye(2), (n, 2, 2)).copy()
    steps = np.zeros(n, dtype=int)
    active = np.ones(n, dtype=bool)
    for _ in range(4 * max_steps + 4):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        tt = t[idx]
        k = np.round(tt.real)
        tt = tt - k
        odd = (np.abs(k) % 2) == 1
        if odd.any():
            g[idx[odd]] = g[idx[odd]] @ _SHIFT
        # M <- T^{-k} M
        M[idx, 0, 0] -= k * M[idx, 1, 0]
        M[idx, 0, 1] -= k * M[idx, 1, 1]
        small = np.abs(tt) < 1.0 - 1e-15
        t[idx] = tt
        active[idx[~small]] = False
        si = idx[small]
        if si.size:
            t[si] = -1.0 / t[si]
            g[si] = g[si] @ _INVERT
            # M <- S M with S = [[0, -1], [1, 0]]
            a0, b0 = M[si, 0, 0].copy(), M[si, 0, 1].copy()
            M[si, 0, 0] = -M[si, 1, 0]
            M[si, 0, 1] = -M[si, 1, 1]
            M[si, 1, 0] = a0
            M[si, 1, 1] = b0
            steps[si] += 1
    ok = (steps <= max_steps) & ~active
    return (t.reshape(shape), g.reshape(shape + (2, 2)), M.reshape(shape + (2, 2)),
            steps.reshape(shape), ok.reshape(shape))


@dataclass
class _Eval:
    tau: np.ndarray
    tr: np.ndarray
    g: np.ndarray
    M: np.ndarray
    ok: np.ndarray
    q: np.ndarray
    r: np.ndarray
    r_q: np.ndarray


def _evaluate(tau, min_im=MODULAR.min_im, max_steps=MODULAR.max_reduction_steps):
    tau = _prepare(tau, min_im)
    tr, g, M, steps, ok = _reduce_with_matrix(tau, max_steps)
    q = np.exp(1j * np.pi * tr)
    qmax = float(np.max(np.abs(q))) if q.size else 0.0
    if qmax > 1.0 - MODULAR.q_guard:
        ok = ok & (np.abs(q) <= 1.0 - MODULAR.q_guard)
    r, r_q = _series(q, _n_terms(qmax, MODULAR.series_rtol))
    return _Eval(tau, tr, g, M, ok, q, r, r_q)


def _chain(e: _Eval):
    """Return (u, du/dtau_orig) for u = lambda(reduced point)."""
    u = e.q * e.r
    du_dq = e.r + e.q * e.r_q
    du_dtr = 1j * np.pi * e.q * du_dq
    c = e.M[..., 1, 0]
    d = e.M[..., 1, 1]
    dtr = 1.0 / (c * e.tau + d) ** 2
    return u, du_dtr * dtr


def lambda_eval(tau, min_im=MODULAR.min_im) -> LambdaValue:
    """lambda(tau) and dlambda/dtau (may overflow to inf next to cusps)."""
    e = _evaluate(tau, min_im)
    u, du = _chain(e)
    g = e.g
    num = g[..., 0, 0] * u + g[..., 0, 1]
    den = g[..., 1, 0] * u + g[..., 1, 1]
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        val = num / den
        der = det * du / den ** 2
    warn = bool(np.any(~e.ok))
    if np.ndim(val) == 0:
        return LambdaValue(complex(val), complex(der), warn)
    return LambdaValue(val, der, warn)


def lam(tau, min_im=MODULAR.min_im):
    return lambda_eval(tau, min_im).value


def _log_abs_affine(a, b, logq, r):
    """log|a*q*r + b| without forming q when it underflows."""
    out = np.empty(np.broadcast(a, logq).shape)
    a = np.broadcast_to(a, out.shape)
    b = np.broadcast_to(b, out.shape)
    lq = np.broadcast_to(logq, out.shape)
    rr = np.broadcast_to(r, out.shape)
    zero_b = b == 0
    zero_a = a == 0
    with np.errstate(divide="ignore"):
        out[zero_b] = (np.log(np.abs(a[zero_b])) + lq[zero_b].real
                       + np.log(np.abs(rr[zero_b])))
        nb = ~zero_b
        val = a[nb] * np.exp(lq[nb]) * rr[nb] + b[nb]
        out[nb] = np.log(np.abs(val))
        out[zero_a & zero_b] = -np.inf
    return out


def log_abs_lambda(tau, min_im=MODULAR.min_im):
    """log|lambda(tau)|, finite even where lambda overflows or underflows."""
    e = _evaluate(tau, min_im)
    logq = 1j * np.pi * e.tr
    g = e.g
    ln = _log_abs_affine(g[..., 0, 0], g[..., 0, 1], logq, e.r)
    ld = _log_abs_affine(g[..., 1, 0], g[..., 1, 1], logq, e.r)
    out = ln - ld
    return out if out.ndim else float(out)


def log_plus_abs_lambda(tau, min_im=MODULAR.min_im):
    return np.maximum(log_abs_lambda(tau, min_im), 0.0)


def spherical_derivative(tau, min_im=MODULAR.min_im):
    """rho_lambda(tau) = |lambda'| / (1 + |lambda|^2), overflow-free.

    The spherical derivative is invariant under f -> 1/f, so whichever of
    g, 1/g is bounded by 1 at the reduced point is differentiated.
    """
    e = _evaluate(tau, min_im)
    u, du = _chain(e)
    g = e.g.astype(float)
    num = g[..., 0, 0] * u + g[..., 0, 1]
    den = g[..., 1, 0] * u + g[..., 1, 1]
    flip = np.abs(num) > np.abs(den)
    a = np.where(flip, g[..., 1, 0], g[..., 0, 0])
    b = np.where(flip, g[..., 1, 1], g[..., 0, 1])
    c = np.where(flip, g[..., 0, 0], g[..., 1, 0])
    d = np.where(flip, g[..., 0, 1], g[..., 1, 1])
    den2 = c * u + d
    val = (a * u + b) / den2
    der = (a * d - b * c) * du / den2 ** 2
    out = np.abs(der) / (1.0 + np.abs(val) ** 2)
    return out if out.ndim else float(out)


spherical_derivative_lambda = spherical_derivative


def six_values(a):
    """The orbit of a under the anharmonic group, in a fixed order."""
    a = complex(a)
    if a == 0 or a == 1:
        raise DomainError("six_values is undefined at 0 and 1")
    return [a, 1 / a, 1 - a, 1 / (1 - a), a / (a - 1), (a - 1) / a]


def mobius(M, tau):
    (a, b), (c, d) = M
    return (a * tau + b) / (c * tau + d)
