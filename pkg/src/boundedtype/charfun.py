"""Half-plane Nevanlinna characteristics A, B, C, S and the area form S_o.

All integrals start at |z| = 1; functions are never evaluated inside the
unit disk.  Quadrature is the vectorized Gauss-Kronrod rule in ``quad``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import CHAR
from .quad import gk_integrate, QuadResult, _XK, _WK, _WG

LOG2 = math.log(2.0)


class CharQuadratureError(RuntimeError):
    """A characteristic integral missed its tolerance within the budget."""


@dataclass
class MeromorphicFunction:
    """f, f' and the poles of f in the upper half-plane.

    ``log_abs`` and ``rho`` may be supplied when f overflows a double
    (e.g. exponentials or modular functions near cusps); otherwise they are
    derived from ``eval``/``deriv``.
    """
    eval: Callable
    deriv: Callable
    poles: list = field(default_factory=list)      # [(w, multiplicity)]
    name: str = "f"
    domain_tag: str = "closed upper half-plane"
    log_abs: Callable | None = None
    rho: Callable | None = None
    zeros: list = field(default_factory=list)       # optional, used only for splitting

    def __call__(self, z):
        return self.eval(np.asarray(z, dtype=complex))

    def log_abs_value(self, z):
        z = np.asarray(z, dtype=complex)
        if self.log_abs is not None:
            return np.asarray(self.log_abs(z), dtype=float)
        v = self.eval(z)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            big = ~np.isfinite(v) | (np.abs(v) > CHAR.big)
            out = np.log(np.abs(v))
            # huge values: log|f| = -log|1/f|
            if np.any(big):
                inv = 1.0 / v[big]
                out[big] = -np.log(np.abs(inv))
        return out

    def log_plus(self, z):
        return np.maximum(self.log_abs_value(z), 0.0)

    def spherical(self, z):
        z = np.asarray(z, dtype=complex)
        if self.rho is not None:
            return np.asarray(self.rho(z), dtype=float)
        v = self.eval(z)
        d = self.deriv(z)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            av = np.abs(v)
            out = np.abs(d) / (1.0 + av * av)
            big = av > 1.0
            # |f'|/|f|^2 / (1 + 1/|f|^2) keeps the quotient finite
            out = np.where(big, np.abs(d) / av / av / (1.0 + 1.0 / (av * av)), out)
            out = np.where(np.isfinite(av), out, 0.0)
        return out


# -- corpus -------------------------------------------------------------------

def constant(c) -> MeromorphicFunction:
    c = complex(c)
    return MeromorphicFunction(lambda z: np.full(np.shape(z), c, dtype=complex),
                               lambda z: np.zeros(np.shape(z), dtype=complex),
                               [], f"const({c})")


def identity() -> MeromorphicFunction:
    return MeromorphicFunction(lambda z: np.asarray(z, dtype=complex),
                               lambda z: np.ones(np.shape(z), dtype=complex), [], "z")


def exp_neg_iz(a=1.0) -> MeromorphicFunction:
    """e^{-iaz}; |f(x+iy)| = e^{a y}."""
    def rho(z):
        y = a * np.imag(z)
        return a / (2.0 * np.cosh(y))
    return MeromorphicFunction(lambda z: np.exp(-1j * a * z),
                               lambda z: -1j * a * np.exp(-1j * a * z), [],
                               f"exp(-i{a}z)", log_abs=lambda z: a * np.imag(z), rho=rho)


def mobius(a, b, c, d) -> MeromorphicFunction:
    a, b, c, d = (complex(v) for v in (a, b, c, d))
    det = a * d - b * c
    if det == 0:
        raise ValueError("degenerate Mobius map")
    poles = []
    if c != 0:
        p = -d / c
        if p.imag >= 0:
            poles.append((p, 1))
    return MeromorphicFunction(lambda z: (a * z + b) / (c * z + d),
                               lambda z: det / (c * z + d) ** 2, poles,
                               f"mobius({a},{b},{c},{d})")


def product(f1, f2, poles=None) -> MeromorphicFunction:
    la = None
    if f1.log_abs is not None or f2.log_abs is not None:
        la = lambda z: f1.log_abs_value(z) + f2.log_abs_value(z)  # noqa: E731
    return MeromorphicFunction(
        lambda z: f1(z) * f2(z),
        lambda z: f1.deriv(z) * f2(z) + f1(z) * f2.deriv(z),
        list(f1.poles) + list(f2.poles) if poles is None else poles,
        f"({f1.name})*({f2.name})", log_abs=la)


def add(f1, f2, poles=None) -> MeromorphicFunction:
    return MeromorphicFunction(
        lambda z: f1(z) + f2(z), lambda z: f1.deriv(z) + f2.deriv(z),
        list(f1.poles) + list(f2.poles) if poles is None else poles,
        f"({f1.name})+({f2.name})")


def reciprocal_shift(f, a, zeros_of_f_minus_a=()) -> MeromorphicFunction:
    """1/(f - a); its poles are the a-points of f (supplied by the caller)."""
    a = complex(a)

    def ev(z):
        with np.errstate(divide="ignore", invalid="ignore"):
            return 1.0 / (f(z) - a)

    def de(z):
        with np.errstate(divide="ignore", invalid="ignore"):
            return -f.deriv(z) / (f(z) - a) ** 2

    def log_abs(z):
        la = f.log_abs_value(z)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            small = la < 20.0
            v = f(np.where(small, z, 0))
            out = np.where(small, -np.log(np.abs(v - a)), -la)
        return out

    return MeromorphicFunction(ev, de, list(zeros_of_f_minus_a), f"1/({f.name}-{a})",
                               log_abs=log_abs, rho=f.spherical if a == 0 else None,
                               zeros=list(f.poles))


# -- characteristics -------------------------------------------------------------

def _near_contour_real(points, snap):
    out = []
    for w, *_ in points:
        w = complex(w)
        if abs(w.imag) < snap:
            out.append(abs(w.real))
    return out


def _near_contour_arc(points, r, snap):
    out = []
    for w, *_ in points:
        w = complex(w)
        if abs(abs(w) - r) < snap and w.imag >= -snap:
            out.append(min(max(math.atan2(w.imag, w.real), 0.0), math.pi))
    return out


def _finish(res: QuadResult, what: str, strict: bool):
    if strict and not res.converged:
        raise CharQuadratureError(f"{what}: err={res.error:.3e} not within tolerance")
    return float(np.real(res.value)), float(res.error)


def char_A_full(f: MeromorphicFunction, r: float, rtol=CHAR.rtol_ab, strict=True):
    if r <= 1:
        raise ValueError("r must exceed 1")

    def g(t):
        w = 1.0 / t ** 2 - 1.0 / r ** 2
        return w * (f.log_plus(t + 0j) + f.log_plus(-t + 0j)) / math.pi

    n_oct = max(1, int(math.ceil(math.log2(r))))
    pts = list(np.geomspace(1.0, r, 4 * n_oct + 1))
    pts += [t for t in _near_contour_real(f.poles + f.zeros, CHAR.pole_snap) if 1 < t < r]
    res = gk_integrate(g, sorted(pts), atol=1e-14, rtol=rtol)
    return _finish(res, f"A({r})", strict)


def char_B_full(f: MeromorphicFunction, r: float, rtol=CHAR.rtol_ab, strict=True):
    if r <= 1:
        raise ValueError("r must exceed 1")

    def g(th):
        return f.log_plus(r * np.exp(1j * th)) * np.sin(th) * (2.0 / (math.pi * r))

    pts = list(np.linspace(0.0, math.pi, 17))
    pts += _near_contour_arc(f.poles + f.zeros, r, CHAR.pole_snap)
    res = gk_integrate(g, sorted(pts), atol=1e-14, rtol=rtol)
    return _finish(res, f"B({r})", strict)


def char_A(f, r):
    return char_A_full(f, r)[0]


def char_B(f, r):
    return char_B_full(f, r)[0]


def char_C(f: MeromorphicFunction, r: float) -> float:
    """2 * sum over poles 1 < |w| < r of (1/|w| - |w|/r^2) sin(arg w)."""
    s = 0.0
    for w, mult in f.poles:
        w = complex(w)
        aw = abs(w)
        if 1.0 < aw < r and w.imag > 0:
            s += mult * (1.0 / aw - aw / r ** 2) * (w.imag / aw)
    return 2.0 * s


def _theta_panels(floor=CHAR.theta_floor):
    """Breakpoints on [0, pi], graded dyadically toward both ends."""
    j = int(round(-math.log2(floor)))
    left = (math.pi / 2) * 2.0 ** (-np.arange(j, 0, -1))
    mid = np.linspace(math.pi / 4, 3 * math.pi / 4, 5)
    return np.unique(np.concatenate([[0.0], left, mid, math.pi - left[::-1], [math.pi]]))


def inner_area(f: MeromorphicFunction, t, rtol=CHAR.rtol_so, floor=CHAR.theta_floor):
    """int_0^pi rho_f(t e^{i theta})^2 sin(theta) d theta for an array of t."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    pts = _theta_panels(floor)
    vals = np.empty(t.size)
    errs = np.empty(t.size)
    for i, ti in enumerate(t):
        def g(th, ti=ti):
            return f.spherical(ti * np.exp(1j * th)) ** 2 * np.sin(th)
        res = gk_integrate(g, pts, atol=1e-15, rtol=rtol, max_panels=20000)
        vals[i], errs[i] = float(res.value), float(res.error)
    return vals, errs


@dataclass
class AreaProfile:
    """Samples of the inner angular integral, reused for every r."""
    t_nodes: np.ndarray
    weights: np.ndarray      # Kronrod weights (absolute) on [1, r_max]
    gvals: np.ndarray
    gerrs: np.ndarray
    outer_err: float


def _outer_nodes(r_max, panels_per_octave):
    """Kronrod nodes on geometric panels of [1, r_max]."""
    n_oct = max(1, int(math.ceil(math.log2(r_max))))
    edges = np.geomspace(1.0, r_max, panels_per_octave * n_oct + 1)
    a, b = edges[:-1], edges[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    t = (mid[:, None] + half[:, None] * _XK[None, :]).ravel()
    w = (half[:, None] * _WK[None, :]).ravel()
    return edges, t, w


def area_profile(f, r_max, panels_per_octave=3, rtol=CHAR.rtol_so) -> AreaProfile:
    edges, t, w = _outer_nodes(r_max, panels_per_octave)
    g, ge = inner_area(f, t, rtol)
    return AreaProfile(t, w, g, ge, 0.0)


def _so_from_profile(ap: AreaProfile, r):
    # r must be an outer panel edge (true for dyadic r on a dyadic profile)
    t, w, g = ap.t_nodes, ap.weights, ap.gvals
    sel = t <= r
    kern = (1.0 - (t / r) ** 2) * g / math.pi
    val = float(np.sum(w[sel] * kern[sel]))
    n = t.size // 15
    wg = (w.reshape(n, 15) / _WK[None, :] * _WG[None, :]).ravel()
    valg = float(np.sum(wg[sel] * kern[sel]))
    err = abs(val - valg) + float(np.sum(w[sel] * ap.gerrs[sel])) / math.pi
    return val, err


def ahlfors_shimizu_full(f, r, grid_policy=None):
    """S_o(r) and an error estimate.

    ``grid_policy`` may set ``panels_per_octave`` (outer geometric panels)
    and ``rtol`` (inner angular integral).
    """
    pol = {"panels_per_octave": 3, "rtol": CHAR.rtol_so}
    pol.update(grid_policy or {})
    ap = area_profile(f, float(r), pol["panels_per_octave"], pol["rtol"])
    return _so_from_profile(ap, r)


def ahlfors_shimizu(f, r, grid_policy=None) -> float:
    return ahlfors_shimizu_full(f, r, grid_policy)[0]


# -- table ------------------------------------------------------------------------

@dataclass
class CharacteristicTable:
    r_grid: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    S: np.ndarray
    So: np.ndarray
    err: np.ndarray

    def rows(self):
        for i in range(self.r_grid.size):
            yield (self.r_grid[i], self.A[i], self.B[i], self.C[i], self.S[i],
                   self.So[i], self.err[i])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r", "A", "B", "C", "S", "So", "err"])
            for row in self.rows():
                w.writerow([repr(float(v)) for v in row])

    def so_monotone(self, slack=2.0) -> bool:
        d = np.diff(self.So)
        tol = slack * (self.err[1:] + self.err[:-1])
        return bool(np.all(d >= -tol))


def characteristic_table(f, r_grid, with_so=True, with_s=True, grid_policy=None):
    """A, B, C, S and S_o on a grid of r values (powers of two share work)."""
    r_grid = np.asarray(sorted(r_grid), dtype=float)
    n = r_grid.size
    A = np.zeros(n); B = np.zeros(n); C = np.zeros(n)
    err = np.zeros(n); So = np.full(n, np.nan)
    if with_s:
        for i, r in enumerate(r_grid):
            A[i], ea = char_A_full(f, r)
            B[i], eb = char_B_full(f, r)
            C[i] = char_C(f, r)
            err[i] = ea + eb
    S = A + B + C
    if with_so:
        pol = {"panels_per_octave": 3, "rtol": CHAR.rtol_so}
        pol.update(grid_policy or {})
        dyadic = np.all(np.abs(np.log2(r_grid) - np.round(np.log2(r_grid))) < 1e-12)
        if dyadic:
            ap = area_profile(f, float(r_grid[-1]), pol["panels_per_octave"], pol["rtol"])
            for i, r in enumerate(r_grid):
                So[i], e = _so_from_profile(ap, r)
                err[i] += e
        else:
            for i, r in enumerate(r_grid):
                So[i], e = ahlfors_shimizu_full(f, r, pol)
                err[i] += e
    return CharacteristicTable(r_grid, A, B, C, S, So, err)


# -- property checks --------------------------------------------------------------

@dataclass
class SubadditivityReport:
    r: float
    rows: list          # (name, lhs, rhs, ok)
    ok: bool


def subadditivity_check(f1, f2, r, prod=None, summ=None, tol=1e-6):
    """D(f1 f2) <= D(f1)+D(f2) and D(f1+f2) <= D(f1)+D(f2)+log 2, D in A, B, C."""
    prod = prod or product(f1, f2)
    summ = summ or add(f1, f2)
    rows = []
    for name, fn in (("A", lambda f: char_A_full(f, r)),
                     ("B", lambda f: char_B_full(f, r)),
                     ("C", lambda f: (char_C(f, r), 0.0))):
        d1, e1 = fn(f1)
        d2, e2 = fn(f2)
        dp, ep = fn(prod)
        ds, es = fn(summ)
        slack = tol * (1 + abs(d1) + abs(d2)) + e1 + e2 + ep + es
        rows.append((f"{name}(f1*f2)", dp, d1 + d2, dp <= d1 + d2 + slack))
        rows.append((f"{name}(f1+f2)", ds, d1 + d2 + LOG2, ds <= d1 + d2 + LOG2 + slack))
    return SubadditivityReport(r, rows, all(r_[3] for r_ in rows))


@dataclass
class PoissonReport:
    zeta: complex
    lhs: float
    rhs: float
    tail_budget: float
    holds: bool
    tail_dominates: bool


def poisson_majorization_check(f, zeta, T=1e3, rtol=1e-8):
    """log+|f(zeta)| <= (Im zeta/pi) int log+|f(t)|/|t-zeta|^2 dt (truncated to [-T,T])."""
    zeta = complex(zeta)
    if zeta.imag <= 0:
        raise ValueError("zeta must lie in the upper half-plane")
    y = zeta.imag
    lhs = float(f.log_plus(np.array([zeta]))[0])

    def g(t):
        return f.log_plus(t + 0j) * y / (math.pi * np.abs(t - zeta) ** 2)

    pts = np.unique(np.concatenate([
        -np.geomspace(T, 1e-3, 40), [0.0], np.geomspace(1e-3, T, 40),
        [zeta.real - y, zeta.real, zeta.real + y]]))
    pts = pts[(pts >= -T) & (pts <= T)]
    res = gk_integrate(g, pts, atol=1e-12, rtol=rtol, max_panels=400000)
    rhs = float(res.value)
    # tail: bound the integrand's decay using the endpoint values
    edge = float(np.max(f.log_plus(np.array([T + 0j, -T + 0j]))))
    tail = edge * 2.0 * y / (math.pi * T) + res.error
    holds = lhs <= rhs + tail
    return PoissonReport(zeta, lhs, rhs, tail, bool(holds),
                         bool(tail > 0.5 * max(rhs, 1e-300) and tail > 1e-12))


@dataclass
class GrowthVerdict:
    verdict: str
    flat_residual: float
    log_slope: float
    log_tstat: float
    log_residual: float
    power_exponent: float
    power_tstat: float


def _linfit(x, y):
    X = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    res = y - X @ coef
    dof = max(1, x.size - 2)
    s2 = float(res @ res) / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    se = math.sqrt(max(cov[1, 1], 0.0))
    t = coef[1] / se if se > 0 else (math.inf if coef[1] > 0 else 0.0)
    return coef, t, res


def bounded_type_indicator(So_values, r_grid) -> GrowthVerdict:
    """Flat versus increasing fits of S_o(r).

    bounded: constant fit has relative rms residual < 5%;
    growing: log-r or power-law fit has positive slope with t-statistic > 4.
    """
    S = np.asarray(So_values, dtype=float)
    r = np.asarray(r_grid, dtype=float)
    scale = float(np.mean(np.abs(S)))
    if scale == 0.0:
        return GrowthVerdict("bounded", 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    flat = float(np.sqrt(np.mean((S - S.mean()) ** 2)) / scale)
    lr = np.log(r)
    (a, b), tb, res = _linfit(lr, S)
    lres = float(np.sqrt(np.mean(res ** 2)) / scale)
    if np.all(S > 0):
        (pa, pb), tp, _ = _linfit(lr, np.log(S))
    else:
        pb, tp = 0.0, 0.0
    if flat < 0.05:
        verdict = "bounded"
    elif (b > 0 and tb > 4) or (pb > 0 and tp > 4):
        verdict = "growing"
    else:
        verdict = "inconclusive"
    return GrowthVerdict(verdict, flat, float(b), float(tb), lres, float(pb), float(tp))


def spherical_mobius_covariance(f, z, M):
    """(rho_{f o M}(z), rho_f(M z) |M'(z)|) for an automorphism M of H."""
    (a, b), (c, d) = M
    Mz = (a * z + b) / (c * z + d)
    dM = (a * d - b * c) / (c * z + d) ** 2
    comp = MeromorphicFunction(lambda s: f((a * s + b) / (c * s + d)),
                               lambda s: f.deriv((a * s + b) / (c * s + d))
                               * (a * d - b * c) / (c * s + d) ** 2, [])
    lhs = float(comp.spherical(np.array([z]))[0])
    rhs = float(f.spherical(np.array([Mz]))[0]) * abs(dM)
    return lhs, rhs
