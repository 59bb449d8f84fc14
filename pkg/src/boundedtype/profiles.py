"""Boundary profiles m, their tame regularizations and logarithmic integrals.

A profile is an even, positive function on R that does not increase on
[0, inf).  Two kinds exist:

* ``analytic``: a closed-form expression in ``x`` (exp, sqrt, abs, log,
  min, max, powers), differentiated symbolically;
* ``piecewise``: constant on a table of plateaus, joined by quintic
  smoothstep transitions (C^2, monotone).

Values are also available in log form (``log_eval``) because the
profiles used in the experiments underflow a double long before the
ranges we integrate over.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Callable, Sequence

import numpy as np
import sympy as sp
from scipy.optimize import minimize_scalar

from .config import PROFILE
from .quad import gk_integrate

LOG2 = math.log(2.0)


class ProfileError(ValueError):
    """A profile descriptor fails positivity, evenness or monotonicity."""

    def __init__(self, message, x=None):
        super().__init__(message if x is None else f"{message} at x={x:.6g}")
        self.x = x


class ProfileSyntaxError(ProfileError):
    """The descriptor is outside the expression grammar."""


# -- expression grammar ------------------------------------------------------

_X = sp.Symbol("x", real=True)
_ALLOWED = {
    "x": _X, "exp": sp.exp, "sqrt": sp.sqrt, "abs": sp.Abs, "log": sp.log,
    "min": sp.Min, "max": sp.Max, "e": sp.E, "pi": sp.pi,
}
_ALLOWED_FUNCS = (sp.exp, sp.log, sp.Abs, sp.Min, sp.Max, sp.Pow, sp.Add, sp.Mul)


def parse_expression(text: str) -> sp.Expr:
    from sympy.parsing.sympy_parser import parse_expr, standard_transformations
    text = text.replace("^", "**")
    try:
        expr = parse_expr(text, local_dict=dict(_ALLOWED), global_dict={
            "Integer": sp.Integer, "Float": sp.Float, "Rational": sp.Rational,
            "Symbol": sp.Symbol}, transformations=standard_transformations)
    except Exception as exc:  # sympy raises a zoo of types here
        raise ProfileSyntaxError(f"cannot parse profile expression {text!r}: {exc}") from None
    if not isinstance(expr, sp.Expr) or expr.free_symbols - {_X}:
        raise ProfileSyntaxError(f"profile expression may only use the variable x: {text!r}")
    for node in sp.preorder_traversal(expr):
        if isinstance(node, sp.Function) and not isinstance(node, (sp.exp, sp.log, sp.Abs, sp.Min, sp.Max)):
            raise ProfileSyntaxError(f"function {node.func} not in the profile grammar")
    return expr


_NP_EXTRA = {"Heaviside": lambda t, h0=0.5: np.heaviside(t, h0),
             "DiracDelta": lambda t, *a: np.zeros_like(t)}


def _lambdify(expr):
    # DiracDelta terms from |x|'' live on a null set; drop them
    expr = expr.replace(lambda e: isinstance(e, sp.DiracDelta), lambda e: sp.S.Zero)
    f = sp.lambdify(_X, expr, modules=[_NP_EXTRA, "numpy"])

    def g(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            out = np.asarray(f(x), dtype=float)
        return np.broadcast_to(out, x.shape).copy() if out.shape != x.shape else out
    return g


# -- piecewise-tame building blocks -----------------------------------------

def smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return np.clip(s * s * s * (10.0 - 15.0 * s + 6.0 * s * s), 0.0, 1.0)


def smoothstep_d1(s):
    s = np.clip(s, 0.0, 1.0)
    return 30.0 * s * s * (1.0 - s) ** 2


def smoothstep_d2(s):
    s = np.clip(s, 0.0, 1.0)
    return 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s)


def plateau_interval(k: int) -> tuple[float, float]:
    """[2^k - 2^(k-3), 2^k + 2^(k-2)], the k-th plateau (k >= 3)."""
    return 2.0 ** k - 2.0 ** (k - 3), 2.0 ** k + 2.0 ** (k - 2)


@dataclass
class PlateauTable:
    """Plateaus on x >= 0: rows (lo, hi, log value), sorted, first lo = 0."""
    lo: np.ndarray
    hi: np.ndarray
    logv: np.ndarray

    @classmethod
    def from_rows(cls, rows, log_values=False):
        rows = sorted(rows, key=lambda r: r[0])
        lo = np.array([r[0] for r in rows], dtype=float)
        hi = np.array([r[1] for r in rows], dtype=float)
        v = np.array([r[2] for r in rows], dtype=float)
        if lo[0] != 0.0:
            raise ProfileError("first plateau must start at x = 0")
        if np.any(hi <= lo) or np.any(lo[1:] <= hi[:-1]):
            raise ProfileError("plateaus must be disjoint, increasing intervals")
        if log_values:
            logv = v
        else:
            if np.any(v <= 0):
                raise ProfileError("plateau values must be positive")
            logv = np.log(v)
        if np.any(np.diff(logv) > 0):
            i = int(np.argmax(np.diff(logv) > 0))
            raise ProfileError("plateau values must not increase", lo[i + 1])
        return cls(lo, hi, logv)

    @classmethod
    def read(cls, path):
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = [p for p in line.replace(",", " ").split()]
                rows.append(tuple(float(p) for p in parts[:3]))
        return cls.from_rows(rows)

    def rows(self):
        return [(float(a), float(b), float(np.exp(v)))
                for a, b, v in zip(self.lo, self.hi, self.logv)]


@dataclass
class Profile:
    """Even positive boundary profile with first and second derivatives."""
    kind: str                                   # "analytic" or "piecewise"
    descriptor: str
    _eval: Callable
    _d1: Callable
    _d2: Callable
    _log: Callable
    plateaus: PlateauTable | None = None
    smoothing: list = field(default_factory=list)

    def __call__(self, x):
        return self._eval(np.asarray(x, dtype=float))

    def eval(self, x):
        return self(x)

    def deriv1(self, x):
        return self._d1(np.asarray(x, dtype=float))

    def deriv2(self, x):
        return self._d2(np.asarray(x, dtype=float))

    def log_eval(self, x):
        return self._log(np.asarray(x, dtype=float))

    def log_minus(self, x):
        """log^- m(x) = max(0, -log m(x))."""
        return np.maximum(-self.log_eval(x), 0.0)

    @property
    def m0(self) -> float:
        return float(self(0.0))

    def plateau_value(self, k: int) -> float:
        return float(self(2.0 ** k))

    def to_dict(self):
        d = {"kind": self.kind, "descriptor": self.descriptor}
        if self.plateaus is not None:
            d["plateaus"] = [[a, b, v] for a, b, v in zip(
                self.plateaus.lo.tolist(), self.plateaus.hi.tolist(),
                self.plateaus.logv.tolist())]
        return d


def _audit_grid(xmax=2.0 ** 12, n=4001):
    lin = np.linspace(0.0, 16.0, 1601)
    geo = np.geomspace(16.0, xmax, n)
    return np.unique(np.concatenate([lin, geo]))


def audit(profile: Profile, xmax=2.0 ** 12):
    """Raise ProfileError at the first audit failure."""
    x = _audit_grid(xmax)
    lv = profile.log_eval(x)
    bad = ~np.isfinite(lv) | np.isnan(lv)
    if bad.any():
        raise ProfileError("profile is not positive", float(x[np.argmax(bad)]))
    lvm = profile.log_eval(-x)
    # |m(x) - m(-x)| <= tol * m(x)  <=>  |exp(lvm - lv) - 1| <= tol
    ev = np.abs(np.expm1(lvm - lv)) > PROFILE.even_rtol
    if ev.any():
        raise ProfileError("profile is not even", float(x[np.argmax(ev)]))
    inc = np.diff(lv) > 1e-12
    if inc.any():
        raise ProfileError("profile increases on x >= 0", float(x[1:][np.argmax(inc)]))


def _central(f, x, order):
    h = PROFILE.fd_step * (1.0 + np.abs(x))
    if order == 1:
        return (f(x + h) - f(x - h)) / (2 * h)
    return (f(x + h) - 2 * f(x) + f(x - h)) / (h * h)


def _analytic(text: str) -> Profile:
    expr = parse_expression(text)
    m = _lambdify(expr)
    try:
        d1e = sp.diff(expr, _X)
        d2e = sp.diff(d1e, _X)
        d1, d2 = _lambdify(d1e), _lambdify(d2e)
    except Exception:
        d1 = lambda x: _central(m, x, 1)   # noqa: E731
        d2 = lambda x: _central(m, x, 2)   # noqa: E731
    lexpr = sp.expand_log(sp.log(expr), force=True)
    lg = _lambdify(lexpr)

    def log_eval(x):
        out = lg(x)
        # expansion can leave log(Min(...)) that overflows nowhere; fall back
        bad = ~np.isfinite(out)
        if bad.any():
            with np.errstate(divide="ignore"):
                out[bad] = np.log(m(x[bad]))
        return out

    def evalf(x):
        out = m(x)
        return out

    return Profile("analytic", text, evalf, d1, d2, log_eval)


def _piecewise(table: PlateauTable, descriptor: str) -> Profile:
    lo, hi, logv = table.lo, table.hi, table.logv
    # transition j joins plateau j (ending at hi[j]) to plateau j+1 (starting lo[j+1])
    t0, t1 = hi[:-1], lo[1:]
    smoothing = [{"x0": float(a), "x1": float(b), "from": float(u), "to": float(v),
                  "poly": "6s^5-15s^4+10s^3"}
                 for a, b, u, v in zip(t0, t1, logv[:-1], logv[1:])]
    edges = np.empty(2 * lo.size)
    edges[0::2] = lo
    edges[1::2] = hi

    def locate(ax):
        seg = np.searchsorted(edges, ax, side="right") - 1
        seg = np.clip(seg, 0, edges.size - 1)
        on_plateau = (seg % 2) == 0
        j = seg // 2
        return on_plateau, j

    def parts(x):
        ax = np.abs(x)
        on_plateau, j = locate(ax)
        last = j >= lo.size - 1
        on_plateau = on_plateau | last
        jt = np.minimum(j, lo.size - 2) if lo.size > 1 else np.zeros_like(j)
        if lo.size > 1:
            L = t1[jt] - t0[jt]
            s = (ax - t0[jt]) / L
            la, lb = logv[jt], logv[jt + 1]
        else:
            L = np.ones_like(ax)
            s = np.zeros_like(ax)
            la = lb = np.full_like(ax, logv[0])
        return ax, on_plateau, j, s, L, la, lb

    def log_eval(x):
        x = np.asarray(x, dtype=float)
        ax, on_p, j, s, L, la, lb = parts(x)
        S = smoothstep(s)
        with np.errstate(divide="ignore"):
            trans = np.logaddexp(la + np.log1p(-S), lb + np.log(S))
        return np.where(on_p, logv[np.minimum(j, lo.size - 1)], trans)

    def evalf(x):
        return np.exp(log_eval(x))

    def d1(x):
        x = np.asarray(x, dtype=float)
        ax, on_p, j, s, L, la, lb = parts(x)
        dv = np.exp(lb) - np.exp(la)
        out = dv * smoothstep_d1(s) / L * np.sign(x)
        return np.where(on_p, 0.0, out)

    def d2(x):
        x = np.asarray(x, dtype=float)
        ax, on_p, j, s, L, la, lb = parts(x)
        dv = np.exp(lb) - np.exp(la)
        out = dv * smoothstep_d2(s) / L ** 2
        return np.where(on_p, 0.0, out)

    return Profile("piecewise", descriptor, evalf, d1, d2, log_eval,
                   plateaus=table, smoothing=smoothing)


def make_profile(spec, audit_profile=True) -> Profile:
    """Build a Profile from an expression string, a PlateauTable, or rows."""
    if isinstance(spec, Profile):
        prof = spec
    elif isinstance(spec, str):
        prof = _analytic(spec)
    elif isinstance(spec, PlateauTable):
        prof = _piecewise(spec, "plateau-table")
    else:
        prof = _piecewise(PlateauTable.from_rows(spec), "plateau-table")
    if audit_profile:
        audit(prof)
    return prof


def profile_from_file(path) -> Profile:
    return make_profile(PlateauTable.read(path))


# -- tame regularizations ----------------------------------------------------

K_MAX_PLATEAU = 40


def _standard_table(v0_log, vk_log, kmax=K_MAX_PLATEAU):
    lo = [0.0] + [plateau_interval(k)[0] for k in range(3, kmax + 1)]
    hi = [1.0] + [plateau_interval(k)[1] for k in range(3, kmax + 1)]
    logv = np.array([v0_log] + [vk_log(k) for k in range(3, kmax + 1)], dtype=float)
    # monotone by construction for monotone m; guard against rounding
    logv = np.minimum.accumulate(logv)
    return PlateauTable(np.array(lo), np.array(hi), logv)


def tame_minorant(m: Profile, kmax=K_MAX_PLATEAU) -> Profile:
    """m_*: m(8) on |x| <= 1, min{m(2^(k+3)), 2^(-k-3)} on plateau k >= 3."""
    v0 = float(m.log_eval(8.0))
    table = _standard_table(
        v0, lambda k: min(float(m.log_eval(2.0 ** (k + 3))), -(k + 3) * LOG2), kmax)
    out = _piecewise(table, f"tame_minorant({m.descriptor})")
    return out


class MajorantPreconditionError(ProfileError):
    pass


def tends_to_zero(m: Profile, jmax=PROFILE.audit_jmax) -> bool:
    lv = m.log_eval(2.0 ** np.arange(0, jmax + 1))
    tail = lv[-6:]
    return bool(np.all(np.diff(tail) < 0) and lv[-1] < lv[0] - 1.0)


def tame_majorant(m: Profile, kmax=K_MAX_PLATEAU) -> Profile:
    """m^*: m(0) on |x| <= 1, m(2^(k-3)) on plateau k >= 3."""
    if not tends_to_zero(m):
        raise MajorantPreconditionError("profile does not tend to 0 along the dyadic grid")
    v0 = float(m.log_eval(0.0))
    table = _standard_table(v0, lambda k: float(m.log_eval(2.0 ** (k - 3))), kmax)
    return _piecewise(table, f"tame_majorant({m.descriptor})")


# -- tameness -------------------------------------------------------------------

@dataclass
class TamenessReport:
    is_tame: bool
    decay_witness: list
    plateau_ok: bool
    decay_ok: bool
    threshold: float | None
    first_violation: float | None

    def to_json(self):
        return json.dumps(asdict(self), indent=2)


def _plateau_constant(m: Profile, jmax):
    ints = [(0.0, 1.0)] + [plateau_interval(k) for k in range(3, jmax + 1)]
    for lo, hi in ints:
        for sgn in (1.0, -1.0):
            xs = sgn * np.linspace(lo, hi, 33)
            lv = m.log_eval(xs)
            if np.max(lv) - np.min(lv) > PROFILE.plateau_atol:
                return False, float(xs[np.argmax(np.abs(lv - lv[0]))])
    return True, None


def _tail_nonincreasing(col, slack=1e-12):
    """Smallest index from which col is non-increasing."""
    n = len(col)
    i = n - 1
    while i > 0 and col[i] <= col[i - 1] * (1 + slack) + slack * 1e-300:
        i -= 1
    return i


def is_tame(m: Profile, jmax=PROFILE.audit_jmax) -> TamenessReport:
    """Audit m against the tame conditions.

    The decay witness has one row per dyadic block [2^j, 2^(j+1)): the
    block maxima of m, |x m'| and x^2 |m''| over a few sample points that
    include the transition regions of the standard plateau layout.
    """
    x = 2.0 ** np.arange(0, jmax + 1)
    frac = np.array([1.0, 1.375, 1.5, 1.625])
    pts = x[:, None] * frac[None, :]
    mv = m(pts).max(axis=1)
    c1 = np.abs(pts * m.deriv1(pts)).max(axis=1)
    c2 = (pts ** 2 * np.abs(m.deriv2(pts))).max(axis=1)
    grid = x
    witness = [(float(a), float(b), float(c), float(d)) for a, b, c, d in zip(grid, mv, c1, c2)]
    plateau_ok, where = _plateau_constant(m, jmax)
    decay_ok = True
    first_bad = where
    thr_idx = 0
    for col in (mv, c1, c2):
        if not np.all(np.isfinite(col)):
            decay_ok = False
            first_bad = first_bad or float(grid[np.argmax(~np.isfinite(col))])
            continue
        i = _tail_nonincreasing(col)
        thr_idx = max(thr_idx, i)
        if i > grid.size - 6:
            decay_ok = False
            first_bad = first_bad or float(grid[i])
        elif col[i] > 0 and not col[-1] < col[i]:
            decay_ok = False
            first_bad = first_bad or float(grid[-1])
    try:
        audit(m)
    except ProfileError as exc:
        decay_ok = False
        first_bad = exc.x
    ok = plateau_ok and decay_ok
    return TamenessReport(ok, witness, plateau_ok, decay_ok,
                          float(grid[thr_idx]), None if ok else first_bad)


# -- logarithmic integral --------------------------------------------------------

@dataclass
class LogIntegralReport:
    T: list
    partial: list
    K: list
    dyadic_sum: list
    increments: list
    verdict: str
    ratio_fit: float
    fit_residual: float
    lower_constant: float

    def partial_at(self, T):
        return float(np.interp(math.log(T), np.log(self.T), self.partial))

    def to_json(self):
        return json.dumps(asdict(self), indent=2)


def _breaks(m: Profile, a, b):
    pts = [a, b]
    if m.plateaus is not None:
        e = np.concatenate([m.plateaus.lo, m.plateaus.hi])
        pts += e[(e > a) & (e < b)].tolist()
    return np.unique(pts)


def log_integral(m: Profile, T_max=1e6, K_max=40, n_fit=6) -> LogIntegralReport:
    if T_max < 2 or K_max < 4:
        raise ValueError("need T_max >= 2 and K_max >= 4")
    jt = int(math.floor(math.log2(T_max)))
    Ts = [2.0 ** j for j in range(1, jt + 1)]
    if Ts[-1] < T_max:
        Ts.append(float(T_max))
    partial = []
    acc = 0.0
    prev = 1.0
    for T in Ts:
        f = lambda t: m.log_minus(t) / t ** 2  # noqa: E731
        res = gk_integrate(f, _breaks(m, prev, T), atol=1e-300,
                           rtol=PROFILE.log_integral_rtol)
        acc += float(res.value)
        partial.append(acc)
        prev = T
    ks = np.arange(0, K_max + 1)
    inc = 2.0 ** (-ks) * m.log_minus(2.0 ** ks)
    dsum = np.cumsum(inc)
    tail = inc[-n_fit:]
    lower = float(np.min(tail))
    if np.all(tail == 0):
        verdict, ratio, resid = "convergent", 0.0, 0.0
    elif np.all(tail > 0):
        coef, res_, *_ = np.polyfit(np.arange(n_fit), np.log(tail), 1, full=True)
        ratio = float(math.exp(coef[0]))
        resid = float(math.sqrt(res_[0] / n_fit)) if res_.size else 0.0
        if ratio < 0.95:
            verdict = "convergent"
        elif ratio >= 0.98:
            verdict = "divergent"
        else:
            verdict = "inconclusive"
    else:
        verdict, ratio, resid = "inconclusive", float("nan"), float("nan")
    return LogIntegralReport(Ts, partial, ks.tolist(), dsum.tolist(), inc.tolist(),
                             verdict, ratio, resid, lower)


# -- distance to a Lipschitz graph -------------------------------------------

@dataclass
class Graph:
    """The graph y = phi(t); ``phi`` and ``dphi`` act on arrays."""
    phi: Callable
    dphi: Callable | None = None
    window: tuple[float, float] = (-math.inf, math.inf)

    @classmethod
    def of_profile(cls, m: Profile, sign=1.0):
        return cls(lambda t: sign * m(t), lambda t: sign * m.deriv1(t))

    def _slope(self, t):
        if self.dphi is not None:
            return float(np.nanmax(np.abs(self.dphi(t))))
        return float(np.nanmax(np.abs(np.diff(self.phi(t)) / np.diff(t))))

    def lipschitz(self, lo, hi, n=20001):
        """Sampled sup |phi'|; inf when the slope keeps growing under refinement."""
        L = self._slope(np.linspace(lo, hi, n))
        t = np.linspace(lo, hi, 16 * (n - 1) + 1)
        L16 = self._slope(t)
        # one-sided difference quotients catch cusps the grid straddles
        L16 = max(L16, float(np.nanmax(np.abs(np.diff(self.phi(t)) / np.diff(t)))))
        if L16 > 1.2 * L + 1e-12:
            return math.inf
        return max(L, L16)


def graph_distance_check(graph, x, y, L=None):
    """Return (exact, bound, L) for the point (x, y) above the graph."""
    if isinstance(graph, Profile):
        graph = Graph.of_profile(graph)
    a = float(y - graph.phi(np.array([x]))[0])
    if a <= 0:
        raise ValueError("point is not above the graph")
    lo = max(x - a, graph.window[0])
    hi = min(x + a, graph.window[1])
    if L is None:
        L = graph.lipschitz(min(lo, x - 1.0), max(hi, x + 1.0))
    t = np.linspace(lo, hi, 4001)
    d2 = (t - x) ** 2 + (y - graph.phi(t)) ** 2
    i = int(np.argmin(d2))
    h = (hi - lo) / 4000
    res = minimize_scalar(
        lambda s: (s - x) ** 2 + (y - graph.phi(np.array([s]))[0]) ** 2,
        bounds=(max(lo, t[i] - h), min(hi, t[i] + h)), method="bounded",
        options={"xatol": 1e-13})
    exact = math.sqrt(min(float(res.fun), float(d2[i])))
    bound = a / math.sqrt(1.0 + L * L) if math.isfinite(L) else 0.0
    return exact, bound, L
