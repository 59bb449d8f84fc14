"""Riemann maps w: H -> H(+-m) of graph domains, normalized by w(iy)/(iy) -> 1.

The map is written as

    w(zeta) = zeta + i*sign*c_inf + g(zeta),
    g(zeta) = (1/pi) * sum_j kappa_j (s_j - zeta) log(s_j - zeta),

where ``phi`` (the boundary values of Im g) is piecewise linear on graded
nodes s_j and kappa_j are its slope jumps.  On the real axis Im g = phi
and Re g is the Hilbert transform of phi, so the boundary condition
Im w(t) = sign * m(Re w(t)) becomes the fixed point

    phi = sign * (m(s + K phi) - c_inf),

with K the discrete Hilbert transform on the nodes.  The profile is frozen
at c_inf = m(X_max) beyond the node extent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .config import MAP
from .profiles import Profile, make_profile, PlateauTable


class MapBuildError(RuntimeError):
    """The boundary fixed point did not converge or its residual is too large."""


class NewtonDivergence(ArithmeticError):
    def __init__(self, point):
        super().__init__(f"Newton inversion failed at z={point}")
        self.point = point


@dataclass(frozen=True)
class GraphDomain:
    """H(sign*m) = {x + iy : y > sign * m(x)}."""
    profile: Profile
    sign: int = -1

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")

    @property
    def description(self):
        s = "+" if self.sign > 0 else "-"
        return f"H({s}m) = {{x+iy: y > {s}m(x)}}, m = {self.profile.descriptor}"

    def boundary(self, x):
        return self.sign * self.profile(x)

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        return z.imag > self.boundary(z.real)


def graded_nodes(N: int, x_max: float) -> np.ndarray:
    """Symmetric nodes: uniform on [-2, 2], geometric out to +-x_max."""
    half = N // 2
    n_u = max(8, half // 8)
    n_g = half - n_u
    uni = np.linspace(0.0, 2.0, n_u + 1)
    geo = np.geomspace(2.0, x_max, n_g + 1)[1:]
    pos = np.concatenate([uni, geo])
    return np.concatenate([-pos[:0:-1], pos])


def _second_difference(s):
    """Matrix D with kappa = D phi (slope jumps of the piecewise-linear phi)."""
    n = s.size
    h = np.diff(s)
    D = np.zeros((n, n))
    for j in range(n):
        if j > 0:            # minus the slope on [s_{j-1}, s_j]
            D[j, j] -= 1.0 / h[j - 1]
            D[j, j - 1] += 1.0 / h[j - 1]
        if j < n - 1:        # plus the slope on [s_j, s_{j+1}]
            D[j, j + 1] += 1.0 / h[j]
            D[j, j] -= 1.0 / h[j]
    return D


def _xlogx_matrix(t, s):
    d = s[None, :] - t[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = d * np.log(np.abs(d))
    out[d == 0] = 0.0
    return out


def _log_lower(d_re, d_im):
    """Principal log of d = d_re + i d_im with d_im <= 0 (signed zero kept)."""
    d = np.empty(np.broadcast(d_re, d_im).shape, dtype=complex)
    d.real = d_re
    d.imag = d_im
    return np.log(d)


@dataclass
class ConformalMapPair:
    sign: int
    profile: Profile
    nodes: np.ndarray
    phi: np.ndarray
    c_inf: float
    x_max: float
    A_shift: float
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        kappa = _second_difference(self.nodes) @ self.phi
        big = np.abs(kappa) > 1e-300
        self._s = self.nodes[big]
        self._k = kappa[big] / math.pi
        self.normalization = {
            "symmetry": "w(-conj z) = -conj w(z); imaginary axis to imaginary axis",
            "dilation": 1.0,
            "limit": "w(iy)/(iy) -> 1",
            "translation": self.sign * self.c_inf,
        }

    # -- forward map ----------------------------------------------------------
    def _sum(self, zeta, chunk=1 << 21):
        zeta = np.asarray(zeta, dtype=complex)
        flat = zeta.ravel()
        g = np.zeros(flat.size, dtype=complex)
        dg = np.zeros(flat.size, dtype=complex)
        ns = max(1, self._s.size)
        step = max(1, chunk // ns)
        for a in range(0, flat.size, step):
            z = flat[a:a + step]
            dre = self._s[None, :] - z.real[:, None]
            dim = np.broadcast_to(-z.imag[:, None], dre.shape)
            L = _log_lower(dre, dim)
            d = dre + 1j * dim
            g[a:a + step] = (d * L) @ self._k
            dg[a:a + step] = -(L @ self._k)
        return g.reshape(zeta.shape), dg.reshape(zeta.shape)

    def forward(self, zeta):
        g, _ = self._sum(zeta)
        return np.asarray(zeta) + 1j * self.sign * self.c_inf + g

    def forward_deriv(self, zeta):
        _, dg = self._sum(zeta)
        return 1.0 + dg

    def forward_both(self, zeta):
        g, dg = self._sum(zeta)
        return np.asarray(zeta) + 1j * self.sign * self.c_inf + g, 1.0 + dg

    __call__ = forward

    # -- inverse --------------------------------------------------------------
    def _newton(self, zf, zeta, active, tol, maxiter):
        extra = np.zeros(zf.size, dtype=int)
        for _ in range(maxiter):
            idx = np.nonzero(active)[0]
            if idx.size == 0:
                break
            w, dw = self.forward_both(zeta[idx])
            step = (w - zf[idx]) / dw
            new = zeta[idx] - step
            # stay in the closed upper half-plane: halve the imaginary part instead
            below = new.imag < 0
            new = np.where(below, new.real + 0.5j * zeta[idx].imag, new)
            zeta[idx] = new
            small = np.abs(step) <= tol * (1.0 + np.abs(new))
            extra[idx[small]] += 1
            active[idx[extra[idx] >= 2]] = False
        return zeta, active

    def inverse(self, z, tol=MAP.newton_tol, maxiter=MAP.newton_maxiter, strict=True):
        """W(z) by damped Newton on w, started from z - i*sign*c_inf.

        Points that fail to converge (typically within ~1e-6 of the boundary)
        are restarted from the boundary-layer guess U + i d/|w'(U)|, where
        Re w(U) = Re z and d is the vertical distance of z to the boundary.
        """
        z = np.asarray(z, dtype=complex)
        shape = z.shape
        zf = z.ravel()
        zeta = zf - 1j * self.sign * self.c_inf
        zeta = np.where(zeta.imag < 0, zeta.real + 1e-300j, zeta)
        active = np.ones(zf.size, dtype=bool)
        zeta, active = self._newton(zf, zeta, active, tol, maxiter)
        if active.any():
            idx = np.nonzero(active)[0]
            U = self._boundary_solve(zf[idx].real)
            wU, dwU = self.forward_both(U + 0j)
            d = np.maximum(zf[idx].imag - wU.imag, 1e-300)
            zeta[idx] = U + 1j * d / np.abs(dwU)
            zeta, active = self._newton(zf, zeta, active, tol, maxiter)
        if strict and active.any():
            raise NewtonDivergence(complex(zf[np.argmax(active)]))
        return zeta.reshape(shape)

    def inverse_deriv(self, z, W=None):
        W = self.inverse(z) if W is None else W
        return 1.0 / self.forward_deriv(W)

    # -- real-axis image (H(-m) only) -----------------------------------------
    def real_axis_preimage(self, t, v_switch=1e-6):
        """(U, log V) with W(t) = U + iV for real t (requires sign = -1).

        Newton gives V directly; where V < v_switch the height is taken from
        the boundary-layer relation V * Re w'(U) = m(t), evaluated in logs so
        that plateau heights far below double precision remain meaningful.
        """
        if self.sign != -1:
            raise ValueError("the real axis lies inside the domain only for H(-m)")
        t = np.asarray(t, dtype=float)
        W = self.inverse(t + 0j)
        U = W.real
        with np.errstate(divide="ignore"):
            logV = np.log(np.maximum(W.imag, 0.0))
        deep = W.imag < v_switch
        if deep.any():
            Ud = self._boundary_solve(t[deep])
            dw = self.forward_deriv(Ud + 0j)
            U[deep] = Ud
            logV[deep] = self.profile.log_eval(np.clip(t[deep], -self.x_max, self.x_max)) \
                - np.log(dw.real)
        return U, logV

    def _boundary_solve(self, t, iters=60):
        """Solve Re w(U) = t on the real axis (monotone in U)."""
        U = np.asarray(t, dtype=float).copy()
        for _ in range(iters):
            w, dw = self.forward_both(U + 0j)
            step = (w.real - t) / dw.real
            U = U - step
            if np.all(np.abs(step) <= 1e-14 * (1 + np.abs(U))):
                break
        return U

    # -- serialization ----------------------------------------------------------
    def to_dict(self):
        return {
            "format": "boundedtype.confmap/1",
            "sign": self.sign,
            "profile": self.profile.to_dict(),
            "nodes": self.nodes.tolist(),
            "phi": self.phi.tolist(),
            "c_inf": self.c_inf,
            "x_max": self.x_max,
            "A_shift": self.A_shift,
            "diagnostics": self.diagnostics,
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            d = json.load(fh)
        if d.get("format") != "boundedtype.confmap/1":
            raise ValueError("not a serialized conformal map")
        p = d["profile"]
        if p["kind"] == "piecewise":
            rows = np.array(p["plateaus"], dtype=float)
            prof = make_profile(PlateauTable(rows[:, 0], rows[:, 1], rows[:, 2]))
            prof.descriptor = p["descriptor"]
        else:
            prof = make_profile(p["descriptor"])
        out = cls(d["sign"], prof, np.array(d["nodes"]), np.array(d["phi"]),
                  d["c_inf"], d["x_max"], d["A_shift"], d["diagnostics"])
        res = boundary_residual(out)
        if res > 10 * max(d["diagnostics"].get("boundary_residual", 0.0), 1e-12):
            raise ValueError(f"reloaded map fails its boundary audit ({res:.3e})")
        return out


def _frozen(profile: Profile, x_max):
    return lambda x: profile(np.clip(x, -x_max, x_max))


def boundary_residual(cmap: ConformalMapPair, n=2000):
    """max |Im w(t) - sign*m(Re w(t))| at points between the nodes."""
    s = cmap.nodes
    mids = 0.5 * (s[:-1] + s[1:])
    pick = mids[np.linspace(0, mids.size - 1, min(n, mids.size)).astype(int)]
    w = cmap.forward(pick + 0j)
    m = _frozen(cmap.profile, cmap.x_max)
    return float(np.max(np.abs(w.imag - cmap.sign * m(w.real))))


def build_map(domain: GraphDomain, N: int = MAP.nodes, x_max: float = MAP.x_max,
              tol: float = MAP.fixed_point_tol, maxiter: int = MAP.fixed_point_maxiter,
              residual_tol: float = 1e-3) -> ConformalMapPair:
    """Boundary-correspondence fixed point for the normalized map H -> domain."""
    if N < 64:
        raise ValueError("N must be at least 64")
    prof = domain.profile
    sign = domain.sign
    s = graded_nodes(N, x_max)
    c_inf = float(prof(x_max))
    m = _frozen(prof, x_max)
    K = _xlogx_matrix(s, s) @ _second_difference(s) / math.pi
    phi = np.zeros(s.size)
    hist = []
    for it in range(1, maxiter + 1):
        x = s + K @ phi
        new = sign * (m(x) - c_inf)
        new[0] = new[-1] = 0.0
        new = 0.5 * (new + new[::-1])          # exact evenness
        delta = float(np.max(np.abs(new - phi)))
        phi = new
        hist.append(delta)
        if delta <= tol:
            break
    cmap = ConformalMapPair(sign, prof, s, phi, c_inf, x_max, 2.0 * prof.m0)
    res = boundary_residual(cmap)
    cmap.diagnostics = {
        "nodes": int(s.size), "x_max": x_max, "iterations": it,
        "fixed_point_delta": hist[-1], "boundary_residual": res,
        "contraction": (hist[-1] / hist[-2]) if len(hist) > 1 and hist[-2] > 0 else 0.0,
        "active_nodes": int(cmap._s.size),
    }
    if hist[-1] > tol and hist[-1] > 1e-10:
        raise MapBuildError(f"boundary fixed point stalled at {hist[-1]:.3e}")
    if res > residual_tol:
        raise MapBuildError(f"boundary residual {res:.3e} exceeds {residual_tol:g}")
    return cmap


# -- derivative, chart and boundary diagnostics ------------------------------------

def default_probe_grid():
    xs = np.concatenate([-np.geomspace(1e-2, 1e3, 25)[::-1], [0.0], np.geomspace(1e-2, 1e3, 25)])
    ys = np.array([1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0])
    X, Y = np.meshgrid(xs, ys)
    return (X + 1j * Y).ravel()


def deriv_bounds(cmap: ConformalMapPair, grid=None):
    """(inf |w'|, sup |w'|) over the probe grid."""
    grid = default_probe_grid() if grid is None else np.asarray(grid, dtype=complex)
    d = np.abs(cmap.forward_deriv(grid))
    return float(d.min()), float(d.max())


@dataclass
class KelloggRow:
    s: float
    H1: complex
    H2: complex


def kellogg_H_check(m: Profile, A: float, s_grid):
    """H(s) = s/phi(s), phi(s) = 1 + i s (A - m(1/s)); returns rows and limit deviations."""
    if A <= m.m0:
        raise ValueError("A must exceed m(0)")
    s = np.asarray(s_grid, dtype=float)
    if np.any(s <= 0) or np.any(s > 1):
        raise ValueError("s_grid must lie in (0, 1]")
    x = 1.0 / s
    mv, m1, m2 = m(x), m.deriv1(x), m.deriv2(x)
    phi = 1.0 + 1j * s * (A - mv)
    d1 = 1j * (A - mv) + 1j * m1 / s
    d2 = -1j * m2 / s ** 3
    H1 = 1.0 / phi - s * d1 / phi ** 2
    H2 = -2.0 * d1 / phi ** 2 - s * d2 / phi ** 2 + 2.0 * s * d1 ** 2 / phi ** 3
    rows = [KelloggRow(float(a), complex(b), complex(c)) for a, b, c in zip(s, H1, H2)]
    dev1 = abs(H1[-1] - 1.0)
    dev2 = abs(H2[-1] + 2j * A)
    tol = 1e-2 * (1 + 2 * A)
    return {"rows": rows, "dev_H1": float(dev1), "dev_H2": float(dev2),
            "tol": tol, "ok": bool(dev1 < tol and dev2 < tol)}


def cayley_chart_derivative(cmap: ConformalMapPair, eps=1e-6):
    """Derivative at 1 of the disk-to-disk map p = J o w o C.

    C(zeta) = i(1+zeta)/(1-zeta) and J(w) = 1/(w + iA).  Under the
    normalization w(iy)/(iy) -> 1 the limit is p'(1) = i/2; the value is
    estimated from the radial difference quotient at 1 - eps.
    """
    A = cmap.A_shift
    zd = 1.0 - eps
    zeta = 1j * (1 + zd) / (1 - zd)
    w = cmap.forward(np.array([zeta]))[0]
    p = 1.0 / (w + 1j * A)
    return (0.0 - p) / (1.0 - zd)


# -- boundary curve (H(-m)) ---------------------------------------------------------

@dataclass
class BoundaryCurve:
    x: np.ndarray
    n: np.ndarray
    log_n: np.ndarray
    symmetric: bool
    monotone: bool
    first_violation: float | None
    plateaus: object = None

    def __call__(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        pos = self.x >= 0
        return np.exp(np.interp(x, self.x[pos], self.log_n[pos]))


def boundary_sample_points(count, x_max):
    half = count // 2
    pos = np.concatenate([np.linspace(0.0, 2.0, max(4, half // 4)),
                          np.geomspace(2.0, x_max, half - max(4, half // 4) + 1)[1:]])
    return np.concatenate([-pos[:0:-1], pos])


def boundary_curve(cmap: ConformalMapPair, count=400, x_max=None, slack=1e-8):
    """Gamma = W(R) = {U(t) + i n(U(t))}."""
    if cmap.sign != -1:
        raise ValueError("boundary_curve needs a map onto H(-m)")
    x_max = x_max or min(cmap.x_max / 2, 2.0 ** 10)
    t = boundary_sample_points(count, x_max)
    U, logV = cmap.real_axis_preimage(t)
    order = np.argsort(U)
    U, logV = U[order], logV[order]
    n = np.exp(logV)
    sym = bool(np.allclose(U, -U[::-1], atol=1e-9, rtol=1e-9)
               and np.allclose(logV, logV[::-1], atol=1e-8))
    pos = U >= 0
    ln = logV[pos]
    inc = np.diff(ln) > slack
    mono = not inc.any()
    first = float(U[pos][1:][np.argmax(inc)]) if inc.any() else None
    return BoundaryCurve(U, n, logV, sym, mono, first, getattr(cmap.profile, "plateaus", None))


def claim3_check(cmap: ConformalMapPair, curve: BoundaryCurve = None, count=200, C=None):
    """n(x) <= C m(x/C) with C = sup of sampled |W'| (log space)."""
    curve = curve or boundary_curve(cmap)
    if C is None:
        grid = default_probe_grid()
        grid = grid + 1j * cmap.sign * cmap.c_inf
        C = float(np.max(1.0 / np.abs(cmap.forward_deriv(grid))))
        # |W'| = 1/|w'| on the real axis as well
        tt = np.linspace(-64, 64, 513)
        U, _ = cmap.real_axis_preimage(tt)
        C = max(C, float(np.max(1.0 / np.abs(cmap.forward_deriv(U + 0j)))))
    pos = curve.x >= 0
    xs = curve.x[pos]
    idx = np.linspace(0, xs.size - 1, count).astype(int)
    x = xs[idx]
    lhs = curve.log_n[pos][idx]
    rhs = math.log(C) + cmap.profile.log_eval(x / C)
    viol = lhs > rhs + 1e-9
    return {"C": C, "points": int(x.size), "violations": int(viol.sum()),
            "max_log_gap": float(np.max(lhs - rhs)), "ok": bool(not viol.any())}


def claim2_check(cmap: ConformalMapPair, ys=(0.0, 0.1, 1.0), count=100, x_hi=64.0, slack=1e-8):
    """V(x + iy) non-increasing in x >= 0 along rows (H(-m))."""
    x = np.linspace(0.0, x_hi, count)
    out = {}
    bad = 0
    for y in ys:
        if y == 0.0:
            _, lv = cmap.real_axis_preimage(x)
            V = np.exp(lv)
        else:
            V = cmap.inverse(x + 1j * y).imag
        d = np.diff(V)
        viol = d > slack * np.maximum(1.0, np.abs(V[:-1]))
        out[str(y)] = int(viol.sum())
        bad += int(viol.sum())
    return {"rows": out, "violations": bad, "ok": bad == 0}


def round_trip_residual(cmap: ConformalMapPair, zeta):
    zeta = np.asarray(zeta, dtype=complex)
    back = cmap.inverse(cmap.forward(zeta))
    return float(np.max(np.abs(back - zeta) / np.maximum(1.0, np.abs(zeta))))


def standard_probe_points(n=200, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-50, 50, n)
    y = 10.0 ** rng.uniform(-2, 2, n)
    return x + 1j * y
