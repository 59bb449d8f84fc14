"""F = lambda o W on H(-m) and the bounded/unbounded-type dichotomy run.

W maps H(-m) onto H, so F is analytic there and omits 0, 1 and infinity.
Two quantities decide the dichotomy:

* S_o(r; F) over H, for profiles with a convergent logarithmic integral;
* the boundary integral of log+|F(t)|/t^2 over 1 <= |t| <= T, which grows
  by a fixed amount per octave when the logarithmic integral diverges.

Near the real axis W(t) has height V(t) ~ m(t), far below anything a
double can resolve on the deep plateaus.  Those regions are handled in
log space with two homogenized facts measured elsewhere in the package:
the x-average of rho_lambda(x + iV)^2 is 1/(2V^2), and the period integral
of log+|lambda(x + iV)| is at least c log(1/V) (the period-integral scan).  Every
output marks which pieces were computed directly and which were not.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import modular, lattice
from .charfun import MeromorphicFunction, bounded_type_indicator
from .config import CHAR, MAP
from .confmap import ConformalMapPair, GraphDomain, build_map
from .profiles import Profile, make_profile, tame_minorant, tame_majorant, log_integral
from .quad import gk_integrate

# heights below which lambda is not evaluated directly
V_RESOLVE = 1e-10       # spherical-derivative integrals
V_DIRECT = 1e-4         # boundary log+ integral
RHO_MEAN_SQ = 0.5       # V^2 * mean_x rho_lambda(x+iV)^2 as V -> 0
FAR_FIELD = 12.0        # rho_lambda < 1e-14 above this height


@dataclass
class OmittingFunction:
    profile: Profile
    map: ConformalMapPair

    def W(self, z):
        z = np.asarray(z, dtype=complex)
        far = z.imag > FAR_FIELD
        out = np.empty(z.shape, dtype=complex)
        out[far] = z[far] + 1j * self.map.c_inf       # W(z) - z - i c_inf is tiny up there
        if (~far).any():
            out[~far] = self.map.inverse(z[~far])
        out.imag = np.maximum(out.imag, 1e-300)
        return out

    def __call__(self, z):
        return modular.lam(self.W(z), min_im=None)

    def deriv(self, z):
        Wz = self.W(z)
        lv = modular.lambda_eval(Wz, min_im=None)
        return lv.derivative / self.map.forward_deriv(Wz)

    def log_abs(self, z):
        return modular.log_abs_lambda(self.W(z), min_im=None)

    def spherical(self, z):
        Wz = self.W(z)
        return modular.spherical_derivative(Wz, min_im=None) / np.abs(self.map.forward_deriv(Wz))

    def as_meromorphic(self) -> MeromorphicFunction:
        return MeromorphicFunction(self.__call__, self.deriv, [], "lambda o W",
                                   "H(-m)", log_abs=self.log_abs, rho=self.spherical)


def build_counterexample(m: Profile, direction=None, N=MAP.nodes, x_max=MAP.x_max,
                         audit_points=500, seed=0) -> OmittingFunction:
    """F = lambda o W for H(-m).

    ``direction`` "a" replaces m by its tame minorant, "b" by its tame
    majorant; None uses m as given (already tame, or the constant oracle).
    """
    if direction == "a":
        m = tame_minorant(m)
    elif direction == "b":
        m = tame_majorant(m)
    elif direction is not None:
        raise ValueError("direction must be 'a', 'b' or None")
    cmap = build_map(GraphDomain(m, -1), N=N, x_max=x_max)
    F = OmittingFunction(m, cmap)
    if audit_points:
        rng = np.random.default_rng(seed)
        x = rng.uniform(-64, 64, audit_points)
        d = 10.0 ** rng.uniform(-3, 1.5, audit_points)
        z = x + 1j * (-m(x) + d)
        la, la1 = omitted_value_logs(F, z)
        if not (np.all(np.isfinite(la)) and np.all(np.isfinite(la1))):
            raise ArithmeticError("omitted-value audit failed")
    return F


def omitted_value_logs(F: OmittingFunction, z):
    """(log|F|, log|F - 1|), finite wherever F omits 0 and 1.

    Uses lambda(tau + 1) = lambda/(lambda - 1), so log|lambda - 1| =
    log|lambda(tau)| - log|lambda(tau + 1)| stays finite even where
    1 - lambda underflows.
    """
    Wz = F.W(z)
    a = modular.log_abs_lambda(Wz, min_im=None)
    b = modular.log_abs_lambda(Wz + 1.0, min_im=None)
    return np.asarray(a), np.asarray(a) - np.asarray(b)


# -- spherical bound ----------------------------------------------------------------

@dataclass
class SphericalBoundReport:
    sup: float
    sup_refined: float
    stable: bool
    far_field: list


def _bound_grid(F, nx, ny, span=2.0 ** 8):
    x = np.linspace(-span, span, nx)
    d = np.geomspace(1e-3, span, ny)
    X, D = np.meshgrid(x, d)
    m = F.profile(X)
    return (X + 1j * (-m + D)).ravel(), (D).ravel()


def spherical_bound_check(F: OmittingFunction, n=50, rel=0.10):
    """sup rho_F(x+iy) (y + m(x)) over an n x n grid and its 2n x 2n refinement."""
    sups = []
    for k in (n, 2 * n):
        z, dist = _bound_grid(F, k, k)
        sups.append(float(np.max(F.spherical(z) * dist)))
    ys = np.geomspace(1.0, 1e3, 13)
    far = (F.spherical(1j * ys) * ys).tolist()
    return SphericalBoundReport(sups[0], sups[1], abs(sups[1] - sups[0]) <= rel * sups[1], far)


# -- S_o with the deep angular layer -------------------------------------------------

def _layer(t, theta_d, m_t):
    """int_0^theta_d theta / (2 (t theta + m)^2) d theta, in closed form."""
    a = t * theta_d
    return (np.log1p(a / m_t) - a / (a + m_t)) / (2.0 * t * t)


def inner_area_F(F: OmittingFunction, t, rtol=CHAR.rtol_so):
    """int_0^pi rho_F(t e^{i theta})^2 sin theta d theta, with the layer below
    the resolvable height replaced by its homogenized value.

    Returns (value, error, layer_part).
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    val = np.empty(t.size)
    err = np.empty(t.size)
    lay = np.empty(t.size)
    for i, ti in enumerate(t):
        m_t = float(np.exp(F.profile.log_eval(ti)))
        th_d = max(CHAR.theta_floor, V_RESOLVE / ti)
        j = int(math.ceil(-math.log2(th_d / (math.pi / 2))))
        left = (math.pi / 2) * 2.0 ** (-np.arange(j, -1, -1))
        pts = np.concatenate([[th_d], left[left > th_d]])

        def g(th, ti=ti):
            return F.spherical(ti * np.exp(1j * th)) ** 2 * np.sin(th)

        res = gk_integrate(g, pts, atol=1e-14, rtol=rtol, max_panels=20000)
        # rho_F is symmetric under z -> -conj z, so [0, pi] is twice [0, pi/2]
        layer = 2.0 * _layer(ti, th_d, max(m_t, 1e-300)) * (2.0 * RHO_MEAN_SQ)
        val[i] = 2.0 * float(res.value) + layer
        err[i] = 2.0 * float(res.error)
        lay[i] = layer
    return val, err, lay


@dataclass
class SoTable:
    r: np.ndarray
    So: np.ndarray
    err: np.ndarray
    layer_share: np.ndarray

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r", "So", "err", "layer_share"])
            for row in zip(self.r, self.So, self.err, self.layer_share):
                w.writerow([repr(float(v)) for v in row])


def so_table(F: OmittingFunction, r_grid=(4, 8, 16, 32, 64, 128, 256), panels_per_octave=2,
             rtol=CHAR.rtol_so) -> SoTable:
    from .quad import _XK, _WK, _WG
    r_grid = np.asarray(r_grid, dtype=float)
    r_max = float(r_grid[-1])
    n_oct = int(round(math.log2(r_max)))
    edges = np.geomspace(1.0, r_max, panels_per_octave * n_oct + 1)
    a, b = edges[:-1], edges[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    t = (mid[:, None] + half[:, None] * _XK[None, :]).ravel()
    wk = (half[:, None] * _WK[None, :]).ravel()
    wg = (half[:, None] * _WG[None, :]).ravel()
    g, ge, lay = inner_area_F(F, t, rtol)
    So, E, share = [], [], []
    for r in r_grid:
        sel = t <= r * (1 + 1e-12)
        kern = (1.0 - (t / r) ** 2) / math.pi
        v = float(np.sum(wk[sel] * kern[sel] * g[sel]))
        vg = float(np.sum(wg[sel] * kern[sel] * g[sel]))
        lv = float(np.sum(wk[sel] * kern[sel] * lay[sel]))
        So.append(v)
        E.append(abs(v - vg) + float(np.sum(wk[sel] * kern[sel] * ge[sel])))
        share.append(lv / v if v else 0.0)
    return SoTable(r_grid, np.array(So), np.array(E), np.array(share))


# -- boundary log+ integral ------------------------------------------------------------

@functools.lru_cache(maxsize=1)
def lemmaC_lower_constant():
    """Lower constant for int_0^2 log+|lambda(x+iV)| dx >= c log(1/V).

    The smaller of the minimum scanned ratio and the fitted asymptotic
    slope of the integral against log(1/y).
    """
    ys = 0.1 * 2.0 ** -np.arange(0, 9)
    vals = np.array([lattice.lemmaC_integral(y).value for y in ys])
    L = np.log(1.0 / ys)
    slope = float(np.polyfit(L, vals, 1)[0])
    return min(float(np.min(vals / L)), slope), slope


@dataclass
class OctaveRow:
    k: int
    lo: float
    hi: float
    value: float
    error: float
    mode: str            # direct, homogenized, or mixed
    homogenized: float   # homogenized lower estimate on the same octave
    min_logV: float


@dataclass
class BoundaryIntegral:
    rows: list
    c_lower: float

    @property
    def T(self):
        return [r.hi for r in self.rows]

    @property
    def partial(self):
        return np.cumsum([r.value for r in self.rows]).tolist()

    @property
    def increments(self):
        return [r.value for r in self.rows]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "T", "increment", "partial", "err", "mode", "homogenized", "min_logV"])
            for r, p in zip(self.rows, self.partial):
                w.writerow([r.k, repr(r.hi), repr(r.value), repr(p), repr(r.error), r.mode,
                            repr(r.homogenized), repr(r.min_logV)])


def _direct_piece(F, Ui, lVi, a, b, atol):
    """2 * int_a^b log+|lambda(U(t) + iV(t))| / t^2 dt (both signs of t)."""
    Ua, Ub = float(Ui(a)), float(Ui(b))
    vmin = float(np.exp(min(lVi(a), lVi(b), np.min(lVi(np.linspace(a, b, 257))))))
    qmax = max(1, int(math.ceil(2.0 / math.sqrt(vmin))))
    cusps = lattice.infinity_cusps(Ua - 1, Ub + 1, qmax)
    tgrid = np.linspace(a, b, 4097)
    Ugrid = Ui(tgrid)
    tc = np.interp(cusps, Ugrid, tgrid)
    dU = np.interp(cusps, Ugrid, np.gradient(Ugrid, tgrid))
    vv = np.exp(lVi(tc))
    pts = np.concatenate([[a, b], tc, tc - 2 * vv / dU, tc + 2 * vv / dU])
    pts = np.unique(np.clip(pts, a, b))

    def f(t):
        tau = Ui(t) + 1j * np.exp(lVi(t))
        return modular.log_plus_abs_lambda(tau, min_im=None) / (t * t)

    res = gk_integrate(f, pts, atol=atol, rtol=0.0, max_panels=4_000_000)
    return 2.0 * float(res.value), 2.0 * float(res.error)


def _homogenized_piece(lVi, a, b, c):
    """2 * int_a^b (c/2) log(1/V(t)) / t^2 dt."""
    f = lambda t: 0.5 * c * np.maximum(-lVi(t), 0.0) / (t * t)   # noqa: E731
    res = gk_integrate(f, np.linspace(a, b, 33), atol=1e-12, rtol=1e-8)
    return 2.0 * float(res.value)


def boundary_log_integral(F: OmittingFunction, T=2.0 ** 12, atol=1e-4, v_direct=V_DIRECT,
                          samples_per_octave=1025):
    """Per-octave values of int_{2^k <= |t| <= 2^(k+1)} log+|F(t)| / t^2 dt."""
    c_lower, _ = lemmaC_lower_constant()
    K = int(round(math.log2(T)))
    rows = []
    for k in range(K):
        a, b = 2.0 ** k, 2.0 ** (k + 1)
        t = np.linspace(a, b, samples_per_octave)
        U, lV = F.map.real_axis_preimage(t)
        Ui = PchipInterpolator(t, U)
        lVi = PchipInterpolator(t, lV)
        hom = _homogenized_piece(lVi, a, b, c_lower)
        ok = lV >= math.log(v_direct)
        if ok.all():
            v, e = _direct_piece(F, Ui, lVi, a, b, atol)
            mode = "direct"
        elif not ok.any():
            v, e, mode = hom, 0.0, "homogenized"
        else:
            # split at the first crossing below v_direct
            cut = float(t[np.argmax(~ok)])
            v1, e = _direct_piece(F, Ui, lVi, a, cut, atol) if cut > a else (0.0, 0.0)
            v2 = _homogenized_piece(lVi, cut, b, c_lower)
            v, mode = v1 + v2, "mixed"
        rows.append(OctaveRow(k, a, b, v, e, mode, hom, float(lV.min())))
    return BoundaryIntegral(rows, c_lower)


def increment_fit(bi: BoundaryIntegral, last=6):
    """Fitted lower constant for the per-octave increments (median of the tail)."""
    inc = np.array(bi.increments[-last:])
    return float(np.median(inc)), float(np.min(inc))


# -- dichotomy runner ---------------------------------------------------------------------

@dataclass
class DichotomyResult:
    profile: str
    direction: str
    log_integral_verdict: str
    verdict: str
    so: SoTable | None = None
    growth: object = None
    boundary: BoundaryIntegral | None = None
    notes: dict = field(default_factory=dict)


def run_dichotomy(spec, direction, force=False, r_grid=(4, 8, 16, 32, 64, 128, 256),
                  T=2.0 ** 12, N=MAP.nodes):
    """Direction a: S_o flatness; direction b: boundary integral growth."""
    m = make_profile(spec) if not isinstance(spec, Profile) else spec
    li = log_integral(m)
    want = {"a": "convergent", "b": "divergent"}[direction]
    if li.verdict != want and not force:
        raise DirectionMismatch(li.verdict, direction)
    F = build_counterexample(m, direction, N=N)
    out = DichotomyResult(m.descriptor, direction, li.verdict, "inconclusive")
    bi = boundary_log_integral(F, T)
    out.boundary = bi
    if direction == "a":
        tab = so_table(F, r_grid)
        gv = bounded_type_indicator(tab.So, tab.r)
        out.so, out.growth, out.verdict = tab, gv, gv.verdict
        tot = bi.partial[-1]
        out.notes["last_octave_share"] = bi.increments[-1] / tot if tot else 0.0
        # a bounded S_o approaching its limit like r^-p has geometric octave increments
        inc = np.diff(tab.So)
        if inc.size >= 3 and np.all(inc[-3:] > 0):
            out.notes["so_increment_ratio"] = float(np.exp(np.mean(np.diff(np.log(inc[-4:])))))
    else:
        med, low = increment_fit(bi)
        out.notes.update({"increment_median": med, "increment_min": low,
                          "series_slope": 1.0 / 8.0,
                          "ratio_to_slope": med / 0.125})
        out.verdict = "growing" if low > 0 and 0.25 <= med / 0.125 <= 4 else "inconclusive"
    return out


class DirectionMismatch(ValueError):
    def __init__(self, verdict, direction):
        super().__init__(f"profile log integral is {verdict}; direction {direction} "
                         "needs the other case (use --force to override)")
        self.verdict = verdict
        self.direction = direction
