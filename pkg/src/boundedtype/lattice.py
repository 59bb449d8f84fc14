"""SL2(Z)-orbit of i, coprime lattice sums and the log(1/y) growth of
the line integral of log+|lambda| near the real axis.

All lattice arithmetic is exact (numpy int64 for enumeration, Fractions for
individual orbit points); only lambda evaluations are floating point.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numpy as np

from . import modular
from .quad import gk_integrate


@dataclass(frozen=True)
class UnimodularMatrix:
    alpha: int
    beta: int
    gamma: int
    delta: int

    def __post_init__(self):
        if self.alpha * self.delta - self.beta * self.gamma != 1:
            raise ValueError(f"determinant != 1: {self.as_tuple()}")

    def as_tuple(self):
        return ((self.alpha, self.beta), (self.gamma, self.delta))

    def image_of_i(self) -> tuple[Fraction, Fraction]:
        """Exact (Re, Im) of M i."""
        a, b, c, d = self.alpha, self.beta, self.gamma, self.delta
        den = c * c + d * d
        return Fraction(b * d + a * c, den), Fraction(1, den)

    def act(self, tau):
        return (self.alpha * tau + self.beta) / (self.gamma * tau + self.delta)


@dataclass(frozen=True)
class OrbitPoint:
    matrix: UnimodularMatrix
    re: Fraction
    im: Fraction

    @property
    def point(self) -> complex:
        return complex(float(self.re), float(self.im))

    def check(self) -> bool:
        return (self.re, self.im) == self.matrix.image_of_i()


def stabilizer_of_i(bound: int = 2) -> list[UnimodularMatrix]:
    """All M in SL2(Z) with entries |.| <= bound and M i = i (exhaustive)."""
    out = []
    rng = range(-bound, bound + 1)
    for a, b, c, d in product(rng, repeat=4):
        if a * d - b * c != 1:
            continue
        # M i = i  <=>  c^2 + d^2 = 1 and b d + a c = 0
        if c * c + d * d == 1 and b * d + a * c == 0:
            out.append(UnimodularMatrix(a, b, c, d))
    return out


@dataclass
class CoprimeSet:
    X: float
    gamma: np.ndarray
    delta: np.ndarray

    @property
    def count(self) -> int:
        return int(self.gamma.size)

    @property
    def norms(self) -> np.ndarray:
        return self.gamma * self.gamma + self.delta * self.delta

    @property
    def reciprocal_sum(self) -> float:
        return float(np.sum(1.0 / self.norms))

    def __iter__(self):
        return zip(self.gamma.tolist(), self.delta.tolist())


def coprime_pairs(X: float) -> CoprimeSet:
    """Coprime (gamma, delta) != (0, 0) with gamma^2 + delta^2 <= X.

    Output is ordered by (norm, gamma, delta).
    """
    if X < 2:
        raise ValueError("X must be >= 2")
    r = int(math.isqrt(int(X)))
    g = np.arange(-r, r + 1, dtype=np.int64)
    G, D = np.meshgrid(g, g, indexing="ij")
    G, D = G.ravel(), D.ravel()
    nrm = G * G + D * D
    keep = (nrm <= X) & (nrm > 0) & (np.gcd(G, D) == 1)
    G, D, nrm = G[keep], D[keep], nrm[keep]
    order = np.lexsort((D, G, nrm))
    return CoprimeSet(float(X), G[order], D[order])


def _ext_euclid(a: np.ndarray, b: np.ndarray):
    """Vectorized extended Euclid: s*a + t*b = gcd(a, b) >= 0."""
    old_r, r = a.copy(), b.copy()
    old_s, s = np.ones_like(a), np.zeros_like(a)
    old_t, t = np.zeros_like(a), np.ones_like(a)
    while np.any(r != 0):
        nz = r != 0
        qt = np.zeros_like(a)
        qt[nz] = old_r[nz] // r[nz]
        old_r, r = np.where(nz, r, old_r), np.where(nz, old_r - qt * r, r)
        old_s, s = np.where(nz, s, old_s), np.where(nz, old_s - qt * s, s)
        old_t, t = np.where(nz, t, old_t), np.where(nz, old_t - qt * t, t)
    neg = old_r < 0
    return np.where(neg, -old_s, old_s), np.where(neg, -old_t, old_t)


@dataclass
class Orbit:
    """Orbit points M i with |Re| < 1 and Im >= 2y, stored as integer arrays.

    ``num/den`` is the exact real part and ``1/den`` the imaginary part.
    ``raw`` counts the (matrix, representative) pairs before removing the
    fourfold stabilizer multiplicity.
    """
    y: float
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    num: np.ndarray
    den: np.ndarray
    raw: int

    def __len__(self):
        return int(self.den.size)

    @property
    def im(self) -> np.ndarray:
        return 1.0 / self.den

    @property
    def re(self) -> np.ndarray:
        return self.num / self.den

    def points(self):
        for a, b, c, d in zip(self.alpha.tolist(), self.beta.tolist(),
                              self.gamma.tolist(), self.delta.tolist()):
            M = UnimodularMatrix(a, b, c, d)
            re, im = M.image_of_i()
            yield OrbitPoint(M, re, im)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["alpha", "beta", "gamma", "delta", "re", "im"])
            for a, b, c, d, n, q in zip(self.alpha, self.beta, self.gamma,
                                        self.delta, self.num, self.den):
                w.writerow([a, b, c, d, repr(n / q), repr(1.0 / q)])


def orbit_in_strip(y: float) -> Orbit:
    """Distinct points M i, M in SL2(Z), with |Re| < 1 and Im >= 2y."""
    if not (1e-6 < y <= 0.5):
        raise ValueError("y outside the working range (1e-6, 0.5]")
    X = 1.0 / (2.0 * y)
    cp = coprime_pairs(max(X, 2.0))
    c, d = cp.gamma, cp.delta
    n2 = c * c + d * d
    sel = n2 <= X
    c, d, n2 = c[sel], d[sel], n2[sel]
    # alpha*delta - beta*gamma = 1  <=>  s*delta + t*gamma = 1 with alpha=s, beta=-t
    s, t = _ext_euclid(d, c)
    alpha, beta = s, -t
    num = beta * d + alpha * c
    # shifting (alpha, beta) by k(gamma, delta) moves num by k*n2
    k0 = -(num // n2)
    alpha0, beta0, num0 = alpha + k0 * c, beta + k0 * d, num + k0 * n2
    # num0 in [0, n2): representatives num0 and num0 - n2 (the latter only if num0 > 0)
    two = num0 > 0
    A = np.concatenate([alpha0, (alpha0 - c)[two]])
    B = np.concatenate([beta0, (beta0 - d)[two]])
    C = np.concatenate([c, c[two]])
    Dd = np.concatenate([d, d[two]])
    NUM = np.concatenate([num0, (num0 - n2)[two]])
    DEN = np.concatenate([n2, n2[two]])
    raw = int(DEN.size)
    key = np.stack([NUM, DEN], axis=1)
    _, first = np.unique(key, axis=0, return_index=True)
    first = np.sort(first)
    order = np.lexsort((Dd[first], C[first], DEN[first]))
    pick = first[order]
    return Orbit(y, A[pick], B[pick], C[pick], Dd[pick], NUM[pick], DEN[pick], raw)


def lemmaC_lattice_sum(y: float) -> tuple[float, float]:
    """Sum of Im over orbit_in_strip(y) and its ratio to log(1/y)."""
    if not (1e-6 <= y <= 0.1):
        raise ValueError("y must lie in [1e-6, 1e-1]")
    orb = orbit_in_strip(y)
    s = float(np.sum(1.0 / orb.den))
    return s, s / math.log(1.0 / y)


def infinity_cusps(lo: float, hi: float, qmax: int) -> np.ndarray:
    """Rationals p/q in [lo, hi] with p, q odd and q <= qmax.

    These are exactly the cusps at which lambda tends to infinity.
    """
    out = []
    for q in range(1, qmax + 1, 2):
        p = np.arange(math.ceil(lo * q), math.floor(hi * q) + 1)
        p = p[(p % 2 != 0) & (np.gcd(p, q) == 1)]
        out.append(p / q)
    if not out:
        return np.empty(0)
    return np.unique(np.concatenate(out))


def lemmaC_breakpoints(lo, hi, y, qfactor=2.0):
    qmax = max(1, int(math.ceil(qfactor / math.sqrt(y))))
    cusps = infinity_cusps(lo - 1.0, hi + 1.0, qmax)
    pts = np.concatenate([cusps, cusps - 2 * y, cusps + 2 * y, [lo, hi]])
    return np.unique(np.clip(pts, lo, hi))


@dataclass
class LemmaCResult:
    y: float
    value: float
    error: float
    panels: int
    converged: bool

    @property
    def ratio(self) -> float:
        return self.value / math.log(1.0 / self.y)


def lemmaC_integral(y: float, lo: float = 0.0, atol: float = 1e-4,
                    min_im: float = 1e-6) -> LemmaCResult:
    """Adaptive quadrature of x -> log+|lambda(x + i y)| over [lo, lo + 2]."""
    if not (1e-5 <= y <= 0.1):
        raise ValueError("y must lie in [1e-5, 1e-1]")
    hi = lo + 2.0
    pts = lemmaC_breakpoints(lo, hi, y)

    def f(x):
        return modular.log_plus_abs_lambda(x + 1j * y, min_im=min_im)

    res = gk_integrate(f, pts, atol=atol, rtol=0.0, max_panels=2_000_000)
    return LemmaCResult(y, float(res.value), res.error, res.panels, res.converged)


def lambda_class_of_orbit(orb: Orbit, a: complex = 0.5) -> np.ndarray:
    """lambda(M i) for every orbit point (floating point)."""
    return modular.lam(orb.re + 1j * orb.im, min_im=None)


@dataclass
class JensenCheck:
    y: float
    a: complex
    circle_average: float
    point_sum: float

    @property
    def rel_diff(self) -> float:
        return abs(self.circle_average - self.point_sum) / abs(self.point_sum)


def jensen_check(a: complex, y: float, atol: float = 1e-9) -> JensenCheck:
    """Both sides of Jensen's formula for Lambda(q) - a on |q| = exp(-pi y).

    Left: (1/2) int_{-1}^{1} log|lambda(x+iy) - a| dx - log|a|.
    Right: pi * sum (Im tau_k - y) over a-points tau_k in the strip above y.
    Only valid for a in the orbit of lambda(i) = 1/2.
    """
    if not any(abs(a - v) < 1e-12 for v in modular.six_values(0.5)):
        raise ValueError("a must be one of the six values of 1/2")
    orb = orbit_in_strip(y / 2.0)
    vals = lambda_class_of_orbit(orb)
    hit = np.abs(vals - a) < 1e-6
    # strip [-1, 1): identify Re = 1 with Re = -1
    re = orb.re
    hit &= re < 1.0
    im = orb.im[hit]
    point_sum = math.pi * float(np.sum(np.maximum(im - y, 0.0)))
    extra = orb.re[hit & (orb.im >= y)]

    def f(x):
        tau = x + 1j * y
        lv = modular.lambda_eval(tau, min_im=None).value
        la = modular.log_abs_lambda(tau, min_im=None)
        with np.errstate(divide="ignore", invalid="ignore"):
            small = np.abs(lv) < 1e6
            out = np.where(small, np.log(np.abs(lv - a)),
                           la + np.log(np.abs(1.0 - a / np.where(small, 1.0, lv))))
        return out

    pts = np.concatenate([lemmaC_breakpoints(-1.0, 1.0, y), extra, [-1.0, 1.0]])
    pts = np.unique(np.clip(pts, -1.0, 1.0))
    res = gk_integrate(f, pts, atol=atol, rtol=1e-10, max_panels=500_000)
    lhs = 0.5 * float(res.value) - math.log(abs(a))
    return JensenCheck(y, a, lhs, point_sum)
