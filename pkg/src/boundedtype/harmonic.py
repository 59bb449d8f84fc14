"""Harmonic measure of graph domains by walk-on-spheres.

Sphere radii come from the Lipschitz distance bound
dist((x, y), graph) >= (y - phi(x)) / sqrt(1 + L^2), so every step stays in
the domain.  Walks are absorbed within ``shell`` of the boundary and
classified by their x-coordinate.

Randomness: walks are processed in fixed blocks; block b draws from
Philox keyed by (seed, b), so results do not depend on how blocks are
scheduled.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, asdict
from typing import Callable, Sequence

import numpy as np

from .config import WOS
from .profiles import Profile, plateau_interval
from .quad import gk_integrate

BLOCK = 1 << 14


@dataclass
class WalkDomain:
    """{y > phi(x)} with a global Lipschitz bound L for phi."""
    phi: Callable
    L: float
    tag: str

    @classmethod
    def flat(cls, height=0.0):
        return cls(lambda x: np.full(np.shape(x), float(height)), 0.0,
                   f"H shifted by {height}" if height else "H")

    @classmethod
    def from_profile(cls, n: Profile, sign=1, x_span=2.0 ** 12):
        t = np.concatenate([np.linspace(0, 16, 4001), np.geomspace(16, x_span, 20001)])
        L = float(np.max(np.abs(n.deriv1(t))))
        return cls(lambda x: sign * n(x), L, f"H({'+' if sign > 0 else '-'}{n.descriptor})")


@dataclass
class HarmonicMeasureEstimate:
    value: float
    stderr: float
    samples: int
    excluded: int
    domain: str
    target: list
    z: tuple
    seed: int
    mean_steps: float

    def to_json(self):
        return json.dumps(asdict(self), indent=2)

    def within(self, exact, k=3.0):
        return abs(self.value - exact) <= k * self.stderr + 1e-12


def _stream(seed, block):
    return np.random.Generator(np.random.Philox(key=[int(seed) & (2**64 - 1), block]))


def _run_block(dom: WalkDomain, intervals, z, n, rng, shell, max_steps):
    x = np.full(n, z.real)
    y = np.full(n, z.imag)
    k = math.sqrt(1.0 + dom.L ** 2)
    alive = np.ones(n, dtype=bool)
    steps = np.zeros(n, dtype=np.int64)
    for _ in range(max_steps):
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            break
        gap = y[idx] - dom.phi(x[idx])
        r = gap / k
        done = r < shell
        alive[idx[done]] = False
        go = idx[~done]
        if go.size == 0:
            break
        th = rng.uniform(0.0, 2.0 * math.pi, go.size)
        x[go] += r[~done] * np.cos(th)
        y[go] += r[~done] * np.sin(th)
        steps[go] += 1
    hit = np.zeros(n, dtype=bool)
    for a, b in intervals:
        hit |= (x >= a) & (x <= b)
    hit &= ~alive
    return int(hit.sum()), int(alive.sum()), int(steps.sum())


def wos_measure(domain, target, z, samples, seed=42, shell=WOS.shell,
                max_steps=WOS.max_steps) -> HarmonicMeasureEstimate:
    """Estimate omega(target, z) for the boundary arc over the x-set ``target``.

    ``target`` is an interval (a, b) or a list of them; ``domain`` a
    WalkDomain or a Profile (taken as H(+n)).
    """
    if isinstance(domain, Profile):
        domain = WalkDomain.from_profile(domain)
    z = complex(z)
    if z.imag <= float(domain.phi(np.array([z.real]))[0]):
        raise ValueError("z must lie above the boundary graph")
    intervals = [tuple(target)] if np.ndim(target) == 1 else [tuple(t) for t in target]
    hits = lost = steps = 0
    nb = (samples + BLOCK - 1) // BLOCK
    for b in range(nb):
        n = min(BLOCK, samples - b * BLOCK)
        h, l, s = _run_block(domain, intervals, z, n, _stream(seed, b), shell, max_steps)
        hits += h
        lost += l
        steps += s
    used = samples - lost
    p = hits / used if used else float("nan")
    se = math.sqrt(max(p * (1 - p), 0.0) / used) if used else float("nan")
    return HarmonicMeasureEstimate(p, se, used, lost, domain.tag,
                                   [list(map(float, t)) for t in intervals],
                                   (z.real, z.imag), int(seed), steps / max(samples, 1))


def halfplane_measure(a, b, z):
    """Exact omega_H([a, b], z) = (arctan((b-x)/y) - arctan((a-x)/y)) / pi."""
    z = complex(z)
    return (math.atan2(b - z.real, z.imag) - math.atan2(a - z.real, z.imag)) / math.pi


# -- harmonic measure of plateau middles ------------------------------------------

def middle_third(k: int):
    lo, hi = plateau_interval(k)
    L = hi - lo
    return lo + L / 3.0, lo + 2.0 * L / 3.0


def inverse_square_mass(a, b):
    """int_a^b dt/t^2 = 1/a - 1/b."""
    return 1.0 / a - 1.0 / b


@dataclass
class Claim5Report:
    k: list
    omega: list
    stderr: list
    mass: list
    ratio: list
    band: float
    z: tuple
    samples: int
    seed: int

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "omega", "stderr", "mass", "ratio"])
            for row in zip(self.k, self.omega, self.stderr, self.mass, self.ratio):
                w.writerow([repr(float(v)) if i else int(v) for i, v in enumerate(row)])

    def to_json(self):
        return json.dumps(asdict(self), indent=2)


def claim5_comparability(n_star: Profile, ks: Sequence[int], z=4j, samples=10 ** 6,
                         seed=42) -> Claim5Report:
    """rho_k = omega_{H(n*)}(J_k + i n_k, z) / int_{J_k} dt/t^2 for each k."""
    dom = WalkDomain.from_profile(n_star, 1)
    om, se, ms, rt = [], [], [], []
    for k in ks:
        if k < 3:
            raise ValueError("plateaus start at k = 3")
        a, b = middle_third(k)
        est = wos_measure(dom, (a, b), z, samples, seed=seed + 1000 * k)
        mass = inverse_square_mass(a, b)
        om.append(est.value)
        se.append(est.stderr)
        ms.append(mass)
        rt.append(est.value / mass)
    pos = [r for r in rt if r > 0]
    band = max(pos) / min(pos) if len(pos) == len(rt) else math.inf
    return Claim5Report(list(ks), om, se, ms, rt, band, (complex(z).real, complex(z).imag),
                        samples, seed)


# -- Herglotz domination -----------------------------------------------------------

def poisson_extension(u: Callable, zeta, atol=1e-10, rtol=1e-8, breaks=()):
    """(Im zeta/pi) int u(t)/|t - zeta|^2 dt via t = x + y tan(a)."""
    zeta = complex(zeta)
    x, y = zeta.real, zeta.imag

    def f(a):
        return u(x + y * np.tan(a)) / math.pi

    pts = [-math.pi / 2, math.pi / 2] + list(np.linspace(-math.pi / 2, math.pi / 2, 33))
    pts += [math.atan((b - x) / y) for b in breaks]
    res = gk_integrate(f, sorted(pts), atol=atol, rtol=rtol, max_panels=400000)
    return float(res.value), float(res.error)


@dataclass
class HerglotzReport:
    boundary_ok: bool
    probes: list
    lhs: list
    rhs: list
    ok: bool


def herglotz_domination_check(u_boundary: Callable, v_boundary: Callable, c: float,
                              probes, audit_x=None, tol=1e-8, breaks=()):
    """Poisson(u)(zeta) <= Poisson(v)(zeta) + c Im zeta at the probes."""
    if c < 0:
        raise ValueError("c must be non-negative")
    audit_x = np.linspace(-100, 100, 20001) if audit_x is None else np.asarray(audit_x)
    if np.any(u_boundary(audit_x) > v_boundary(audit_x) + tol):
        raise ValueError("boundary audit failed: u > v somewhere on the sample")
    lhs, rhs = [], []
    for p in probes:
        pu, eu = poisson_extension(u_boundary, p, breaks=breaks)
        pv, ev = poisson_extension(v_boundary, p, breaks=breaks)
        lhs.append(pu)
        rhs.append(pv + c * complex(p).imag)
    ok = all(a <= b + tol * (1 + abs(b)) for a, b in zip(lhs, rhs))
    return HerglotzReport(True, [complex(p) for p in probes], lhs, rhs, ok)


# -- divergence series -------------------------------------------------------------

@dataclass
class DivergenceSeries:
    k: list
    terms: list
    partial: list
    first_below_one: int | None


def divergence_series(n_star: Profile, K: int) -> DivergenceSeries:
    """Partial sums of sum_{k<=K} 2^-k log(1/n*(2^k)), from log-space values."""
    ks = np.arange(0, K + 1)
    lv = n_star.log_eval(2.0 ** ks)
    terms = -lv * 2.0 ** (-ks)
    below = np.nonzero(lv < 0)[0]
    return DivergenceSeries(ks.tolist(), terms.tolist(), np.cumsum(terms).tolist(),
                            int(below[0]) if below.size else None)
