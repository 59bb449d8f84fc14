"""Acceptance criteria, each at its stated tolerance.

Every criterion records one PASS/FAIL line (printed in the pytest terminal
summary, or directly when this file is run as a script).
"""

import math
import time

import numpy as np
import pytest

from boundedtype import charfun as cf
from boundedtype import confmap as cm
from boundedtype import harmonic as hm
from boundedtype import lattice, modular
from boundedtype.counterexample import run_dichotomy
from boundedtype.profiles import make_profile, tame_majorant, tame_minorant

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:          # run as a script from elsewhere
    ACCEPTANCE_LINES = []


def verdict(label, checks, elapsed, limit):
    """Record and assert; ``checks`` maps a description to (ok, detail)."""
    checks = dict(checks)
    checks[f"runtime < {limit:g} s"] = (elapsed < limit, f"{elapsed:.1f} s")
    ok = all(v[0] for v in checks.values())
    parts = [f"{k}: {'ok' if v[0] else 'FAILED'} ({v[1]})" for k, v in checks.items()]
    line = f"{'PASS' if ok else 'FAIL'} criterion {label} | " + "; ".join(parts)
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _unimodular(rng):
    while True:
        a, b, c = (int(v) for v in rng.integers(-5, 6, 3))
        for d in range(-5, 6):
            if a * d - b * c == 1:
                return (a, b), (c, d)


def test_criterion_1_modular_kernel():
    t0 = time.time()
    rng = np.random.default_rng(2024)
    c = {}
    v = modular.lam(1j)
    c["lambda(i) = 0.5 to 1e-12"] = (abs(v - 0.5) < 1e-12, f"{abs(v - 0.5):.1e}")
    tau = rng.uniform(-3, 3, 100) + 1j * rng.uniform(0.05, 10, 100)
    per = float(np.max(np.abs(modular.lam(tau + 2) - modular.lam(tau))))
    c["periodicity on 100 points to 1e-10"] = (per < 1e-10, f"{per:.1e}")
    ts = np.array([2.0, 4.0, 8.0, 16.0])
    lv = np.abs(modular.lam(1j * ts))
    ratio = lv / (16 * np.exp(-np.pi * ts))
    c["cusp decay ratios in [0.9, 1.1]"] = (
        bool(np.all((ratio >= 0.9) & (ratio <= 1.1)) and np.all(np.diff(lv) < 0)),
        ", ".join(f"{r:.6f}" for r in ratio))
    worst = 0.0
    for _ in range(20):
        M = _unimodular(rng)
        t = complex(rng.uniform(-1, 1), rng.uniform(0.5, 2))
        Mt = modular.mobius(M, t)
        if Mt.imag < 1e-3:
            Mt = modular.mobius(M, t + 1j)
            t = t + 1j
        w = modular.lam(Mt)
        worst = max(worst, min(abs(w - s) / max(1, abs(s)) for s in modular.six_values(modular.lam(t))))
    c["group action on 20 matrices to 1e-8"] = (worst < 1e-8, f"{worst:.1e}")
    verdict("1 (modular kernel)", c, time.time() - t0, 5)


def test_criterion_2_lemma_c():
    t0 = time.time()
    ys = [0.1 * 2.0 ** -j for j in range(9)]
    ratios = [lattice.lemmaC_integral(y).ratio for y in ys]
    lat = [lattice.lemmaC_lattice_sum(y)[1] for y in ys]
    c_hat = min(ratios)
    c = {
        "c_hat > 0": (c_hat > 0, f"c_hat = {c_hat:.4f}"),
        "integral ratios within factor 3": (max(ratios) / min(ratios) <= 3,
                                            f"band {max(ratios) / min(ratios):.3f}"),
        "lattice ratios positive, within factor 3": (
            min(lat) > 0 and max(lat) / min(lat) <= 3, f"band {max(lat) / min(lat):.3f}"),
    }
    verdict("2 (period integral of log+|lambda|)", c, time.time() - t0, 120)


def test_criterion_3_coprime_density():
    t0 = time.time()
    big = lattice.coprime_pairs(1e6)
    dens = big.count / (math.pi * 1e6)
    small = lattice.coprime_pairs(1e4)
    r4 = small.reciprocal_sum / math.log(1e4)
    r6 = big.reciprocal_sum / math.log(1e6)
    drift = abs(r6 - r4) / r6
    c = {
        "density within 0.5% of 0.6079": (abs(dens / 0.6079 - 1) < 5e-3, f"{dens:.5f}"),
        # sum = (6/pi) log X + C0 with C0 ~ 3.75: the ratio still drifts at 1e6
        "reciprocal-sum ratio stable within 2%": (drift < 0.02,
                                                  f"{r4:.4f} -> {r6:.4f}, drift {100 * drift:.2f}%"),
    }
    verdict("3 (coprime density)", c, time.time() - t0, 60)


CORPUS_MAPS = [("minorant", "exp(-abs(x)**0.25)"), ("minorant", "exp(-sqrt(abs(x)))"),
               ("minorant", "1/(1+abs(x))"), ("minorant", "min(1, 1/log(e+abs(x)))"),
               ("majorant", "exp(-abs(x))"), ("majorant", "exp(-x**2)")]


def _corpus_profile(kind, spec):
    m = make_profile(spec)
    return tame_minorant(m) if kind == "minorant" else tame_majorant(m)


def test_criterion_4_conformal_map():
    t0 = time.time()
    c = {}
    const = cm.build_map(cm.GraphDomain(make_profile("0.5"), -1))
    z = cm.standard_probe_points(100)
    err = float(np.max(np.abs(const.forward(z) - (z - 0.5j))))
    c["constant oracle to 1e-6"] = (err < 1e-6, f"{err:.1e}")
    worst_rt, worst_stab, worst_k, slow = 0.0, 0.0, 0.0, 0.0
    probes = cm.standard_probe_points(200)
    A = 2.0
    for kind, spec in CORPUS_MAPS:
        t1 = time.time()
        m = _corpus_profile(kind, spec)
        cmap = cm.build_map(cm.GraphDomain(m, -1))
        fine = cm.build_map(cm.GraphDomain(m, -1), N=2 * cmap.nodes.size)
        worst_rt = max(worst_rt, cm.round_trip_residual(cmap, probes))
        a, b = cm.deriv_bounds(cmap)
        a2, b2 = cm.deriv_bounds(fine)
        assert 0 < a <= b < math.inf
        worst_stab = max(worst_stab, abs(a - a2) / a2, abs(b - b2) / b2)
        k = cm.kellogg_H_check(m, A, np.array([1.0, 1e-2, 1e-4]))
        worst_k = max(worst_k, k["dev_H1"], k["dev_H2"])
        slow = max(slow, time.time() - t1)
    c["round trip < 1e-6 on 6 corpus maps"] = (worst_rt < 1e-6, f"{worst_rt:.1e}")
    c["|w'| bounds stable within 5% under doubling"] = (worst_stab < 0.05, f"{100 * worst_stab:.3f}%")
    tol = 1e-2 * (1 + 2 * A)
    c["Kellogg limits at s = 1e-4 (A = 2)"] = (worst_k < tol, f"max dev {worst_k:.1e} vs {tol:g}")
    c["< 2 min per profile"] = (slow < 120, f"slowest {slow:.1f} s")
    verdict("4 (conformal map)", c, time.time() - t0, 120 * (len(CORPUS_MAPS) + 1))


def test_criterion_5_boundary_monotonicity_and_comparison():
    t0 = time.time()
    c = {}
    for kind, spec in [("minorant", "exp(-sqrt(abs(x)))"), ("majorant", "exp(-abs(x))")]:
        cmap = cm.build_map(cm.GraphDomain(_corpus_profile(kind, spec), -1))
        c2 = cm.claim2_check(cmap, ys=(0.0, 0.1, 1.0), count=100)
        c3 = cm.claim3_check(cmap, count=200)
        c[f"V monotone, {kind}"] = (c2["ok"], f"{c2['violations']} violations / 300")
        c[f"n <= C m(x/C), {kind}"] = (c3["ok"] and c3["points"] == 200,
                                       f"C = {c3['C']:.4f}, max log gap {c3['max_log_gap']:.3f}")
    verdict("5 (V monotonicity, n(x) <= C m(x/C))", c, time.time() - t0, 60)


def test_criterion_6_harmonic_measure():
    t0 = time.time()
    rng = np.random.default_rng(6)
    H = hm.WalkDomain.flat()
    worst = 0.0
    for i in range(20):
        a = rng.uniform(-5, 5)
        b = a + rng.uniform(0.1, 5)
        z = complex(rng.uniform(-3, 3), rng.uniform(0.2, 3))
        est = hm.wos_measure(H, (a, b), z, 100_000, seed=1000 + i)
        worst = max(worst, abs(est.value - hm.halfplane_measure(a, b, z)) / est.stderr)
    n = tame_majorant(make_profile("exp(-abs(x))"))
    rep = hm.claim5_comparability(n, range(4, 9), 4j, samples=10 ** 6, seed=42)
    again = hm.wos_measure(hm.WalkDomain.from_profile(n), hm.middle_third(4), 4j, 10 ** 6,
                           seed=42 + 4000)
    c = {
        "20 half-plane cases within 3 stderr": (worst <= 3, f"worst {worst:.2f} stderr"),
        "rho_k for k = 4..8 within factor 10": (
            all(r > 0 for r in rep.ratio) and rep.band <= 10,
            "ratios " + ", ".join(f"{r:.3f}" for r in rep.ratio) + f"; band {rep.band:.3f}"),
        "seed-reproducible": (again.value == rep.omega[0], f"omega_4 = {again.value}"),
    }
    verdict("6 (harmonic measure comparability)", c, time.time() - t0, 300)


def test_criterion_7_characteristics():
    t0 = time.time()
    c = {}
    rs = [4, 8, 16, 32, 64, 128]
    corpus = [cf.identity(), cf.exp_neg_iz(), cf.mobius(1, -1j, 1, 1j)]
    ident, mono = True, True
    for f in corpus:
        tab = cf.characteristic_table(f, rs)
        ident &= bool(np.array_equal(tab.S, tab.A + tab.B + tab.C))
        mono &= tab.so_monotone()
    c["S = A + B + C exactly"] = (ident, "3 functions x 6 radii")
    c["S_o monotone up to 2x error"] = (mono, "3 functions")
    bs = [cf.char_B(cf.exp_neg_iz(), r) for r in (4, 16, 64)]
    dev = max(abs(b - 1) for b in bs)
    c["B(r; e^-iz) = 1 +- 1e-4"] = (dev < 1e-4, f"max dev {dev:.1e}")
    sub_ok = all(cf.subadditivity_check(f1, f2, r).ok
                 for f1 in corpus for f2 in corpus for r in (8, 32))
    c["subadditivity on corpus pairs"] = (sub_ok, "9 pairs x r in {8, 32}")
    e = cf.exp_neg_iz()
    spread = []
    for a in (2.0, -3 + 1j):
        la, arg = math.log(abs(a)), math.atan2(complex(a).imag, complex(a).real)
        pts = [(-arg - 2 * math.pi * k + 1j * la, 1) for k in range(-30, 31)]
        g = cf.reciprocal_shift(e, a, pts)
        d = [cf.char_A(g, r) + cf.char_B(g, r) + cf.char_C(g, r) - (cf.char_A(e, r) + cf.char_B(e, r))
             for r in rs]
        spread.append(max(abs(x) for x in d))
    c["|S(1/(f-a)) - S(f)| bounded"] = (max(spread) < 3.0,
                                        "constants " + ", ".join(f"{s:.3f}" for s in spread))
    verdict("7 (characteristics)", c, time.time() - t0, 120)


@pytest.fixture(scope="module")
def dichotomy_clock():
    return {"elapsed": 0.0}


def test_criterion_8a_convergent_direction(dichotomy_clock):
    t0 = time.time()
    res = run_dichotomy("exp(-sqrt(abs(x)))", "a")
    dichotomy_clock["elapsed"] += time.time() - t0
    g = res.growth
    c = {
        "log integral convergent": (res.log_integral_verdict == "convergent", "e^-sqrt|x|"),
        # the stated criterion: flat fit with residual < 5% over r <= 256
        "S_o flat fit residual < 5% (verdict bounded)": (
            res.verdict == "bounded",
            f"residual {100 * g.flat_residual:.1f}%, S_o "
            + ", ".join(f"{v:.3f}" for v in res.so.So)
            + f"; octave-increment ratio {res.notes.get('so_increment_ratio', float('nan')):.3f}"),
    }
    verdict("8(a) (bounded type for a convergent log integral)", c, time.time() - t0, 600)


def test_criterion_8b_divergent_direction(dichotomy_clock):
    t0 = time.time()
    res = run_dichotomy("exp(-abs(x))", "b")
    dichotomy_clock["elapsed"] += time.time() - t0
    n = res.notes
    c = {
        "log integral divergent": (res.log_integral_verdict == "divergent", "e^-|x|"),
        "increments bounded below by a positive constant": (
            n["increment_min"] > 0, f"min {n['increment_min']:.4f}"),
        "fitted constant within factor 4 of slope 1/8": (
            0.25 <= n["ratio_to_slope"] <= 4, f"median {n['increment_median']:.4f}, "
                                              f"ratio {n['ratio_to_slope']:.3f}"),
        "total runtime < 10 min": (dichotomy_clock["elapsed"] < 600,
                                   f"{dichotomy_clock['elapsed']:.0f} s for 8(a)+8(b)"),
    }
    verdict("8(b) (unbounded type for a divergent log integral)", c, time.time() - t0, 600)


if __name__ == "__main__":
    clock = {"elapsed": 0.0}
    for name, fn in list(globals().items()):
        if name.startswith("test_criterion"):
            try:
                fn(clock) if "8" in name else fn()
            except AssertionError:
                pass
