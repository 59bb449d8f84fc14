"""Command-line driver: ``boundedtype <command> [options]``.

Exit codes: 0 success, 2 parse error, 3 domain error, 4 direction
mismatch, 5 invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
import time

import numpy as np

from . import __version__

EXIT_OK, EXIT_PARSE, EXIT_DOMAIN, EXIT_DIRECTION, EXIT_INVARIANT = 0, 2, 3, 4, 5


class InvariantFailure(RuntimeError):
    pass


# -- output helpers -------------------------------------------------------------

class Output:
    """Collects files for one run and writes manifest.json with checksums."""

    def __init__(self, outdir, config):
        self.outdir = outdir
        self.config = config
        self.files = []
        if outdir:
            os.makedirs(outdir, exist_ok=True)

    def csv(self, name, header, rows, stdout=False):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        text = buf.getvalue()
        if stdout or not self.outdir:
            sys.stdout.write(text)
        if self.outdir:
            self._write(name, text)

    def json(self, name, obj, stdout=False):
        text = json.dumps(obj, indent=2, default=_json_default) + "\n"
        if stdout or not self.outdir:
            sys.stdout.write(text)
        if self.outdir:
            self._write(name, text)

    def plot(self, name, data_file, xcol, ycols, title, logx=False):
        lines = [f"# gnuplot script for {data_file}", "set datafile separator ','",
                 "set key autotitle columnhead", f"set title '{title}'"]
        if logx:
            lines.append("set logscale x 2")
        parts = [f"'{data_file}' using {xcol}:{c} with linespoints" for c in ycols]
        lines.append("plot " + ", \\\n     ".join(parts))
        if self.outdir:
            self._write(name, "\n".join(lines) + "\n")

    def _write(self, name, text):
        path = os.path.join(self.outdir, name)
        with open(path, "w", newline="") as fh:
            fh.write(text)
        self.files.append(name)

    def finish(self, extra=None):
        if not self.outdir:
            return
        sums = {}
        for name in self.files:
            with open(os.path.join(self.outdir, name), "rb") as fh:
                sums[name] = hashlib.sha256(fh.read()).hexdigest()
        from . import config as cfg
        import scipy
        import sympy
        manifest = {
            "config": self.config,
            "tolerances": cfg.as_dict(),
            "versions": {"boundedtype": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__,
                         "sympy": sympy.__version__},
            "files": sums,
        }
        if extra:
            manifest["results"] = extra
        with open(os.path.join(self.outdir, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, default=_json_default)
            fh.write("\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if hasattr(o, "__dataclass_fields__"):
        from dataclasses import asdict
        return asdict(o)
    return str(o)


# -- argument parsing -----------------------------------------------------------

def _pair(text):
    try:
        re_, im_ = (float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 're,im', got {text!r}") from None
    return complex(re_, im_)


def _grid(text):
    # "re0:re1:n,im0:im1:n"
    try:
        a, b = text.split(",")
        r0, r1, nr = a.split(":")
        i0, i1, ni = b.split(":")
        xs = np.linspace(float(r0), float(r1), int(nr))
        ys = np.linspace(float(i0), float(i1), int(ni))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None
    X, Y = np.meshgrid(xs, ys)
    return (X + 1j * Y).ravel()


def _floats(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from None


def _ints(text):
    try:
        if ".." in text:
            a, b = text.split("..")
            return list(range(int(a), int(b) + 1))
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers or a..b: {text!r}") from None


def make_parser():
    p = argparse.ArgumentParser(prog="boundedtype", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="output directory (manifest.json written there)")
    common.add_argument("--config", default=None, help="JSON file of option defaults; flags win")
    common.add_argument("--seed", type=int, default=42)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("lambda", parents=[common], help="evaluate lambda")
    s.add_argument("--tau", type=_pair, action="append", default=None, help="re,im (repeatable)")
    s.add_argument("--grid", type=_grid, default=None, help="re0:re1:n,im0:im1:n")

    s = sub.add_parser("profile", parents=[common], help="audit a profile")
    s.add_argument("--profile", default=None, help="expression in x")
    s.add_argument("--profile-file", default=None, help="plateau table (x_lo x_hi value)")
    s.add_argument("--regularize", choices=["none", "minorant", "majorant"], default="none")
    s.add_argument("--t-max", type=float, default=1e6)
    s.add_argument("--k-max", type=int, default=40)

    s = sub.add_parser("char", parents=[common], help="characteristics A, B, C, S, S_o")
    s.add_argument("--function", default="exp", help="z | exp | const:c | mobius:a,b,c,d")
    s.add_argument("--r-grid", type=_floats, default=[4, 8, 16, 32, 64, 128])

    s = sub.add_parser("map-diag", parents=[common], help="conformal map diagnostics")
    s.add_argument("--profile", default="exp(-sqrt(abs(x)))")
    s.add_argument("--profile-file", default=None)
    s.add_argument("--regularize", choices=["auto", "none", "minorant", "majorant"], default="auto")
    s.add_argument("--nodes", type=int, default=1024)
    s.add_argument("--x-max", type=float, default=2.0 ** 12)

    s = sub.add_parser("lemmac", parents=[common], help="period integral of log+|lambda| versus log(1/y)")
    s.add_argument("--y-min", type=float, default=0.1 * 2.0 ** -8)
    s.add_argument("--y-max", type=float, default=0.1)
    s.add_argument("--steps", type=int, default=9)
    s.add_argument("--atol", type=float, default=1e-4)

    s = sub.add_parser("claim5", parents=[common], help="harmonic-measure comparability")
    s.add_argument("--profile", default="exp(-abs(x))")
    s.add_argument("--regularize", choices=["none", "minorant", "majorant"], default="majorant")
    s.add_argument("--k", type=_ints, default=list(range(4, 9)))
    s.add_argument("--z", type=_pair, default=4j)
    s.add_argument("--samples", type=int, default=10 ** 6)

    s = sub.add_parser("dichotomy", parents=[common], help="bounded/unbounded-type experiment")
    s.add_argument("--profile", default="exp(-sqrt(abs(x)))")
    s.add_argument("--direction", choices=["a", "b"], required=True)
    s.add_argument("--force", action="store_true", default=False)
    s.add_argument("--r-grid", type=_floats, default=[4, 8, 16, 32, 64, 128, 256])
    s.add_argument("--t-max", type=float, default=2.0 ** 12)
    s.add_argument("--nodes", type=int, default=1024)
    return p


def _suppress_defaults(parser):
    # a parser that records only the options actually given on the command line
    for act in parser._actions:
        if isinstance(act, argparse._SubParsersAction):
            for sub in act.choices.values():
                _suppress_defaults(sub)
        elif act.dest not in ("help", "version", "command"):
            act.default = argparse.SUPPRESS
            act.required = False


def parse(argv):
    args = make_parser().parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            sys.stderr.write(f"cannot read config: {exc}\n")
            raise SystemExit(EXIT_PARSE)
        probe = make_parser()
        _suppress_defaults(probe)
        explicit = set(vars(probe.parse_args(argv)))
        for k, v in cfg.items():
            k = k.replace("-", "_")
            if k not in explicit and hasattr(args, k):
                setattr(args, k, v)
    return args


def _config(args):
    d = {}
    for k, v in vars(args).items():
        if isinstance(v, complex):
            v = [v.real, v.imag]
        elif isinstance(v, np.ndarray):
            v = "grid"
        elif isinstance(v, list) and v and isinstance(v[0], complex):
            v = [[c.real, c.imag] for c in v]
        d[k] = v
    return d


def _load_profile(args):
    from .profiles import make_profile, profile_from_file
    if getattr(args, "profile_file", None):
        return profile_from_file(args.profile_file)
    return make_profile(args.profile)


# -- commands ---------------------------------------------------------------------

def cmd_lambda(args, out):
    from . import modular
    pts = []
    if args.tau:
        pts += list(args.tau)
    if args.grid is not None:
        pts += list(args.grid)
    if not pts:
        raise argparse.ArgumentTypeError("give --tau or --grid")
    tau = np.array(pts, dtype=complex)
    lv = modular.lam(tau)
    rho = modular.spherical_derivative(tau)
    rows = [(t.real, t.imag, v.real, v.imag, r) for t, v, r in zip(tau, lv, rho)]
    out.csv("lambda.csv", ["re", "im", "lam_re", "lam_im", "rho"], rows)
    return {"points": len(rows)}


def cmd_profile(args, out):
    from .profiles import tame_minorant, tame_majorant, is_tame, log_integral
    m = _load_profile(args)
    if args.regularize == "minorant":
        m = tame_minorant(m)
    elif args.regularize == "majorant":
        m = tame_majorant(m)
    tr = is_tame(m)
    li = log_integral(m, args.t_max, args.k_max)
    report = {"profile": m.to_dict(), "is_tame": tr.is_tame, "plateau_ok": tr.plateau_ok,
              "decay_ok": tr.decay_ok, "threshold": tr.threshold,
              "first_violation": tr.first_violation, "decay_witness": tr.decay_witness,
              "log_integral": {"verdict": li.verdict, "ratio_fit": li.ratio_fit,
                               "fit_residual": li.fit_residual,
                               "partial_at_T_max": li.partial[-1],
                               "dyadic_sum_at_K_max": li.dyadic_sum[-1]}}
    out.json("profile.json", report)
    if out.outdir:
        out.csv("log_integral.csv", ["T", "partial"], zip(li.T, li.partial))
        out.csv("dyadic_sum.csv", ["K", "dyadic_sum"], zip(li.K, li.dyadic_sum))
        out.plot("log_integral.plt", "log_integral.csv", 1, [2], "partial log integral", True)
    return {"verdict": li.verdict, "is_tame": tr.is_tame}


def _function(spec):
    from . import charfun as cf
    if spec == "z":
        return cf.identity()
    if spec == "exp":
        return cf.exp_neg_iz()
    if spec.startswith("const:"):
        return cf.constant(complex(spec.split(":", 1)[1]))
    if spec.startswith("mobius:"):
        a, b, c, d = (complex(v) for v in spec.split(":", 1)[1].split(","))
        return cf.mobius(a, b, c, d)
    raise argparse.ArgumentTypeError(f"unknown function {spec!r}")


def cmd_char(args, out):
    from .charfun import characteristic_table
    f = _function(args.function)
    if min(args.r_grid) <= 1:
        raise ValueError("all r must exceed 1")
    tab = characteristic_table(f, args.r_grid)
    out.csv("char.csv", ["r", "A", "B", "C", "S", "So", "err"], tab.rows())
    out.plot("char.plt", "char.csv", 1, [5, 6], f"S and S_o for {f.name}", True)
    if not tab.so_monotone():
        raise InvariantFailure("S_o not monotone within twice its error")
    return {"function": f.name, "so_monotone": True}


def _regularized(m, mode):
    from .profiles import tame_minorant, tame_majorant, is_tame, tends_to_zero
    if mode == "minorant":
        return tame_minorant(m)
    if mode == "majorant":
        return tame_majorant(m)
    if mode == "auto" and m.kind != "piecewise" and not _is_constant(m):
        return tame_majorant(m) if tends_to_zero(m) and not is_tame(m).is_tame \
            and _divergent(m) else tame_minorant(m)
    return m


def _is_constant(m):
    x = np.geomspace(1e-3, 2.0 ** 12, 50)
    return bool(np.all(m(x) == m(0.0)))


def _divergent(m):
    from .profiles import log_integral
    return log_integral(m).verdict == "divergent"


def cmd_map_diag(args, out):
    from . import confmap as cm
    m = _regularized(_load_profile(args), args.regularize)
    checks = {}
    coarse = args.nodes < 256
    # coarse grids are built loosely and judged by the refinement study instead
    cmap = cm.build_map(cm.GraphDomain(m, -1), N=args.nodes, x_max=args.x_max,
                        residual_tol=5e-2 if coarse else 1e-3)
    fine = cm.build_map(cm.GraphDomain(m, -1), N=2 * args.nodes, x_max=args.x_max)
    probes = cm.standard_probe_points(200)
    rt = cm.round_trip_residual(cmap, probes)
    w1, w2 = cmap.forward(probes), fine.forward(probes)
    conv = float(np.max(np.abs(w1 - w2) / np.abs(w2)))
    b1, b2 = cm.deriv_bounds(cmap), cm.deriv_bounds(fine)
    stab = max(abs(b1[0] - b2[0]) / b2[0], abs(b1[1] - b2[1]) / b2[1])
    from .profiles import tends_to_zero
    decays = tends_to_zero(m)
    A = 2.0 * max(m.m0, 0.5)
    kel = cm.kellogg_H_check(m, A, np.geomspace(1.0, 1e-4, 41))
    curve = cm.boundary_curve(cmap)
    c2 = cm.claim2_check(cmap)
    c3 = cm.claim3_check(cmap, curve)
    sym = float(np.max(np.abs(cmap.forward(-probes.conj()) + cmap.forward(probes).conj())))
    checks = {
        "round_trip": {"value": rt, "ok": rt < 1e-6},
        "symmetry": {"value": sym, "ok": sym < 1e-8},
        "resolution_convergence": {"value": conv, "ok": conv < 1e-4},
        "deriv_bounds": {"inf": b1[0], "sup": b1[1], "ratio": b1[1] / b1[0],
                         "refined": b2, "stability": stab, "ok": stab < 0.05},
        # the limit H'' -> -2iA presumes m -> 0 at infinity
        "kellogg": {"A": A, "dev_H1": kel["dev_H1"], "dev_H2": kel["dev_H2"],
                    "tol": kel["tol"], "applicable": decays,
                    "ok": kel["ok"] if decays else True},
        "boundary_curve": {"symmetric": curve.symmetric, "monotone": curve.monotone,
                           "first_violation": curve.first_violation,
                           "ok": curve.symmetric and curve.monotone},
        "claim2": c2, "claim3": c3,
    }
    warnings = []
    if coarse:
        warnings.append("node count below 256: resolution-convergence check is advisory")
    if not checks["resolution_convergence"]["ok"]:
        warnings.append("resolution convergence above 1e-4")
    report = {"profile": m.to_dict(), "build": cmap.diagnostics,
              "normalization": cmap.normalization, "checks": checks, "warnings": warnings}
    out.json("map_diag.json", report)
    failing = [k for k, v in checks.items() if not v.get("ok", True)
               and not (coarse and k in ("resolution_convergence", "deriv_bounds"))]
    if failing:
        raise InvariantFailure("failed checks: " + ", ".join(failing))
    return {"checks": {k: v.get("ok") for k, v in checks.items()}, "warnings": warnings}


def cmd_lemmac(args, out):
    from . import lattice
    if not (1e-5 <= args.y_min <= args.y_max <= 0.1):
        raise ValueError("y range must lie within [1e-5, 1e-1]")
    ys = args.y_max * 2.0 ** -np.linspace(0.0, math.log2(args.y_max / args.y_min), args.steps)
    rows = []
    for y in ys:
        r = lattice.lemmaC_integral(float(y), atol=args.atol)
        s, _ = lattice.lemmaC_lattice_sum(float(y)) if y >= 1e-6 else (float("nan"), 0)
        rows.append((float(y), r.value, s, r.ratio))
    out.csv("lemmac.csv", ["y", "integral", "lattice_sum", "ratio_to_log"], rows)
    c_hat = min(r[3] for r in rows)
    sys.stderr.write(f"c_hat = {c_hat!r}\n")
    out.plot("lemmac.plt", "lemmac.csv", 1, [4], "integral / log(1/y)", True)
    if c_hat <= 0:
        raise InvariantFailure("non-positive period-integral ratio")
    return {"c_hat": c_hat}


def cmd_claim5(args, out):
    from .harmonic import claim5_comparability
    m = _regularized(_load_profile(args), args.regularize)
    rep = claim5_comparability(m, args.k, args.z, args.samples, args.seed)
    out.csv("claim5.csv", ["k", "omega", "stderr", "mass", "ratio"],
            zip(rep.k, rep.omega, rep.stderr, rep.mass, rep.ratio))
    out.plot("claim5.plt", "claim5.csv", 1, [5], "omega / int dt/t^2")
    sys.stderr.write(f"band = {rep.band:.4f}\n")
    return {"band": rep.band, "seed": args.seed}


def cmd_dichotomy(args, out):
    from .counterexample import run_dichotomy
    m = _load_profile(args)
    res = run_dichotomy(m, args.direction, force=args.force, r_grid=args.r_grid,
                        T=args.t_max, N=args.nodes)
    bi = res.boundary
    out.csv("boundary_integral.csv",
            ["k", "T", "increment", "partial", "err", "mode", "homogenized"],
            [(r.k, r.hi, r.value, p, r.error, r.mode, r.homogenized)
             for r, p in zip(bi.rows, bi.partial)], stdout=False)
    out.plot("boundary_integral.plt", "boundary_integral.csv", 2, [3], "per-octave increment", True)
    summary = {"profile": res.profile, "direction": res.direction,
               "log_integral_verdict": res.log_integral_verdict, "verdict": res.verdict,
               "notes": res.notes}
    if res.so is not None:
        out.csv("so.csv", ["r", "So", "err", "layer_share"],
                zip(res.so.r, res.so.So, res.so.err, res.so.layer_share), stdout=False)
        out.plot("so.plt", "so.csv", 1, [2], "S_o(r; lambda o W)", True)
        summary["growth"] = res.growth
    sys.stdout.write(f"verdict: {res.verdict}\n")
    if "so_increment_ratio" in res.notes:
        sys.stdout.write(f"so_increment_ratio: {res.notes['so_increment_ratio']:.4f}\n")
    return summary


COMMANDS = {"lambda": cmd_lambda, "profile": cmd_profile, "char": cmd_char,
            "map-diag": cmd_map_diag, "lemmac": cmd_lemmac, "claim5": cmd_claim5,
            "dichotomy": cmd_dichotomy}


def main(argv=None):
    from .modular import DomainError
    from .profiles import ProfileSyntaxError
    from .counterexample import DirectionMismatch
    from .confmap import MapBuildError
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse(argv)
    except SystemExit as exc:       # argparse reports parse errors with code 2
        return int(exc.code or 0)
    out = Output(args.out, _config(args))
    t0 = time.time()
    try:
        result = COMMANDS[args.command](args, out)
    except argparse.ArgumentTypeError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_PARSE
    except ProfileSyntaxError as exc:
        sys.stderr.write(f"profile syntax error: {exc}\n")
        return EXIT_PARSE
    except DirectionMismatch as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DIRECTION
    except (InvariantFailure, MapBuildError) as exc:
        sys.stderr.write(f"invariant failure: {exc}\n")
        out.finish({"status": "invariant failure", "detail": str(exc)})
        return EXIT_INVARIANT
    except (DomainError, ValueError) as exc:     # includes profile audit failures
        sys.stderr.write(f"domain error: {exc}\n")
        return EXIT_DOMAIN
    out.finish(dict(result or {}, elapsed_seconds=round(time.time() - t0, 3)))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
