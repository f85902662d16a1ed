"""Command line harness: single runs, certificates, the optimiser and presets.

Every subcommand writes deterministic CSV/JSON to ``--out`` (or stdout) and
puts wall-clock timings in a separate ``<out>.timing.json`` file.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import advection as adv
from . import euler2d as eu
from .certify import (CertificateError, ConvexScheme, FEAS_TOL, lambda_max_search,
                      theorem1_certificate, theorem2_certificate)
from .metrics import (eoc_table, l1_norm, l1o_quasinorm, l2_norm, linf_norm, range_growth,
                      spacetime_errors)
from .tableaux import TVD3_4_LAMBDA, TVD3_4_THETA, TVD3_LAMBDA, TVD3_THETA, ImexTableau, builtin

try:  # Python >= 3.11
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as _toml

log = logging.getLogger("tvdimex")

DIGITS = 12
CLI_TOL = 1e-8


# ---------------------------------------------------------------------------
# output helpers

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.{DIGITS}g}"
    return str(v)


def _csv_text(header, rows):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(type(v))


def _write_timing(out, seconds):
    if out is None:
        return
    _emit(_json({"wall_seconds": round(seconds, 3)}), f"{out}.timing.json")


# ---------------------------------------------------------------------------
# scalar runs

def _scalar_spec(args):
    eps = args.eps
    if args.N is not None:
        return adv.ScalarProblemSpec(eps=eps, N=args.N)
    return adv.ScalarProblemSpec.from_dx(args.dx, eps=eps)


def _scalar_errors(spec, run, initial="discontinuous"):
    exact = adv.exact_discontinuous if initial == "discontinuous" else adv.exact_smooth
    e = run.w - exact(spec, run.t, spec.x)
    growth = range_growth(run.ranges, float(np.ptp(run.w0)))
    g = float(growth[-1]) if growth.size else 0.0
    return {"L1": l1_norm(e, spec.dx), "L2": l2_norm(e, spec.dx), "Linf": linf_norm(e),
            "L1o": l1o_quasinorm(e, spec.dx, g)}


def cmd_advect(args):
    spec = _scalar_spec(args)
    run = adv.simulate(spec, args.scheme, args.tfinal, initial=args.initial,
                       cfl_mode=args.cfl_mode, nu=args.nu, dt=args.dt)
    summary = {"scheme": args.scheme, "N": spec.N, "eps": spec.eps, "t": run.t,
               "steps": len(run.times), **_scalar_errors(spec, run, args.initial),
               "max": max(run.maxima), "min": min(run.minima)}
    if run.stats is not None:
        summary["mood"] = run.stats.to_dict()
    exact = adv.exact_discontinuous if args.initial == "discontinuous" else adv.exact_smooth
    rows = zip(spec.x, run.w, exact(spec, run.t, spec.x))
    _emit(_csv_text(["x", "w", "exact"], rows), args.out)
    if args.summary:
        _emit(_json(summary), args.summary)
    else:
        sys.stderr.write(_json(summary))
    return 0


def preset_error_lines(args):
    """L1 and L1o errors of the scalar schemes under grid refinement."""
    schemes = _split(args.schemes) or ["IMEX1", "TVD3", "IMEX3", "ARS233", "MOOD3", "MOOD3_4"]
    dxs = [args.dx0 / 2**k for k in range(args.levels)]
    rows = []
    for name in schemes:
        for dx in dxs:
            spec = adv.ScalarProblemSpec.from_dx(dx, eps=args.eps)
            run = adv.simulate(spec, name, 1.0, cfl_mode=args.cfl_mode, nu=args.nu,
                               dt=args.dt)
            err = _scalar_errors(spec, run)
            rows.append([spec.N, name, err["L1"], err["L1o"]])
    _emit(_csv_text(["N", "scheme", "L1", "L1o"], rows), args.out)
    return 0


def preset_spacetime(args):
    """Space-time errors of MOOD3(4) with the two first-order parachutes."""
    rows = []
    for eps in _floats(args.eps_list):
        spec = adv.ScalarProblemSpec.from_dx(args.dx, eps=eps)
        res = {}
        for label, levels in (("TVD3_4", ("IMEX3_4", "TVD3_4")),
                              ("IMEX1_4", ("IMEX3_4", "IMEX1_4"))):
            run = adv.simulate(spec, "MOOD3_4", 1.0, dt=args.dt, nu=args.nu, levels=levels)
            res[label] = spacetime_errors(run.exact_ranges, run.ranges)
        ratio_mean = res["IMEX1_4"][0] / res["TVD3_4"][0] if res["TVD3_4"][0] else float("nan")
        ratio_max = res["IMEX1_4"][1] / res["TVD3_4"][1] if res["TVD3_4"][1] else float("nan")
        rows.append([eps, *res["TVD3_4"], *res["IMEX1_4"], ratio_mean, ratio_max])
    _emit(_csv_text(["eps", "tvd34_mean", "tvd34_max", "imex14_mean", "imex14_max",
                     "ratio_mean", "ratio_max"], rows), args.out)
    return 0


def preset_flexibility(args):
    """MOOD3(4) and ARS(2,3,3) errors for a range of CFL numbers."""
    spec = adv.ScalarProblemSpec(eps=args.eps, N=args.N)
    rows = []
    lams = _floats(args.lams) or [TVD3_4_LAMBDA, 0.25, 0.05, 0.01, 0.002, 0.0009]
    jobs = [("MOOD3_4", lam) for lam in lams] + [("ARS233", 0.9 * args.eps)]
    for name, lam in jobs:
        dt = spec.dx * lam / (1.0 + 1.0 / spec.eps)
        t0 = time.perf_counter()
        run = adv.simulate(spec, name, 1.0, dt=dt)
        cpu = time.perf_counter() - t0
        err = _scalar_errors(spec, run)
        rows.append([name, lam, err["L1"], err["L1o"], round(cpu, 3) if args.timing else ""])
    _emit(_csv_text(["scheme", "lambda", "L1", "L1o", "cpu_s"], rows), args.out)
    return 0


def preset_step_solutions(args):
    """Final profiles of the third-order schemes, material and acoustic CFL."""
    schemes = _split(args.schemes) or ["IMEX3", "ARS233", "TVD3", "MOOD3", "MOOD3_4"]
    spec = adv.ScalarProblemSpec.from_dx(args.dx, eps=args.eps)
    cols, header = [spec.x, adv.exact_discontinuous(spec, 1.0, spec.x)], ["x", "exact"]
    for mode in ("material", "acoustic"):
        for name in schemes:
            run = adv.simulate(spec, name, 1.0, cfl_mode=mode, nu=args.nu)
            cols.append(run.w)
            header.append(f"{name}_{mode}")
    _emit(_csv_text(header, zip(*cols)), args.out)
    return 0


def preset_motivation(args):
    """Max/min history of IMEX1 and IMEX3 showing over- and undershoots."""
    spec = adv.ScalarProblemSpec.from_dx(args.dx, eps=args.eps)
    rows = []
    for name in ("IMEX1", "IMEX3"):
        run = adv.simulate(spec, name, 1.0, nu=args.nu)
        rows += [[name, t, mx, mn] for t, mx, mn in zip(run.times, run.maxima, run.minima)]
    _emit(_csv_text(["scheme", "t", "max", "min"], rows), args.out)
    return 0


# ---------------------------------------------------------------------------
# Euler runs

def _norm_scheme(s):
    return {"imex1": "IMEX1", "tvd34": "TVD3_4", "mood34": "MOOD3_4", "imex34": "IMEX3_4",
            "ars": "ARS233", "arsmood": "ARS_MOOD"}.get(s.lower().replace("_", ""), s)


def cmd_euler(args):
    run = eu.run_euler(args.case, _norm_scheme(args.scheme), args.mach, N=args.N,
                       t_final=args.tfinal, cfl_mode=args.cfl_mode, nu=args.nu, dt=args.dt,
                       n_steps=args.steps)
    _emit(eu.write_csv(run.U, run.grid), args.out)
    if args.binary:
        eu.write_binary(run.U, run.grid, run.params, run.t, args.case, args.binary)
    summary = {"case": args.case, "scheme": run.scheme, "M": args.mach, "t": run.t,
               "steps": run.steps, "rho_max": float(run.U[0].max()),
               "rho_min": float(run.U[0].min()),
               "mass": float(run.U[0].sum() * run.grid.cell_area)}
    if run.stats is not None:
        summary["mood"] = run.stats.to_dict()
    if args.summary:
        _emit(_json(summary), args.summary)
    else:
        sys.stderr.write(_json(summary))
    return 0


def _vortex_errors(run):
    m = np.hypot(run.U[1], run.U[2])
    m0 = np.hypot(run.U0[1], run.U0[2])
    a = run.grid.cell_area
    return l2_norm(run.U[0] - run.U0[0], a), l2_norm(m - m0, a)


def preset_vortex(args):
    """L2 errors and EOCs of density and momentum norm for the vortex."""
    schemes = [_norm_scheme(s) for s in _split(args.schemes)] or ["IMEX1", "TVD3_4", "MOOD3_4"]
    Ns = [int(n) for n in _split(args.Ns)] or [32, 64, 128]
    blocks = []
    for name in schemes:
        rho_e, mom_e = [], []
        for n in Ns:
            run = eu.run_euler("vortex", name, args.mach, N=n, nu=args.nu)
            er, em = _vortex_errors(run)
            rho_e.append(er)
            mom_e.append(em)
        cells = [n * n for n in Ns]
        rep = eoc_table(cells, {"L2": rho_e, "Linf": mom_e}, dim=2, norms=("L2", "Linf"),
                        eoc_for=("L2", "Linf"))
        for row in rep.rows:
            blocks.append([name, row["N"], row["L2"], row["EOC_L2"], row["Linf"],
                           row["EOC_Linf"]])
    header = ["scheme", "N", "L2_rho", "EOC_rho", "L2_mom", "EOC_mom"]
    _emit(_csv_text(header, [[("" if v is None else v) for v in r] for r in blocks]), args.out)
    return 0


def double_shear_error(M, N=25, scheme="MOOD3_4", nu=None, t_final=None):
    """``||rho - mean(rho)||_2`` (area weighted) at the final time."""
    run = eu.run_euler("double_shear", scheme, M, N=N, nu=nu, t_final=t_final)
    rho = run.U[0]
    return l2_norm(rho - rho.mean(), run.grid.cell_area), run


def preset_double_shear(args):
    rows = []
    for M in _floats(args.machs) or [1e-1, 1e-2, 1e-3, 1e-4]:
        err, run = double_shear_error(M, args.N, _norm_scheme(args.scheme), args.nu, args.tfinal)
        acts = run.stats.activations_per_level if run.stats else []
        rows.append([M, err, run.steps, " ".join(map(str, acts))])
    _emit(_csv_text(["M", "L2_rho_minus_mean", "steps", "activations"], rows), args.out)
    return 0


def preset_explosion(args):
    rows = []
    for name in [_norm_scheme(s) for s in _split(args.schemes)] or ["IMEX1", "IMEX3_4", "MOOD3_4"]:
        run = eu.run_euler("explosion", name, 1.0, N=args.N, n_steps=args.steps)
        U = run.U
        sym = max(np.max(np.abs(U[0] - np.rot90(U[0]))), np.max(np.abs(U[0] - U[0].T)))
        acts = run.stats.activations_per_level if run.stats else []
        rows.append([name, run.steps, float(U[0].max()), float(U[0].min()), sym,
                     " ".join(map(str, acts))])
    _emit(_csv_text(["scheme", "steps", "rho_max", "rho_min", "symmetry_defect",
                     "activations"], rows), args.out)
    return 0


def preset_riemann(args, case):
    rows = []
    for mode in ("acoustic", "material"):
        run = eu.run_euler(case, "MOOD3_4", args.mach, cfl_mode=mode, nu=args.nu)
        j = run.grid.Ny // 2
        for i, x in enumerate(run.grid.x):
            rows.append([mode, x, run.U[0, i, j], run.U[1, i, j], run.U[2, i, j]])
    _emit(_csv_text(["cfl_mode", "x", "rho", "mom_x", "mom_y"], rows), args.out)
    return 0


# ---------------------------------------------------------------------------
# certificates and optimiser

NAMED_CONVEX = {
    "TVD3": (lambda: builtin("TVD3"), TVD3_THETA),
    "TVD3_4": (lambda: builtin("TVD3_4"), TVD3_4_THETA),
}


def load_convex(path_or_name):
    """Tableau plus ``theta`` (and optional ``lambda``) from JSON or a builtin name."""
    key = str(path_or_name).upper().replace("(", "_").replace(")", "")
    if key in NAMED_CONVEX:
        make, theta = NAMED_CONVEX[key]
        lam = TVD3_4_LAMBDA if key == "TVD3_4" else float(TVD3_LAMBDA)
        return ConvexScheme(make(), tuple(float(t) for t in theta)), lam
    with open(path_or_name, encoding="utf-8") as fh:
        data = json.load(fh)
    tab = ImexTableau.from_dict(data.get("tableau", data))
    if "theta" not in data:
        raise ValueError("the tableau file needs a 'theta' entry")
    return ConvexScheme(tab, tuple(data["theta"])), data.get("lambda")


def cmd_certify(args):
    scheme, lam_file = load_convex(args.tableau)
    lam = args.lam if args.lam is not None else lam_file
    lam_max = lambda_max_search(scheme, tol=args.tol)
    fn = theorem1_certificate if scheme.stage_tableau.is_ck else theorem2_certificate
    out = {"lambda_max": lam_max, "tol": args.tol}
    if lam is not None:
        try:
            cert = fn(scheme, lam, tol=args.tol)
            out.update(feasible=cert.feasible, lam=float(lam), binding=cert.binding(3))
        except CertificateError as exc:
            out.update(feasible=False, lam=float(lam), error=str(exc))
    else:
        out["feasible"] = lam_max > 0
    text = f"feasible={str(out['feasible']).lower()}\nlambda={lam_max:.16g}\n"
    sys.stdout.write(text)
    if args.out:
        _emit(_json(out), args.out)
    return 0


def cmd_export(args):
    scheme, lam = load_convex(args.name)
    data = {"tableau": scheme.tableau.to_dict(), "theta": [float(t) for t in scheme.theta],
            "lambda": lam}
    _emit(_json(data), args.out)
    return 0


def cmd_optimize(args):
    from .optimize import OptProblem, reference_start, optimize
    prob = OptProblem(s=args.stages, lam_floor=args.lam_floor, theta_min=args.theta_min)
    x0 = reference_start(prob) if args.warm_start else None
    res = optimize(prob, seed=args.seed, restarts=args.restarts, x0=x0, workers=args.workers)
    _emit(_json(res.to_dict()), args.out)
    return 0 if res.feasible else 3


def cmd_convergence(args):
    """EOC table of a scalar scheme on the smooth solution."""
    rows_err = {"L1": [], "L2": [], "Linf": [], "L1o": []}
    Ns = []
    for k in range(args.levels):
        spec = adv.ScalarProblemSpec.from_dx(args.dx0 / 2**k, eps=args.eps)
        run = adv.simulate(spec, args.scheme, args.tfinal, initial=args.initial,
                           cfl_mode=args.cfl_mode, nu=args.nu)
        for key, v in _scalar_errors(spec, run, args.initial).items():
            rows_err[key].append(v)
        Ns.append(spec.N)
    rep = eoc_table(Ns, rows_err)
    _emit(rep.to_csv(digits=DIGITS), args.out)
    return 0


# ---------------------------------------------------------------------------
# parser

def _split(s):
    return [v.strip() for v in s.split(",") if v.strip()] if s else []


def _floats(s):
    return [float(v) for v in _split(s)]


def _common(p, nu=0.5):
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--nu", type=float, default=nu, help="CFL number")
    p.add_argument("--cfl-mode", choices=("acoustic", "material"), default="material")
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    ap = argparse.ArgumentParser(prog="tvdimex", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="TOML (or JSON) file with default option values")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("advect", help="one scalar run")
    _common(p)
    p.add_argument("--scheme", default="MOOD3_4")
    p.add_argument("--N", type=int)
    p.add_argument("--dx", type=float, default=0.1)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--dt", type=float)
    p.add_argument("--tfinal", type=float, default=1.0)
    p.add_argument("--initial", choices=("discontinuous", "smooth"), default="discontinuous")
    p.add_argument("--summary", help="JSON summary file")
    p.set_defaults(func=cmd_advect)

    p = sub.add_parser("euler", help="one Euler run")
    _common(p, nu=None)
    p.add_argument("--case", choices=eu.CASES, default="vortex")
    p.add_argument("--scheme", default="MOOD3_4")
    p.add_argument("--mach", "--M", type=float, default=1.0)
    p.add_argument("--N", type=int)
    p.add_argument("--tfinal", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--binary", help="binary snapshot file")
    p.add_argument("--summary", help="JSON summary file")
    p.set_defaults(func=cmd_euler)

    p = sub.add_parser("certify", help="certificate of a convex scheme")
    p.add_argument("--tableau", required=True, help="JSON file or TVD3 / TVD3_4")
    p.add_argument("--lam", type=float)
    p.add_argument("--tol", type=float, default=CLI_TOL)
    p.add_argument("--out")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("export", help="write a named convex scheme as JSON")
    p.add_argument("name")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("optimize", help="multistart tableau search")
    p.add_argument("--stages", type=int, default=4)
    p.add_argument("--lam-floor", type=float, default=0.5)
    p.add_argument("--theta-min", type=float, default=0.0)
    p.add_argument("--restarts", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--warm-start", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("convergence", help="EOC table of a scalar scheme")
    _common(p)
    p.add_argument("--scheme", default="TVD3_4")
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--dx0", type=float, default=0.1)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--tfinal", type=float, default=1.0)
    p.add_argument("--initial", choices=("discontinuous", "smooth"), default="smooth")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("error-lines", help="L1/L1o errors under refinement")
    _common(p)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--schemes")
    p.add_argument("--dx0", type=float, default=0.1)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--dt", type=float)
    p.set_defaults(func=preset_error_lines)

    p = sub.add_parser("spacetime-table", help="space-time errors of the two parachutes")
    _common(p)
    p.add_argument("--eps-list", default="1,0.1,0.01,0.001")
    p.add_argument("--dx", type=float, default=0.1)
    p.add_argument("--dt", type=float, help="fixed step (default: from --nu)")
    p.set_defaults(func=preset_spacetime)

    p = sub.add_parser("flexibility-table", help="errors for a range of CFL numbers")
    _common(p)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--N", type=int, default=4000)
    p.add_argument("--lams")
    p.add_argument("--timing", action="store_true", help="include CPU seconds")
    p.set_defaults(func=preset_flexibility)

    p = sub.add_parser("fig-step-solutions", help="final profiles, both CFL modes")
    _common(p)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--dx", type=float, default=0.1)
    p.add_argument("--schemes")
    p.set_defaults(func=preset_step_solutions)

    p = sub.add_parser("fig-motivation", help="extrema history of IMEX1 and IMEX3")
    _common(p)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--dx", type=float, default=0.1)
    p.set_defaults(func=preset_motivation)

    p = sub.add_parser("vortex", help="vortex convergence table")
    _common(p, nu=0.1)
    p.add_argument("--mach", "--M", type=float, default=1.0)
    p.add_argument("--schemes")
    p.add_argument("--Ns", default="32,64,128")
    p.set_defaults(func=preset_vortex)

    p = sub.add_parser("double-shear", help="density deviation against Mach number")
    _common(p, nu=None)
    p.add_argument("--machs")
    p.add_argument("--N", type=int, default=25)
    p.add_argument("--scheme", default="MOOD3_4")
    p.add_argument("--tfinal", type=float)
    p.set_defaults(func=preset_double_shear)

    p = sub.add_parser("explosion", help="circular explosion summary")
    _common(p)
    p.add_argument("--N", type=int, default=100)
    p.add_argument("--steps", type=int, default=24)
    p.add_argument("--schemes")
    p.set_defaults(func=preset_explosion)

    for case in ("acoustic_rp", "shear_wave"):
        p = sub.add_parser(case.replace("_", "-"), help=f"{case} profiles, both CFL modes")
        _common(p)
        p.add_argument("--mach", "--M", type=float, default=1.0)
        p.set_defaults(func=lambda a, c=case: preset_riemann(a, c))
    return ap


def _load_config(path):
    raw = Path(path).read_bytes()
    try:
        return _toml.loads(raw.decode("utf-8"))
    except _toml.TOMLDecodeError:
        return json.loads(raw)


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config:
        cfg = _load_config(args.config)
        section = cfg.get(args.command, cfg)
        sub = ap._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in section.items()
                            if not isinstance(v, dict)})
        args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    t0 = time.perf_counter()
    try:
        code = args.func(args)
    except (FloatingPointError, ValueError, KeyError, OSError, CertificateError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    _write_timing(getattr(args, "out", None), time.perf_counter() - t0)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
