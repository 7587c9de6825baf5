"""Command line interface: ``plqalm solve|prox|diagnose|bench``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .alm import AlmConfig, Fixed, Geometric, VRule, alm_solve
from .bench import BUILTIN_STARTS, SUITES, run_benchmark, summary_table
from .diagnostics import check_kkt, fit_error_bound_constant, growth_probe, sosc_probe
from .lagrangian import PrimalDualPoint, kkt_residual
from .problems import BUILTIN_IDS, builtin, load_problem
from .prox import outer_from_dict, prox

EXIT_OK, EXIT_ERROR, EXIT_ASSERT = 0, 1, 2


def _floats(text: str) -> np.ndarray:
    return np.array([float(t) for t in text.split(",") if t.strip()])


def _load(path: str):
    """A problem file, or a built-in id when no such file exists."""
    if not Path(path).exists() and path in BUILTIN_IDS:
        return builtin(path)
    with open(path) as fh:
        return load_problem(json.load(fh), name=Path(path).stem)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o))


def _dump(obj) -> str:
    return json.dumps(obj, default=_json_default, indent=2)


def cmd_solve(args) -> int:
    p = _load(args.problem)
    if args.penalty == "fixed":
        rule = Fixed()
    elif args.penalty == "geometric":
        rule = Geometric(args.r)
    else:
        rule = VRule(args.theta_v, args.r)
    cfg = AlmConfig(rho0=args.rho0, penalty_rule=rule, tol_exponent=args.alpha,
                    stop_tol=args.tol, max_outer=args.max_outer)
    if args.x0 is not None:
        x0 = _floats(args.x0)
    elif p.name in BUILTIN_STARTS:
        x0 = np.asarray(BUILTIN_STARTS[p.name][0])
    else:
        x0 = p.theta.witness
    lam0 = _floats(args.lambda0) if args.lambda0 is not None else np.zeros(p.m)
    report = alm_solve(p, PrimalDualPoint(x0, lam0), cfg)
    if args.csv:
        Path(args.csv).write_text(report.to_csv())
    print(f"status      {report.status}")
    print(f"outer iters {len(report.records)}")
    print(f"final R     {report.final_residual:.6e}")
    print(f"x           {np.array2string(report.x, precision=10)}")
    print(f"lambda      {np.array2string(report.lam, precision=10)}")
    if report.q_factor is not None:
        print(f"q-factor    {report.q_factor:.4g} (superlinear: {report.superlinear})")
    print(f"kappa_hat   {report.kappa_hat:.4g}")
    return EXIT_OK if report.status == "kkt_reached" else EXIT_ASSERT


def cmd_prox(args) -> int:
    with open(args.g) as fh:
        g = outer_from_dict(json.load(fh))
    print(_dump({"prox": prox(g, _floats(args.z), args.r)}))
    return EXIT_OK


def cmd_diagnose(args) -> int:
    p = _load(args.problem)
    x, lam = _floats(args.x), _floats(args.lam)
    out = {"kkt": check_kkt(p, x, lam), "residual": kkt_residual(p, x, lam)}
    rows = [("KKT system", "satisfied" if out["kkt"] else "violated"), ("residual R", f"{out['residual']:.3e}")]
    if not out["kkt"]:
        print(_table(rows))
        print(_dump(out))
        return EXIT_ASSERT
    if args.sosc:
        rep = sosc_probe(p, x, lam, seed=args.seed)
        out["sosc"] = rep.to_dict()
        rows.append(("SOSC", f"{rep.verdict} (min {rep.min_value_estimate:.4g}, {rep.samples_used} samples)"))
    if args.growth:
        rep = growth_probe(p, x, lam, args.rho, args.gamma, seed=args.seed)
        out["growth"] = rep.to_dict()
        rows.append(("growth", f"ell_hat {rep.ell_hat:.4g}, violations {rep.violations}"))
    if args.errorbound:
        kappa = fit_error_bound_constant(p, x, lam, args.radius, seed=args.seed)
        out["error_bound_kappa"] = kappa
        rows.append(("error bound", f"kappa_hat {kappa:.4g}"))
    print(_table(rows))
    print(_dump(out))
    return EXIT_OK


def _table(rows) -> str:
    w = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{w}}  {v}" for k, v in rows)


def cmd_bench(args) -> int:
    outcomes = run_benchmark(SUITES[args.suite](), parallel=args.parallel, out_dir=args.out)
    print(summary_table(outcomes), end="")
    return EXIT_OK if all(o.passed for o in outcomes) else EXIT_ASSERT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="plqalm", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run the ALM on a problem file (or a built-in id)")
    s.add_argument("problem")
    s.add_argument("--rho0", type=float, default=10.0)
    s.add_argument("--penalty", choices=["fixed", "geometric", "vrule"], default="fixed")
    s.add_argument("--r", type=float, default=10.0, help="penalty growth factor")
    s.add_argument("--theta-v", type=float, default=0.5)
    s.add_argument("--alpha", type=float, default=1.5, help="tolerance exponent (> 1)")
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--max-outer", type=int, default=200)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--csv")
    s.add_argument("--x0")
    s.add_argument("--lambda0")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("prox", help="evaluate prox_{r g}(z)")
    s.add_argument("--g", required=True)
    s.add_argument("--z", required=True)
    s.add_argument("--r", type=float, default=1.0)
    s.set_defaults(func=cmd_prox)

    s = sub.add_parser("diagnose", help="second-order diagnostics at (x, lambda)")
    s.add_argument("problem")
    s.add_argument("--x", required=True)
    s.add_argument("--lambda", dest="lam", required=True)
    s.add_argument("--sosc", action="store_true")
    s.add_argument("--growth", action="store_true")
    s.add_argument("--rho", type=float, default=100.0)
    s.add_argument("--gamma", type=float, default=0.05)
    s.add_argument("--errorbound", action="store_true")
    s.add_argument("--radius", type=float, default=1e-2)
    s.add_argument("--seed", type=int, default=42)
    s.set_defaults(func=cmd_diagnose)

    s = sub.add_parser("bench", help="run a benchmark suite")
    s.add_argument("--suite", choices=sorted(SUITES), default="builtin")
    s.add_argument("--parallel", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
