"""Benchmark runner over the built-in problems."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .alm import AlmConfig, Geometric, RunReport, VRule, alm_solve
from .lagrangian import PrimalDualPoint
from .problems import builtin

log = logging.getLogger(__name__)

#: default starting points for the built-in problems
BUILTIN_STARTS = {
    "lasso1d": ([0.0], [0.0]),
    "degen2d": ([1.0, 1.0], [0.0, 0.0]),
    "minimax1d": ([0.0], [0.0, 0.0]),
    "affine_l1": ([1.0, 0.0], [0.0, 0.0]),
    "elq1": ([0.0, 0.0], [0.0, 0.0]),
}


@dataclass(frozen=True)
class BenchEntry:
    problem: str
    label: str
    config: AlmConfig
    q_max: Optional[float] = None
    superlinear: Optional[bool] = None
    target_tol: Optional[float] = None
    start: Optional[tuple] = None


@dataclass
class BenchOutcome:
    entry: BenchEntry
    report: Optional[RunReport]
    checks: dict = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(self.checks.values())

    @property
    def name(self) -> str:
        return f"{self.entry.problem}-{self.entry.label}"


def builtin_suite() -> list[BenchEntry]:
    tight = dict(stop_tol=1e-11)
    return [
        BenchEntry("lasso1d", "fixed", AlmConfig(rho0=10.0), target_tol=1e-8),
        BenchEntry("degen2d", "fixed", AlmConfig(rho0=100.0, **tight), q_max=0.5, target_tol=1e-8),
        BenchEntry("degen2d", "geometric", AlmConfig(rho0=100.0, penalty_rule=Geometric(2.0), **tight),
                   superlinear=True, target_tol=1e-8),
        BenchEntry("degen2d", "vrule", AlmConfig(rho0=100.0, penalty_rule=VRule(0.5, 10.0)), target_tol=1e-8),
        BenchEntry("minimax1d", "fixed", AlmConfig(rho0=10.0), target_tol=1e-8),
        BenchEntry("affine_l1", "fixed", AlmConfig(rho0=10.0), target_tol=1e-8),
        BenchEntry("elq1", "fixed", AlmConfig(rho0=10.0), target_tol=1e-8),
    ]


SUITES = {"builtin": builtin_suite}


def _run_one(entry: BenchEntry) -> BenchOutcome:
    try:
        p = builtin(entry.problem)
        x0, l0 = entry.start or BUILTIN_STARTS[entry.problem]
        report = alm_solve(p, PrimalDualPoint(x0, l0), entry.config)
    except Exception as exc:  # noqa: BLE001 - a failed run is recorded, not fatal
        log.exception("benchmark run %s-%s failed", entry.problem, entry.label)
        return BenchOutcome(entry, None, {}, f"{type(exc).__name__}: {exc}")
    checks = {"converged": report.status == "kkt_reached"}
    if entry.q_max is not None:
        checks["q_factor"] = report.q_factor is not None and report.q_factor <= entry.q_max
    if entry.superlinear is not None:
        checks["superlinear"] = report.superlinear is entry.superlinear
    if entry.target_tol is not None and p.known_solution is not None:
        ks = p.known_solution
        dx = float(np.linalg.norm(report.x - ks.x))
        dl = report.multiplier_distance if report.multiplier_distance is not None else 0.0
        checks["target"] = dx + dl <= entry.target_tol
    return BenchOutcome(entry, report, checks)


def run_benchmark(suite, parallel: bool = False, out_dir=None) -> list[BenchOutcome]:
    """Run every entry; results keep suite order regardless of ``parallel``."""
    suite = list(suite)
    if parallel and len(suite) > 1:
        with ThreadPoolExecutor() as pool:
            outcomes = list(pool.map(_run_one, suite))
    else:
        outcomes = [_run_one(e) for e in suite]
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for o in outcomes:
            if o.report is not None:
                (out / f"{o.name}.csv").write_text(o.report.to_csv())
        (out / "summary.txt").write_text(summary_table(outcomes))
    return outcomes


def summary_table(outcomes) -> str:
    lines = [f"{'run':<22}{'status':<15}{'outer':>6}{'final R':>12}{'q':>10}{'superlin':>9}{'kappa':>10}  result"]
    for o in outcomes:
        if o.report is None:
            lines.append(f"{o.name:<22}{'error':<15}{'':>6}{'':>12}{'':>10}{'':>9}{'':>10}  FAIL ({o.error})")
            continue
        r = o.report
        q = "-" if r.q_factor is None else f"{r.q_factor:.3g}"
        sl = "-" if r.superlinear is None else str(r.superlinear)
        failed = [k for k, v in o.checks.items() if not v]
        res = "PASS" if not failed else "FAIL " + ",".join(failed)
        lines.append(f"{o.name:<22}{r.status:<15}{len(r.records):>6}{r.final_residual:>12.3e}"
                     f"{q:>10}{sl:>9}{r.kappa_hat:>10.3g}  {res}")
    return "\n".join(lines) + "\n"
