"""Benchmark studies and the vofrac-bench command line.

A study walks a ladder of (m, n) resolutions and emits one CSV row per
rung: error, observed order, wall time and live storage.  Studies cover
convergence (temporal_order, spacetime_order), cost growth (scaling),
cross-validation of the two evaluators (agreement), kernel certification
(kernel_certify) and the coefficient inequalities (coefficient_audit).

Scalar rungs carry m = 1.  Output is deterministic apart from wall times.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .direct import scan_direct
from .expsum import build_quadrature, certify
from .fast import audit_coefficients, default_epsilon, scan_fast
from .order import TemporalMesh, build_schedule, order_from_spec
from .solver import (SolverConfig, StorageCapExceeded, cubic_profile,
                     cubic_profile_caputo, run, sine_product_problem)

__all__ = [
    "StudySpec",
    "RungRow",
    "ConvergenceReport",
    "run_study",
    "parse_ladder",
    "load_config",
    "emit_csv",
    "parse_csv",
    "emit_markdown",
    "main",
]

STUDIES = ("temporal_order", "spacetime_order", "scaling", "agreement",
           "kernel_certify", "coefficient_audit")
PROBLEMS = ("example1_2d", "example2_3d", "scalar_ode")

_CSV_HEADER = "m,n,error,order,wall_time_s,storage_scalars"

_DEFAULT_LADDERS = {
    "temporal_order": "32:40,32:80,32:160",
    "spacetime_order": "10:100,20:400",
    "scaling": "1:1024,1:2048,1:4096",
    "agreement": "20:400",
    "kernel_certify": "1:100,1:1000",
    "coefficient_audit": "1:64,1:128",
}


@dataclass(frozen=True)
class StudySpec:
    """Everything one study run needs, resolved from defaults/config/flags."""

    study: str
    problem: str = "example1_2d"
    scheme: str = "fast"
    ladder: tuple = ()
    epsilon: str = "dt2"
    order: str = "sin4"
    max_storage: Optional[int] = None
    parallel: bool = False
    T: float = 1.0


@dataclass
class RungRow:
    """One CSV row; None cells render as '-' (failed) or '' (not defined)."""

    m: int
    n: int
    error: Optional[float] = None
    order: Optional[float] = None
    wall: Optional[float] = None
    storage: Optional[int] = None
    failed: bool = False
    note: str = ""


@dataclass
class ConvergenceReport:
    spec: StudySpec
    rows: list = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return any(r.failed for r in self.rows)


def parse_ladder(text: str) -> tuple:
    """Parse 'm:n,m:n,...' into ((m, n), ...)."""
    rungs = []
    for chunk in text.split(","):
        m_str, sep, n_str = chunk.strip().partition(":")
        if not sep:
            raise ValueError(f"bad ladder entry {chunk!r}, expected m:n")
        m, n = int(m_str), int(n_str)
        if m < 1 or n < 1:
            raise ValueError(f"ladder entries must be positive, got {chunk!r}")
        rungs.append((m, n))
    if not rungs:
        raise ValueError("empty ladder")
    return tuple(rungs)


def _resolve_epsilon(spec: StudySpec, dt: float, ofn) -> float:
    if spec.epsilon == "dt2":
        return default_epsilon(dt, ofn.alpha_lo, ofn.alpha_hi)
    return float(spec.epsilon)


def _scalar_nodes(n: int, T: float):
    t = np.linspace(0.0, T, n + 1)
    return np.array([cubic_profile(tk) for tk in t])


def _scalar_reference(schedule, ofn):
    return np.array([cubic_profile_caputo(ofn, tk) for tk in schedule.t_sigma])


def _scalar_storage(scheme: str, n: int, p: int) -> int:
    # dof = 1 versions of the solver's tallies
    return 3 * p + 3 if scheme == "fast" else 2 * n + 3


def _scalar_scan(spec: StudySpec, n: int, scheme: str, ofn, timed: bool = True):
    """Run one scalar trajectory; returns (values, schedule, wall, storage)."""
    mesh = TemporalMesh(spec.T, n)
    sched = build_schedule(mesh, ofn)
    u = _scalar_nodes(n, spec.T)
    quad = None
    if scheme == "fast":
        eps = _resolve_epsilon(spec, mesh.dt, ofn)
        quad = build_quadrature(eps, ofn.alpha_lo, ofn.alpha_hi, mesh.dt, spec.T)
    storage = _scalar_storage(scheme, n, quad.size if quad else 0)
    if spec.max_storage is not None and storage > spec.max_storage:
        raise StorageCapExceeded(
            f"scalar {scheme} rung needs {storage} scalars, cap is {spec.max_storage}")
    tic = time.perf_counter()
    vals = scan_fast(u, sched, quad) if scheme == "fast" else scan_direct(u, sched)
    wall = time.perf_counter() - tic
    return vals, sched, wall, storage


def _pde_problem(spec: StudySpec, m: int, ofn):
    dim = {"example1_2d": 2, "example2_3d": 3}[spec.problem]
    return sine_product_problem(dim, m, order_fn=ofn, T=spec.T)


def _pde_config(spec: StudySpec, n: int, scheme: str, ofn) -> SolverConfig:
    eps = None
    if scheme == "fast" and spec.epsilon != "dt2":
        eps = float(spec.epsilon)
    return SolverConfig(n=n, scheme=scheme, epsilon=eps,
                        max_storage=spec.max_storage)


def _rung_convergence(spec: StudySpec, m: int, n: int) -> RungRow:
    ofn = order_from_spec(spec.order)
    if spec.problem == "scalar_ode":
        vals, sched, wall, storage = _scalar_scan(spec, n, spec.scheme, ofn)
        err = float(np.abs(vals - _scalar_reference(sched, ofn)).max())
        return RungRow(m=1, n=n, error=err, wall=wall, storage=storage)
    report = run(_pde_problem(spec, m, ofn), _pde_config(spec, n, spec.scheme, ofn))
    return RungRow(m=m, n=n, error=report.max_error, wall=report.wall_time,
                   storage=report.peak_storage)


def _rung_scaling(spec: StudySpec, m: int, n: int) -> RungRow:
    if spec.problem != "scalar_ode":
        raise ValueError("scaling study requires --problem scalar_ode")
    ofn = order_from_spec(spec.order)
    vals, sched, wall, storage = _scalar_scan(spec, n, spec.scheme, ofn)
    err = float(np.abs(vals - _scalar_reference(sched, ofn)).max())
    return RungRow(m=1, n=n, error=err, wall=wall, storage=storage)


def _rung_agreement(spec: StudySpec, m: int, n: int) -> RungRow:
    ofn = order_from_spec(spec.order)
    if spec.problem == "scalar_ode":
        fast_vals, _, w1, s1 = _scalar_scan(spec, n, "fast", ofn)
        direct_vals, _, w2, s2 = _scalar_scan(spec, n, "direct", ofn)
        err = float(np.abs(fast_vals - direct_vals).max())
        return RungRow(m=1, n=n, error=err, wall=w1 + w2, storage=s1 + s2)
    problem = _pde_problem(spec, m, ofn)
    rep_f = run(problem, _pde_config(spec, n, "fast", ofn))
    rep_d = run(problem, _pde_config(spec, n, "direct", ofn))
    err = float(np.abs(rep_f.final - rep_d.final).max())
    return RungRow(m=m, n=n, error=err, wall=rep_f.wall_time + rep_d.wall_time,
                   storage=rep_f.peak_storage + rep_d.peak_storage)


def _rung_kernel_certify(spec: StudySpec, m: int, n: int) -> RungRow:
    ofn = order_from_spec(spec.order)
    dt = spec.T / n
    eps = _resolve_epsilon(spec, dt, ofn)
    tic = time.perf_counter()
    quad = build_quadrature(eps, ofn.alpha_lo, ofn.alpha_hi, dt, spec.T)
    report = certify(quad, samples=10_000)
    wall = time.perf_counter() - tic
    row = RungRow(m=1, n=n, error=report.max_rel_err, wall=wall,
                  storage=2 * quad.size)
    if not report.passed:
        row.failed = True
        row.note = (f"certification failed: {report.max_rel_err:.3e} > "
                    f"{eps:.3e} at s={report.s_at_max:.3e}")
    return row


def _rung_coefficient_audit(spec: StudySpec, m: int, n: int) -> RungRow:
    ofn = order_from_spec(spec.order)
    mesh = TemporalMesh(spec.T, n)
    sched = build_schedule(mesh, ofn)
    eps = _resolve_epsilon(spec, mesh.dt, ofn)
    quad = build_quadrature(eps, ofn.alpha_lo, ofn.alpha_hi, mesh.dt, spec.T)
    tic = time.perf_counter()
    audit = audit_coefficients(sched, quad, eps)
    wall = time.perf_counter() - tic
    row = RungRow(m=1, n=n, error=audit.max_gap_ratio, wall=wall,
                  storage=2 * quad.size)
    if not audit.passed:
        row.failed = True
        k, name, l, value = audit.violations[0]
        row.note = (f"{len(audit.violations)} violations, first: "
                    f"{name} at k={k}, l={l} ({value:.3e})")
    return row


_RUNNERS = {
    "temporal_order": _rung_convergence,
    "spacetime_order": _rung_convergence,
    "scaling": _rung_scaling,
    "agreement": _rung_agreement,
    "kernel_certify": _rung_kernel_certify,
    "coefficient_audit": _rung_coefficient_audit,
}


def _safe_rung(spec: StudySpec, m: int, n: int) -> RungRow:
    try:
        return _RUNNERS[spec.study](spec, m, n)
    except (StorageCapExceeded, ValueError, RuntimeError) as exc:
        return RungRow(m=m, n=n, failed=True, note=str(exc))


def run_study(spec: StudySpec) -> ConvergenceReport:
    """Execute every rung of the ladder and fill the order column."""
    if spec.study not in STUDIES:
        raise ValueError(f"unknown study {spec.study!r}")
    ladder = spec.ladder or parse_ladder(_DEFAULT_LADDERS[spec.study])
    if spec.parallel and spec.study != "scaling":
        with ThreadPoolExecutor(max_workers=min(len(ladder), 8)) as pool:
            rows = list(pool.map(lambda mn: _safe_rung(spec, *mn), ladder))
    else:
        # scaling rungs stay sequential even under --parallel-rungs: the
        # wall-time column is the measurement there
        rows = [_safe_rung(spec, m, n) for m, n in ladder]
    for prev, cur in zip(rows, rows[1:]):
        if (not prev.failed and not cur.failed
                and prev.error and cur.error and cur.error > 0.0):
            cur.order = math.log2(prev.error / cur.error)
    return ConvergenceReport(spec=spec, rows=rows)


def _cell(value, fmt: str = "%.6g") -> str:
    return "" if value is None else fmt % value


def emit_csv(report: ConvergenceReport) -> str:
    """Render the report as CSV; failed rungs get '-' data cells."""
    lines = [_CSV_HEADER]
    for r in report.rows:
        if r.failed:
            cells = [str(r.m), str(r.n), "-", "-", "-",
                     _cell(r.storage, "%d") or "-"]
        else:
            cells = [str(r.m), str(r.n), _cell(r.error), _cell(r.order),
                     _cell(r.wall), _cell(r.storage, "%d")]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def parse_csv(text: str) -> list:
    """Inverse of emit_csv (notes are not round-tripped)."""
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines or lines[0] != _CSV_HEADER:
        raise ValueError(f"unexpected CSV header {lines[0] if lines else '<empty>'!r}")
    rows = []
    for ln in lines[1:]:
        m_s, n_s, e_s, o_s, w_s, s_s = ln.split(",")
        failed = e_s == "-"

        def num(cell, cast=float):
            return None if cell in ("", "-") else cast(cell)

        rows.append(RungRow(m=int(m_s), n=int(n_s), error=num(e_s),
                            order=num(o_s), wall=num(w_s),
                            storage=num(s_s, int), failed=failed))
    return rows


def emit_markdown(report: ConvergenceReport) -> str:
    """Table with 4-digit errors and 2-digit orders."""
    spec = report.spec
    lines = [
        f"### {spec.study} ({spec.problem}, scheme={spec.scheme}, "
        f"epsilon={spec.epsilon}, order={spec.order})",
        "",
        "| m | n | error | order | time (s) | storage |",
        "|---:|---:|---:|---:|---:|---:|",
    ]
    for r in report.rows:
        if r.failed:
            err = order = wall = "-"
        else:
            err = "%.4e" % r.error if r.error is not None else "-"
            order = "%.2f" % r.order if r.order is not None else "-"
            wall = "%.3g" % r.wall if r.wall is not None else "-"
        storage = str(r.storage) if r.storage is not None else "-"
        lines.append(f"| {r.m} | {r.n} | {err} | {order} | {wall} | {storage} |")
    return "\n".join(lines) + "\n"


def load_config(path: str) -> dict:
    """Read 'key = value' lines; '#' starts a comment; keys match the flags."""
    known = {"study", "problem", "scheme", "ladder", "epsilon", "order",
             "out", "markdown", "max_storage", "parallel_rungs"}
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or not key:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            if key not in known:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="vofrac-bench",
        description="Convergence, agreement, certification and cost studies "
                    "for the variable-order derivative evaluators and the "
                    "sub-diffusion solver.")
    p.add_argument("--study", choices=STUDIES)
    p.add_argument("--problem", choices=PROBLEMS)
    p.add_argument("--scheme", choices=("direct", "fast"))
    p.add_argument("--ladder", help="comma list of m:n rungs, e.g. 20:400,40:1600")
    p.add_argument("--epsilon", help="'dt2' (default) or a fixed tolerance")
    p.add_argument("--order", help="const:<a>, sin4, or tab:t0:a0,t1:a1,...")
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.add_argument("--markdown", help="also write a markdown table here")
    p.add_argument("--max-storage", type=int,
                   help="fail any rung whose live storage exceeds this many scalars")
    p.add_argument("--config", help="file of key = value defaults; flags override")
    p.add_argument("--parallel-rungs", action="store_true",
                   help="run rungs concurrently (ignored for timing studies)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    settings = {"study": None, "problem": "example1_2d", "scheme": "fast",
                "ladder": None, "epsilon": "dt2", "order": "sin4",
                "out": None, "markdown": None, "max_storage": None,
                "parallel_rungs": False}
    if args.config:
        settings.update(load_config(args.config))
    for key in list(settings):
        value = getattr(args, key)
        if value not in (None, False):
            settings[key] = value
    if settings["study"] is None:
        build_parser().error("--study is required (flag or config)")

    spec = StudySpec(
        study=settings["study"],
        problem=settings["problem"],
        scheme=settings["scheme"],
        ladder=parse_ladder(settings["ladder"]) if settings["ladder"] else (),
        epsilon=str(settings["epsilon"]),
        order=settings["order"],
        max_storage=int(settings["max_storage"]) if settings["max_storage"] else None,
        parallel=bool(settings["parallel_rungs"]),
    )
    report = run_study(spec)

    for row in report.rows:
        if row.note:
            print(f"rung m={row.m} n={row.n}: {row.note}", file=sys.stderr)
    csv_text = emit_csv(report)
    if spec_out := settings["out"]:
        with open(spec_out, "w") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    if settings["markdown"]:
        with open(settings["markdown"], "w") as fh:
            fh.write(emit_markdown(report))
    return 1 if report.failed else 0


if __name__ == "__main__":
    sys.exit(main())
