"""Command-line front end: ``miurakdv {reflection,solve,certify,validate}``.

Exit status is 0 on success, 1 on a computational failure and 2 on a
configuration error.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from .certify import run_suite
from .config import ConfigError, RunConfig, load_config
from .dyson import DysonError, q_grid
from .hankel import lambda_rule
from .profiles import mollify
from .refsolver import RefSolverError, compare
from .scattering import ScatteringError, build_table, load_table
from .weyl import WeylError

__all__ = ["main", "cmd_reflection", "cmd_solve", "cmd_certify", "cmd_validate"]

COLUMNS = {
    "reflection": ["lambda", "h", "re_R", "im_R", "abs_R"],
    "solve": ["x", "t", "q", "logdet", "norm_bound", "fd_crosscheck_error", "nodes_used", "error"],
    "certify": ["invariant", "passed", "margin", "detail"],
    "validate": ["study", "n", "discrepancy", "self_error"],
}

_FAILURES = (ArithmeticError, ScatteringError, WeylError, DysonError, RefSolverError,
             np.linalg.LinAlgError)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "" if not math.isfinite(v) else "%.17g" % v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _json_value(v):
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def _csv_field(s: str) -> str:
    if any(c in s for c in ',"\n'):
        return '"' + s.replace('"', '""') + '"'
    return s


def render(command: str, rows: list, fmt: str) -> str:
    cols = COLUMNS[command]
    if fmt == "json":
        body = [{c: _json_value(v) for c, v in zip(cols, row)} for row in rows]
        return json.dumps({"command": command, "columns": cols, "rows": body}, indent=1) + "\n"
    out = io.StringIO()
    out.write(",".join(cols) + "\n")
    for row in rows:
        out.write(",".join(_csv_field(_fmt(v)) for v in row) + "\n")
    return out.getvalue()


def _emit(command, rows, fmt, out):
    text = render(command, rows, fmt)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- commands ---------------------------------------------------------------------

def cmd_reflection(cfg: RunConfig, workers: int = 1) -> tuple[int, list]:
    """Reflection table on ``R + ih`` at the nodes of the contour rule."""
    spec = cfg.reflection
    rule = lambda_rule(spec.x, spec.t, spec.h, spec.n_nodes, spec.rule)
    table = build_table(cfg.profile, spec.h, rule, cfg.tolerances.m, workers, cfg.tolerances.mesh)
    rows = [(lam, table.h, v.real, v.imag, abs(v)) for lam, v in zip(table.nodes, table.values)]
    return 0, rows


def cmd_solve(cfg: RunConfig, workers: int = 1) -> tuple[int, list]:
    """Solution samples for every ``t`` and ``x`` of the grid, in input order."""
    opts = cfg.solve_options(workers)
    rows, status = [], 0
    companions = []
    for t in cfg.t:
        try:
            samples = q_grid(cfg.profile, cfg.x, t, opts)
        except _FAILURES as exc:
            status = 1
            for x in cfg.x:
                rows.append((x, t, None, None, None, None, "", str(exc)))
            continue
        block = []
        for s in samples:
            if not s.ok:
                status = 1
                rows.append((float(np.real(s.x)), t, None, None,
                             s.norm_bound, None, "%d:%d" % s.n_used, s.error))
                continue
            x = float(np.real(s.x))
            rows.append((x, t, s.q, s.logdet, s.norm_bound, s.fd_crosscheck_error,
                         "%d:%d" % s.n_used, ""))
            block.append((x, s.q))
        companions.append((t, block))
    if cfg.output.companion:
        for i, (t, block) in enumerate(companions):
            with open(f"{cfg.output.companion}_t{i}.dat", "w") as fh:
                fh.write(f"# t = {t:.17g}\n# x q\n")
                for x, q in block:
                    fh.write(f"{x:.17g} {q:.17g}\n")
    return status, rows


def cmd_certify(cfg: RunConfig, workers: int = 1) -> tuple[int, list]:
    """Invariant suite; exit status 1 when any invariant fails."""
    spec = cfg.certify
    try:
        table = load_table(spec.table) if spec.table else None
    except (OSError, ValueError) as exc:
        raise ConfigError(f"certify.table: cannot load {spec.table}: {exc}") from None
    checks = run_suite(cfg.profile, cfg.solve_options(workers), spec.x, spec.t_values,
                       spec.t, spec.delta, spec.samples, table=table)
    rows = [(c.name, c.passed, c.margin, c.detail) for c in checks]
    return (0 if all(c.passed for c in checks) else 1), rows


def _decreasing(values) -> bool:
    """Strictly decreasing, except that runs of exact zeros count as converged."""
    return all(b < a or a == b == 0 for a, b in zip(values, values[1:]))


def cmd_validate(cfg: RunConfig, workers: int = 1) -> tuple[int, list]:
    """Cross-solver comparison or mollified-sequence convergence."""
    spec = cfg.validate
    opts = cfg.solve_options(workers)
    if spec.study == "reference":
        rep = compare(cfg.profile, spec.t, tuple(spec.window), spec.num, opts, spec.dt)
        self_err = rep.dyson_self_error + rep.ref_self_error
        ok = rep.discrepancy < spec.tolerance and rep.fd_crosscheck_error < 1e-6
        return (0 if ok else 1), [("reference", opts.n_nodes, rep.discrepancy, self_err)]
    xs = np.linspace(spec.window[0], spec.window[1], spec.num)
    target = _solve_line(cfg.profile, xs, spec.t, opts)
    rows, gaps = [], []
    for n in spec.n:
        prof = mollify(cfg.profile, n)
        qn = _solve_line(prof, xs, spec.t, opts)
        qn2 = _solve_line(prof, xs, spec.t, replace(opts, n_nodes=2 * opts.n_nodes, fd_step=0.0))
        gap = float(np.max(np.abs(qn - target)))
        gaps.append(gap)
        rows.append(("mollified", n, gap, float(np.max(np.abs(qn2 - qn)))))
    return (0 if _decreasing(gaps) else 1), rows


def _solve_line(profile, xs, t, opts):
    samples = q_grid(profile, xs, t, opts)
    bad = [s for s in samples if not s.ok]
    if bad:
        raise DysonError(f"evaluation failed at x={bad[0].x}: {bad[0].error}")
    return np.array([float(np.real(s.q)) for s in samples])


COMMANDS = {
    "reflection": cmd_reflection,
    "solve": cmd_solve,
    "certify": cmd_certify,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="miurakdv",
                                description="KdV with singular step-like Miura data via "
                                            "Hankel-operator inverse scattering")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                   help="threads for table construction and grid evaluation")
    p.add_argument("--format", choices=("csv", "json"), help="overrides output.format")
    p.add_argument("--out", help="output file (overrides output.path; default stdout)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        print("error: --workers must be positive", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    fmt = args.format or cfg.output.format
    out = args.out or cfg.output.path
    try:
        status, rows = COMMANDS[args.command](cfg, args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (*_FAILURES, ValueError) as exc:
        print(f"{args.command} failed: {exc}", file=sys.stderr)
        return 1
    _emit(args.command, rows, fmt, out)
    if status:
        failed = [r[0] for r in rows if not r[1]] if args.command == "certify" else []
        detail = f" ({', '.join(failed)})" if failed else ""
        print(f"{args.command}: computational failure{detail}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
