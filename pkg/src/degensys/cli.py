"""Command-line batch runner.

    degen-sys {solve,ladder,audit,mms} --config run.ini [--out DIR]
    degen-sys version

Exit status: 0 when the workflow converged and every gating audit passed,
2 on an audit failure, 1 on a configuration or solver error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import re
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__, cases, mms
from .audit import (
    AUDIT_COLUMNS,
    audit_equiintegrability,
    audit_flux_l2,
    audit_linfty,
    audit_rows,
    audit_rung,
    audits_passed,
    flux_convergence,
    gradient_equiintegrability_profile,
)
from .discretization import SolverNonConvergence, fingerprint
from .grid import AuditRecord, Grid, GridMismatchError, ProblemSpec, read_field, write_field
from .ladder import DEFAULT_SCHEDULE, LADDER_COLUMNS, check_schedule, limit_residual, run_ladder
from .solver import FixedPointConfig, PicardNonConvergence, barrier_levels, residuals, solve_truncated

COMMANDS = ("solve", "ladder", "audit", "mms")
EXIT_OK, EXIT_ERROR, EXIT_AUDIT = 0, 1, 2


class ConfigError(ValueError):
    pass


def version_line() -> str:
    return "degen-sys %s (conventions %s)" % (__version__, fingerprint())


# -- configuration ----------------------------------------------------------------

@dataclass
class ExperimentConfig:
    command: str
    grid: Grid
    spec: ProblemSpec | None
    fixed_point: FixedPointConfig
    schedule: tuple[int, ...]
    levels: str
    warm_start: bool
    deltas: tuple[float, ...]
    mms_case: str
    mms_cells: tuple[int, ...]
    mms_min_order: float | None
    output: Path


class _Reader:
    """Typed access to a parsed config with line-numbered diagnostics."""

    def __init__(self, path: Path, parser: configparser.ConfigParser, text: str):
        self.path = path
        self.parser = parser
        self.lines = text.splitlines()

    def _line_of(self, section: str, key: str) -> int | None:
        current = None
        for i, line in enumerate(self.lines, start=1):
            s = line.strip()
            m = re.match(r"\[(.+)\]$", s)
            if m:
                current = m.group(1).strip()
            elif current == section and re.match(r"%s\s*[=:]" % re.escape(key), s, re.IGNORECASE):
                return i
        return None

    def fail(self, section: str, key: str, why: str):
        line = self._line_of(section, key)
        where = "%s:%s" % (self.path, line) if line else str(self.path)
        raise ConfigError("%s: [%s] %s: %s" % (where, section, key, why))

    def raw(self, section, key, default=None):
        if self.parser.has_option(section, key):
            return self.parser.get(section, key).strip()
        return default

    def get(self, section, key, conv, default=None):
        raw = self.raw(section, key)
        if raw is None:
            return default
        try:
            return conv(raw)
        except (TypeError, ValueError) as exc:
            self.fail(section, key, "cannot parse %r (%s)" % (raw, exc))

    def floats(self, section, key, default):
        return self.get(section, key, lambda s: tuple(float(x) for x in s.replace(",", " ").split()), default)

    def ints(self, section, key, default):
        return self.get(section, key, lambda s: tuple(int(x) for x in s.replace(",", " ").split()), default)


def _boolean(s: str) -> bool:
    low = s.lower()
    if low in ("1", "yes", "true", "on"):
        return True
    if low in ("0", "no", "false", "off"):
        return False
    raise ValueError("not a boolean")


def load_config(path, command: str | None = None, out: str | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError("config file not found: %s" % path) from None
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case sensitive (a vs A)
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError("cannot parse config: %s" % exc) from None
    r = _Reader(path, parser, text)

    cfg_command = r.raw("run", "command")
    if command is None:
        command = cfg_command
    elif cfg_command is not None and cfg_command != command:
        r.fail("run", "command", "config says %r but %r was requested" % (cfg_command, command))
    if command not in COMMANDS:
        raise ConfigError("unknown command %r (expected one of %s)" % (command, ", ".join(COMMANDS)))

    base = path.parent
    output = Path(out) if out else base / r.get("run", "output", str, "out")

    dim = r.get("grid", "dim", int, 2)
    if dim not in (1, 2):
        r.fail("grid", "dim", "must be 1 or 2")
    nodes = r.ints("grid", "nodes", (63,))
    extent = r.floats("grid", "extent", (1.0,))
    nodes = nodes * dim if len(nodes) == 1 else nodes
    extent = extent * dim if len(extent) == 1 else extent
    try:
        grid = Grid(nodes, extent)
    except ValueError as exc:
        r.fail("grid", "nodes", str(exc))
    if grid.dim != dim:
        r.fail("grid", "nodes", "expected %d entries for a %dD grid" % (dim, dim))

    try:
        fp = FixedPointConfig(
            tol=r.get("solver", "tol", float, 1e-8),
            max_iter=r.get("solver", "max_iter", int, 200),
            theta=r.get("solver", "theta", float, 1.0),
            linear_tol=r.get("solver", "linear_tol", float, 1e-10),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("%s: [solver] %s" % (path, exc)) from None

    schedule = r.ints("ladder", "schedule", DEFAULT_SCHEDULE)
    try:
        schedule = check_schedule(schedule)
    except ValueError as exc:
        r.fail("ladder", "schedule", str(exc))
    levels = r.get("ladder", "levels", str, "barrier")
    if levels not in ("barrier", "auto", "none"):
        r.fail("ladder", "levels", "expected barrier, auto or none")
    warm = r.get("ladder", "warm_start", _boolean, True)
    deltas = r.floats("audit", "fractions", (0.01, 0.05, 0.25, 1.0))
    if any(not 0 < d <= 1 for d in deltas):
        r.fail("audit", "fractions", "fractions must lie in (0, 1]")

    mms_case = r.get("mms", "case", str, "coupled-2d")
    if command == "mms" and mms_case not in mms.CASES:
        r.fail("mms", "case", "unknown manufactured case %r" % mms_case)
    mms_cells = r.ints("mms", "cells", (8, 16, 32))
    mms_min_order = r.get("mms", "min_order", float, None)

    spec = None if command == "mms" else _problem(r, grid, base)
    return ExperimentConfig(
        command, grid, spec, fp, schedule, levels, warm, deltas,
        mms_case, mms_cells, mms_min_order, output,
    )


def _problem(r: _Reader, grid: Grid, base: Path) -> ProblemSpec:
    name = r.raw("problem", "case")
    if name is not None:
        if name not in cases.CASES:
            r.fail("problem", "case", "unknown builtin case %r (known: %s)" % (name, ", ".join(sorted(cases.CASES))))
        spec = cases.build(name, grid)
        fields = spec.fields()
    else:
        fields = {}
    for key in ("a", "A", "b", "B", "f", "F"):
        raw = r.raw("problem", key)
        if raw is None:
            continue
        try:
            fields[key] = grid.constant(float(raw))
            continue
        except ValueError:
            pass
        fpath = (base / raw) if not Path(raw).is_absolute() else Path(raw)
        if not fpath.exists():
            r.fail("problem", key, "field file not found: %s" % fpath)
        try:
            fields[key] = read_field(fpath, grid)
        except (ValueError, GridMismatchError) as exc:
            r.fail("problem", key, str(exc))
    missing = [k for k in ("a", "b", "f") if k not in fields]
    if missing:
        r.fail("problem", missing[0], "missing (give a builtin case or a value/file)")
    consts = {}
    for key, attr in (("alpha", "alpha"), ("beta", "beta"), ("lambda", "lam"), ("gamma", "gamma")):
        consts[attr] = r.get("problem", key, float, None)
        if consts[attr] is None and name is not None:
            consts[attr] = getattr(spec, attr)
    try:
        return ProblemSpec.constant(
            grid, a=fields["a"], A=fields.get("A"), b=fields["b"], B=fields.get("B"),
            f=fields["f"], F=fields.get("F"), **consts,
        )
    except ValueError as exc:
        key = str(exc).split()[0]
        r.fail("problem", key if key in ("alpha", "beta", "lambda", "gamma") else "case", str(exc))


# -- output -----------------------------------------------------------------------

def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else v for v in row])


def _finish(out: Path, u, z, report_header, report_rows, records) -> int:
    out.mkdir(parents=True, exist_ok=True)
    write_field(out / "solution_u.field", u)
    write_field(out / "solution_z.field", z)
    _write_csv(out / "report.csv", report_header, report_rows)
    _write_csv(out / "audits.csv", AUDIT_COLUMNS, audit_rows(records))
    failed = [r for r in records if not r.informational and not r.passed]
    for r in failed:
        print("audit failed: %s [%s] lhs=%.6g rhs*tol=%.6g" % (r.name, r.context, r.lhs, r.rhs * r.tol), file=sys.stderr)
    return EXIT_OK if audits_passed(records) else EXIT_AUDIT


# -- workflows --------------------------------------------------------------------

def run_solve(cfg: ExperimentConfig) -> int:
    spec = cfg.spec
    u, z, rep = solve_truncated(spec, *barrier_levels(spec.f, spec.F), cfg=cfg.fixed_point)
    r1, r2 = residuals(spec, u, z)
    rows = [(i, repr(d)) for i, d in enumerate(rep.differences, start=1)]
    rows.append(("residual_u", repr(r1)))
    rows.append(("residual_z", repr(r2)))
    rows.extend((k, repr(v)) for k, v in rep.norms.items())
    records = rep.audits + audit_rung(spec, u, z)
    return _finish(cfg.output, u, z, ("iteration", "difference"), rows, records)


def _ladder_records(spec, ladder):
    records = []
    for rung in ladder.rungs:
        ctx = "n=%d" % rung.n
        records.append(audit_linfty(rung.u, rung.f_n, "linf_barrier_u", ctx))
        records.append(audit_linfty(rung.z, rung.F_n, "linf_barrier_z", ctx))
        records.extend(audit_rung(spec, rung.u, rung.z, context=ctx))
    return records


def run_ladder_cmd(cfg: ExperimentConfig, full_audit: bool = False) -> int:
    spec = cfg.spec
    ladder = run_ladder(spec, cfg.schedule, cfg.fixed_point, warm_start=cfg.warm_start, levels=cfg.levels)
    records = _ladder_records(spec, ladder)
    top = ladder.top
    rows = list(ladder.rows())
    if full_audit:
        for rung in ladder.rungs:
            ctx = "n=%d" % rung.n
            for delta in cfg.deltas:
                records.append(audit_equiintegrability(rung.u, spec.f, delta, context="%s delta=%g" % (ctx, delta)))
            records.extend(gradient_equiintegrability_profile(
                rung.u, rung.z, spec.f, spec.b, spec.alpha, cfg.deltas, context=ctx))
            records.extend(audit_flux_l2(rung.u, rung.z, spec.a, spec.b, spec.f, spec.alpha, spec.beta, spec.lam, ctx))
        cfg.output.mkdir(parents=True, exist_ok=True)
        if len(ladder.rungs) >= 2:
            _write_csv(
                cfg.output / "flux.csv",
                ("mode", "n_prev", "n_next", "pairing_prev", "pairing_next", "cauchy"),
                ((m, a, b, repr(p), repr(q), repr(d)) for m, a, b, p, q, d in flux_convergence(ladder.rungs, spec.a, spec.b)),
            )
        lr = limit_residual(spec, top.u, top.z)
        _write_csv(cfg.output / "limit.csv", ("n", "residual_u", "residual_z"), [(top.n, repr(lr[0]), repr(lr[1]))])
    return _finish(cfg.output, top.u, top.z, LADDER_COLUMNS, rows, records)


def run_mms(cfg: ExperimentConfig) -> int:
    case = mms.CASES[cfg.mms_case]
    try:
        rows, (grid, u, z) = mms.convergence_study(case, cfg.mms_cells, cfg.fixed_point, keep_solutions=True)
    except mms.StudyAborted as exc:
        cfg.output.mkdir(parents=True, exist_ok=True)
        _write_csv(cfg.output / "rates.csv", mms.RATE_COLUMNS, _rate_rows(exc.rows))
        raise
    cfg.output.mkdir(parents=True, exist_ok=True)
    _write_csv(cfg.output / "rates.csv", mms.RATE_COLUMNS, _rate_rows(rows))
    gap_u, gap_z = mms.source_discrepancy(case)
    records = [
        AuditRecord("source_fd_gap_u", gap_u, 1e-3, 1.0, "h=1/64"),
        AuditRecord("source_fd_gap_z", gap_z, 1e-3, 1.0, "h=1/64"),
    ]
    for prev, row in zip(rows[:-1], rows[1:]):
        errs = ((row[2], prev[2]), (row[3], prev[3]))
        for label, (fine, coarse) in zip("uz", errs):
            records.append(AuditRecord("error_decrease_%s" % label, fine, coarse, 1.0, "h=%r" % row[1]))
    if cfg.mms_min_order is not None:
        last = rows[-1]
        for label, order in zip("uz", last[4:6]):
            if order != "exact":
                records.append(AuditRecord("order_%s" % label, cfg.mms_min_order, order, 1.0, "h=%r" % last[1]))
    return _finish(cfg.output, u, z, mms.RATE_COLUMNS, _rate_rows(rows), records)


def _rate_rows(rows):
    for case, h, eu, ez, pu, pz in rows:
        yield (case, repr(h), repr(eu), repr(ez), _fmt_order(pu), _fmt_order(pz))


def _fmt_order(p):
    if p is None:
        return ""
    return p if isinstance(p, str) else repr(p)


def run(config_path, command: str | None = None, out: str | None = None) -> int:
    """Execute one workflow; returns the process exit status."""
    try:
        cfg = load_config(config_path, command, out)
        if cfg.command == "solve":
            return run_solve(cfg)
        if cfg.command == "ladder":
            return run_ladder_cmd(cfg)
        if cfg.command == "audit":
            return run_ladder_cmd(cfg, full_audit=True)
        return run_mms(cfg)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
    except (PicardNonConvergence, SolverNonConvergence, mms.StudyAborted) as exc:
        print("solver error: %s" % exc, file=sys.stderr)
    except (ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
    return EXIT_ERROR


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="degen-sys", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS + ("version",))
    ap.add_argument("--config", help="experiment config (INI-style key = value with [sections])")
    ap.add_argument("--out", help="output directory (overrides [run] output)")
    args = ap.parse_args(argv)
    if args.command == "version":
        print(version_line())
        return EXIT_OK
    if not args.config:
        ap.error("--config is required for %s" % args.command)
    return run(args.config, args.command, args.out)


if __name__ == "__main__":
    sys.exit(main())
