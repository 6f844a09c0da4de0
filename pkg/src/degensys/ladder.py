"""The approximation ladder: bounded data ``f_n = f / (1 + |f|/n)`` solved
for an increasing schedule of ``n``."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .grid import ProblemSpec, ScalarField, SolveReport, l2_norm, validate
from .discretization import gradient_l1
from .solver import FixedPointConfig, PicardNonConvergence, auto_levels, barrier_levels, residuals, solve_truncated
from .truncation import INFINITE, approximate_datum

DEFAULT_SCHEDULE = (1, 2, 4, 8, 16, 32, 64)

LADDER_COLUMNS = (
    "n", "converged", "iterations", "final_difference",
    "l2_u", "l2_z", "w11_u", "w11_z", "data_err_f", "data_err_F", "cauchy_u", "cauchy_z",
)


def check_schedule(schedule) -> tuple[int, ...]:
    sched = tuple(int(n) for n in schedule)
    if not sched:
        raise ValueError("schedule must be nonempty")
    if any(n < 1 for n in sched):
        raise ValueError("schedule entries must be >= 1")
    if any(b <= a for a, b in zip(sched, sched[1:])):
        raise ValueError("schedule must be strictly increasing")
    return sched


@dataclass
class Rung:
    n: int
    u: ScalarField
    z: ScalarField
    f_n: ScalarField
    F_n: ScalarField
    levels: tuple[float, float]
    report: SolveReport
    metrics: dict[str, float] = field(default_factory=dict)


@dataclass
class LadderReport:
    rungs: list[Rung]

    @property
    def top(self) -> Rung:
        return self.rungs[-1]

    def cauchy_u(self) -> list[float]:
        return [r.metrics["cauchy_u"] for r in self.rungs[1:]]

    def cauchy_z(self) -> list[float]:
        return [r.metrics["cauchy_z"] for r in self.rungs[1:]]

    def rows(self):
        for r in self.rungs:
            m = r.metrics
            yield (
                r.n, int(r.report.converged), r.report.iterations, repr(r.report.differences[-1]),
                *(repr(m[c]) if c in m else "" for c in LADDER_COLUMNS[4:]),
            )


def _levels(mode: str, g: ScalarField, G: ScalarField) -> tuple[float, float]:
    if mode == "barrier":
        return barrier_levels(g, G)
    if mode == "auto":
        return auto_levels(g, G)
    if mode == "none":
        return INFINITE, INFINITE
    raise ValueError("unknown level mode %r" % mode)


def solve_rung(spec: ProblemSpec, n: int, cfg: FixedPointConfig, initial=None, levels: str = "barrier") -> Rung:
    f_n = approximate_datum(spec.f, n)
    F_n = approximate_datum(spec.F, n)
    lv = _levels(levels, f_n, F_n)
    try:
        u, z, rep = solve_truncated(spec.with_data(f_n, F_n), *lv, cfg=cfg, initial=initial)
    except PicardNonConvergence as exc:
        exc.rung = n
        exc.args = ("rung n=%d: %s" % (n, exc.args[0]),)
        raise
    metrics = {
        "l2_u": l2_norm(u),
        "l2_z": l2_norm(z),
        "w11_u": gradient_l1(u),
        "w11_z": gradient_l1(z),
        "data_err_f": l2_norm(f_n - spec.f),
        "data_err_F": l2_norm(F_n - spec.F),
    }
    return Rung(n, u, z, f_n, F_n, lv, rep, metrics)


def run_ladder(
    spec: ProblemSpec,
    schedule=DEFAULT_SCHEDULE,
    cfg: FixedPointConfig = FixedPointConfig(),
    warm_start: bool = True,
    levels: str = "barrier",
    workers: int = 1,
) -> LadderReport:
    """Solve every rung of ``schedule``.

    Warm starts chain the rungs; with ``warm_start=False`` rungs are
    independent and ``workers > 1`` solves them in a thread pool (the
    compiled CG releases the GIL).  ``levels`` selects the truncation
    levels: ``"barrier"`` (never active), ``"auto"`` (the data sup norms
    paired per equation) or ``"none"``.
    """
    sched = check_schedule(schedule)
    result = validate(spec)
    if not result.ok:
        raise ValueError("structural assumptions violated: " + result.describe())
    if warm_start:
        rungs, prev = [], None
        for n in sched:
            rung = solve_rung(spec, n, cfg, None if prev is None else (prev.u, prev.z), levels)
            rungs.append(rung)
            prev = rung
    elif workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rungs = list(pool.map(lambda n: solve_rung(spec, n, cfg, None, levels), sched))
    else:
        rungs = [solve_rung(spec, n, cfg, None, levels) for n in sched]
    for prev, rung in zip(rungs[:-1], rungs[1:]):
        rung.metrics["cauchy_u"] = l2_norm(rung.u - prev.u)
        rung.metrics["cauchy_z"] = l2_norm(rung.z - prev.z)
    return LadderReport(rungs)


def limit_residual(spec: ProblemSpec, u: ScalarField, z: ScalarField, data=None) -> tuple[float, float]:
    """Residuals of the untruncated system with the original data (or with
    ``data = (g, G)`` when given)."""
    if data is not None:
        spec = spec.with_data(*data)
    return residuals(spec, u, z, INFINITE, INFINITE)
