"""Manufactured solutions for the coupled system and grid convergence studies.

A case ships closed forms for ``u*``, ``z*`` (values, gradients,
Laplacians) and for the coefficients (values, gradients).  The sources

    f = -div(a grad u* / (b + |z*|)^2) + u*
    F = -div(A grad z* / (B + |u*|)^2) + z*

follow from the product rule.  ``u*`` and ``z*`` must keep one sign so that
``|u*|`` and ``|z*|`` stay smooth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import Grid, ProblemSpec, l2_norm
from .solver import FixedPointConfig, PicardNonConvergence, solve_truncated

Fn = Callable[..., np.ndarray]


@dataclass(frozen=True)
class Smooth:
    """A closed-form function with its gradient (and optionally Laplacian)."""

    value: Fn
    grad: Callable[..., tuple]
    lap: Fn | None = None

    @classmethod
    def constant(cls, c: float, dim: int) -> "Smooth":
        return cls(
            lambda *x: c + 0.0 * x[0],
            lambda *x: tuple(0.0 * x[0] for _ in range(dim)),
            lambda *x: 0.0 * x[0],
        )


def _sign_of(fn: Fn, dim: int, extent) -> float:
    pts = [np.linspace(0, L, 203)[1:-1] for L in extent]
    mesh = np.meshgrid(*pts, indexing="ij")
    vals = np.asarray(fn(*mesh))
    if np.any(vals > 0) and np.any(vals < 0):
        return 0.0
    return -1.0 if np.any(vals < 0) else 1.0


@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    dim: int
    u: Smooth
    z: Smooth
    a: Smooth
    A: Smooth
    b: Smooth
    B: Smooth
    extent: tuple[float, ...] = ()
    signs: tuple[float, float] = field(default=(1.0, 1.0), init=False)

    def __post_init__(self):
        extent = self.extent or (1.0,) * self.dim
        object.__setattr__(self, "extent", tuple(float(e) for e in extent))
        su = _sign_of(self.u.value, self.dim, self.extent)
        sz = _sign_of(self.z.value, self.dim, self.extent)
        if su == 0.0 or sz == 0.0:
            raise ValueError(
                "case %r rejected: exact solutions must not change sign (|u|, |z| would kink)" % self.name
            )
        if self.u.lap is None or self.z.lap is None:
            raise ValueError("case %r rejected: Laplacians of u and z are required" % self.name)
        object.__setattr__(self, "signs", (su, sz))


def _source(sol: Smooth, coef: Smooth, off: Smooth, other: Smooth, sign_other: float) -> Fn:
    def f(*x):
        a, b = coef.value(*x), off.value(*x)
        w = b + sign_other * other.value(*x)
        ga, gb, go, gu = coef.grad(*x), off.grad(*x), other.grad(*x), sol.grad(*x)
        c = a / w**2
        div = c * sol.lap(*x)
        for i in range(len(gu)):
            dc = ga[i] / w**2 - 2.0 * a * (gb[i] + sign_other * go[i]) / w**3
            div = div + dc * gu[i]
        return -div + sol.value(*x)

    return f


def manufacture(case: ManufacturedCase) -> tuple[Fn, Fn]:
    """Analytic sources ``(f, F)`` of ``case``."""
    su, sz = case.signs
    return (
        _source(case.u, case.a, case.b, case.z, sz),
        _source(case.z, case.A, case.B, case.u, su),
    )


def _fd_source(sol: Fn, coef: Fn, off: Fn, other: Fn, eta: float, dim: int) -> Fn:
    def c(*x):
        return coef(*x) / (off(*x) + np.abs(other(*x))) ** 2

    def f(*x):
        x = [np.asarray(xi, float) for xi in x]
        total = 0.0
        for i in range(dim):
            def shift(t):
                return [xj + t if j == i else xj for j, xj in enumerate(x)]
            right = c(*shift(0.5 * eta)) * (sol(*shift(eta)) - sol(*x)) / eta
            left = c(*shift(-0.5 * eta)) * (sol(*x) - sol(*shift(-eta))) / eta
            total = total + (right - left) / eta
        return -total + sol(*x)

    return f


def manufacture_fd(case: ManufacturedCase, eta: float) -> tuple[Fn, Fn]:
    """Sources from centred differences of the flux at spacing ``eta``;
    uses only function values of the closed forms."""
    return (
        _fd_source(case.u.value, case.a.value, case.b.value, case.z.value, eta, case.dim),
        _fd_source(case.z.value, case.A.value, case.B.value, case.u.value, eta, case.dim),
    )


def source_discrepancy(case: ManufacturedCase, h: float = 1 / 64) -> tuple[float, float]:
    """Max relative gap between analytic and finite-difference sources on the
    nodes of the grid with spacing ``h``, differencing at ``h / 8``."""
    n = round(case.extent[0] / h) - 1
    grid = Grid((n,) * case.dim, case.extent)
    xs = grid.coordinates()
    out = []
    for an, fd in zip(manufacture(case), manufacture_fd(case, h / 8)):
        va, vf = np.asarray(an(*xs)), np.asarray(fd(*xs))
        scale = float(np.max(np.abs(va)))
        gap = float(np.max(np.abs(va - vf)))
        out.append(gap / scale if scale > 0 else gap)
    return out[0], out[1]


def case_spec(case: ManufacturedCase, grid: Grid) -> ProblemSpec:
    f, F = manufacture(case)
    return ProblemSpec.constant(
        grid,
        a=grid.sample(case.a.value), A=grid.sample(case.A.value),
        b=grid.sample(case.b.value), B=grid.sample(case.B.value),
        f=grid.sample(f), F=grid.sample(F),
    )


class StudyAborted(RuntimeError):
    def __init__(self, message, rows):
        super().__init__(message)
        self.rows = rows


RATE_COLUMNS = ("case", "h", "error_u", "error_z", "order_u", "order_z")


def _order(e_coarse: float, e_fine: float):
    if e_coarse == 0.0 and e_fine == 0.0:
        return "exact"
    if e_fine == 0.0 or e_coarse == 0.0:
        return "exact" if e_fine == 0.0 else float("-inf")
    return math.log2(e_coarse / e_fine)


def convergence_study(
    case: ManufacturedCase,
    cells: Sequence[int],
    cfg: FixedPointConfig = FixedPointConfig(),
    keep_solutions: bool = False,
):
    """Errors and observed orders over dyadically refined grids.

    ``cells`` are cell counts per axis (``h = extent / cells``).  Truncation
    levels sit well above the exact solutions so they never act.  Returns
    rows ``(case, h, error_u, error_z, order_u, order_z)`` (orders ``None``
    on the first row), plus the finest ``(grid, u, z)`` if
    ``keep_solutions``.
    """
    cells = [int(c) for c in cells]
    if len(cells) < 3:
        raise ValueError("need at least three resolutions")
    if any(b != 2 * a for a, b in zip(cells, cells[1:])):
        raise ValueError("resolutions must be dyadically refined")
    rows = []
    last = None
    for m in cells:
        grid = Grid((m - 1,) * case.dim, case.extent)
        spec = case_spec(case, grid)
        ue, ze = grid.sample(case.u.value), grid.sample(case.z.value)
        rho = 2.0 * float(np.max(np.abs(ze.values))) + 1.0
        sigma = 2.0 * float(np.max(np.abs(ue.values))) + 1.0
        try:
            u, z, _ = solve_truncated(spec, rho, sigma, cfg)
        except PicardNonConvergence as exc:
            raise StudyAborted("case %s, %d cells: %s" % (case.name, m, exc), rows) from exc
        eu, ez = l2_norm(u - ue), l2_norm(z - ze)
        if rows:
            pu, pz = _order(rows[-1][2], eu), _order(rows[-1][3], ez)
        else:
            pu = pz = None
        rows.append((case.name, grid.spacing[0], eu, ez, pu, pz))
        last = (grid, u, z)
    return (rows, last) if keep_solutions else rows


# -- registered cases -----------------------------------------------------------

PI = math.pi


def _sin1():
    return Smooth(
        lambda x: np.sin(PI * x),
        lambda x: (PI * np.cos(PI * x),),
        lambda x: -PI * PI * np.sin(PI * x),
    )


def _sin2():
    return Smooth(
        lambda x, y: np.sin(PI * x) * np.sin(PI * y),
        lambda x, y: (PI * np.cos(PI * x) * np.sin(PI * y), PI * np.sin(PI * x) * np.cos(PI * y)),
        lambda x, y: -2 * PI * PI * np.sin(PI * x) * np.sin(PI * y),
    )


def _bubble2():
    return Smooth(
        lambda x, y: 16 * x * (1 - x) * y * (1 - y),
        lambda x, y: (16 * (1 - 2 * x) * y * (1 - y), 16 * x * (1 - x) * (1 - 2 * y)),
        lambda x, y: -32 * (y * (1 - y) + x * (1 - x)),
    )


def _bubble1():
    return Smooth(lambda x: 4 * x * (1 - x), lambda x: (4 - 8 * x,), lambda x: -8.0 + 0.0 * x)


def _builtin_cases() -> dict[str, ManufacturedCase]:
    one1, one2 = Smooth.constant(1.0, 1), Smooth.constant(1.0, 2)
    zero1, zero2 = Smooth.constant(0.0, 1), Smooth.constant(0.0, 2)
    a1 = Smooth(lambda x: 1 + 0.5 * x, lambda x: (0.5 + 0.0 * x,))
    b1 = Smooth(lambda x: 1 + 0.25 * x * x, lambda x: (0.5 * x,))
    a2 = Smooth(lambda x, y: 1 + 0.5 * x * y, lambda x, y: (0.5 * y, 0.5 * x))
    b2 = Smooth(lambda x, y: 1.5 + 0.5 * np.sin(PI * x) * y, lambda x, y: (0.5 * PI * np.cos(PI * x) * y, 0.5 * np.sin(PI * x)))
    cases = [
        ManufacturedCase("zero", 1, zero1, zero1, one1, one1, one1, one1),
        ManufacturedCase("laplace-1d", 1, _sin1(), zero1, one1, one1, one1, one1),
        ManufacturedCase("frozen-1d", 1, _sin1(), zero1, a1, one1, b1, one1),
        ManufacturedCase("frozen-2d", 2, _sin2(), zero2, a2, one2, b2, one2),
        ManufacturedCase("coupled-1d", 1, _sin1(), _bubble1(), a1, one1, b1, one1),
        ManufacturedCase("coupled-2d", 2, _sin2(), _bubble2(), one2, one2, one2, one2),
    ]
    return {c.name: c for c in cases}


CASES = _builtin_cases()
