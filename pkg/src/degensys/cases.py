"""Builtin problem instances used by the CLI and the acceptance suite."""
from __future__ import annotations

import numpy as np

from .grid import Grid, ProblemSpec

SPIKE_CENTER = (0.0, 0.0)


def spike(grid: Grid, center=SPIKE_CENTER):
    """``|x - x0|^(-1/2)``: square integrable, unbounded as ``h -> 0``.

    The default singular point is the corner, which no interior node of any
    grid can hit; interior centres coincide with nodes on some refinements.
    """
    def fn(*xs):
        r2 = sum((x - c) ** 2 for x, c in zip(xs, center))
        return r2 ** -0.25
    return grid.sample(fn)


def zero(grid: Grid) -> ProblemSpec:
    return ProblemSpec.constant(grid, f=0.0)


def unit_square_constant(grid: Grid) -> ProblemSpec:
    return ProblemSpec.constant(grid, a=1.0, b=1.0, f=1.0)


def symmetric_variable(grid: Grid) -> ProblemSpec:
    """Same coefficients and datum in both equations, all spatially varying."""
    def a(*xs):
        out = 1.0
        for x, L in zip(xs, grid.extent):
            out = out * np.sin(np.pi * x / L)
        return 1.0 + 0.5 * out

    def b(*xs):
        return 1.0 + 0.5 * xs[0] / grid.extent[0]

    def f(*xs):
        return 4.0 * np.cos(2.0 * np.pi * xs[0] / grid.extent[0]) + 2.0

    return ProblemSpec.constant(
        grid, a=grid.sample(a), b=grid.sample(b), f=grid.sample(f),
        alpha=1.0, beta=1.5, lam=1.0, gamma=1.5,
    )


def unbounded_spike(grid: Grid) -> ProblemSpec:
    return ProblemSpec.constant(grid, a=1.0, b=1.0, f=spike(grid))


CASES = {
    "zero": zero,
    "unit-square-constant": unit_square_constant,
    "symmetric-variable": symmetric_variable,
    "unbounded-spike": unbounded_spike,
}

DEFAULT_GRID = Grid((63, 63), (1.0, 1.0))


def build(name: str, grid: Grid = DEFAULT_GRID) -> ProblemSpec:
    try:
        return CASES[name](grid)
    except KeyError:
        raise KeyError("unknown builtin case %r (known: %s)" % (name, ", ".join(sorted(CASES)))) from None
