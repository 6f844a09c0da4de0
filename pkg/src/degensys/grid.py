"""Grids, nodal fields, problem data and the structural checks on them.

All solution fields live on the interior nodes of a uniform vertex-centred
grid over ``[0, Lx]`` or ``[0, Lx] x [0, Ly]``; boundary values are zero and
never stored.  Values are kept flat in row-major order (x fastest), so a 2D
field reshapes to ``(ny, nx)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np


class GridMismatchError(ValueError):
    """Fields that should share a grid do not."""


@dataclass(frozen=True)
class Grid:
    """Uniform grid of interior nodes.

    Parameters
    ----------
    nodes : tuple of int
        Interior node count per axis, ``(nx,)`` or ``(nx, ny)``.
    extent : tuple of float
        Domain length per axis, same order as ``nodes``.
    """

    nodes: tuple[int, ...]
    extent: tuple[float, ...]

    def __post_init__(self):
        nodes = tuple(int(n) for n in self.nodes)
        extent = tuple(float(e) for e in self.extent)
        if len(nodes) not in (1, 2) or len(extent) != len(nodes):
            raise ValueError("grid must be 1D or 2D with one extent per axis")
        if any(n < 3 for n in nodes):
            raise ValueError("need at least 3 interior nodes per axis")
        if any(not (e > 0 and math.isfinite(e)) for e in extent):
            raise ValueError("extent must be positive")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "extent", extent)

    @classmethod
    def unit(cls, n: int, dim: int = 1) -> "Grid":
        """``n`` interior nodes per axis on the unit interval/square."""
        return cls((n,) * dim, (1.0,) * dim)

    @property
    def dim(self) -> int:
        return len(self.nodes)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / (n + 1) for e, n in zip(self.extent, self.nodes))

    @property
    def size(self) -> int:
        return math.prod(self.nodes)

    @property
    def shape(self) -> tuple[int, ...]:
        """Array shape of a reshaped field, ``(ny, nx)`` in 2D."""
        return self.nodes[::-1]

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing)

    @property
    def measure(self) -> float:
        return math.prod(self.extent)

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Nodal coordinates ``(x,)`` or ``(x, y)`` as arrays of ``shape``."""
        axes = [h * np.arange(1, n + 1) for h, n in zip(self.spacing, self.nodes)]
        if self.dim == 1:
            return (axes[0],)
        y, x = np.meshgrid(axes[1], axes[0], indexing="ij")
        return x, y

    def sample(self, func: Callable[..., np.ndarray]) -> "ScalarField":
        """Evaluate ``func(x[, y])`` at the interior nodes."""
        vals = np.broadcast_to(np.asarray(func(*self.coordinates()), float), self.shape)
        return ScalarField(self, vals.ravel())

    def constant(self, value: float) -> "ScalarField":
        return ScalarField(self, np.full(self.size, float(value)))

    def zeros(self) -> "ScalarField":
        return self.constant(0.0)

    def header(self) -> str:
        return "grid %d %s %s" % (
            self.dim,
            " ".join(str(n) for n in self.nodes),
            " ".join(repr(e) for e in self.extent),
        )


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal values on the interior of a :class:`Grid` (read-only)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).ravel()
        if vals.size != self.grid.size:
            raise ValueError(
                "field has %d values, grid has %d interior nodes" % (vals.size, self.grid.size)
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def array(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values)

    def map(self, func: Callable[[np.ndarray], np.ndarray]) -> "ScalarField":
        return ScalarField(self.grid, func(self.values))

    def __neg__(self):
        return self.with_values(-self.values)

    def __add__(self, other):
        return self.with_values(self.values + _values_on(self.grid, other))

    def __sub__(self, other):
        return self.with_values(self.values - _values_on(self.grid, other))

    def __mul__(self, other):
        return self.with_values(self.values * _values_on(self.grid, other))

    __radd__ = __add__
    __rmul__ = __mul__

    def __rsub__(self, other):
        return self.with_values(_values_on(self.grid, other) - self.values)


def _values_on(grid: Grid, other) -> np.ndarray | float:
    if isinstance(other, ScalarField):
        if other.grid != grid:
            raise GridMismatchError("fields live on different grids")
        return other.values
    return float(other)


def same_grid(*fields: ScalarField) -> Grid:
    """Common grid of ``fields``; raises :class:`GridMismatchError` otherwise."""
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError("fields live on different grids")
    return grid


def l2_norm_squared(v: ScalarField) -> float:
    return float(np.sum(v.values * v.values) * v.grid.cell_volume)


def l2_norm(v: ScalarField) -> float:
    """Midpoint-rule L2 norm, ``sqrt(sum v**2 * h**dim)``."""
    return math.sqrt(l2_norm_squared(v))


def linf_norm(v: ScalarField) -> float:
    return float(np.max(np.abs(v.values))) if v.values.size else 0.0


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Coefficients and data of the coupled system.

    ``a``, ``A`` are the scalar diffusion coefficients, ``b``, ``B`` the
    degeneracy offsets and ``f``, ``F`` the right-hand sides of the ``u`` and
    ``z`` equations.  The structural constants must be positive; the
    pointwise bounds are checked by :func:`validate`, not here.
    """

    grid: Grid
    a: ScalarField
    A: ScalarField
    b: ScalarField
    B: ScalarField
    f: ScalarField
    F: ScalarField
    alpha: float
    beta: float
    lam: float
    gamma: float

    def __post_init__(self):
        for name in ("alpha", "beta", "lam", "gamma"):
            value = float(getattr(self, name))
            if not (value > 0 and math.isfinite(value)):
                label = "lambda" if name == "lam" else name
                raise ValueError("%s must be positive" % label)
            object.__setattr__(self, name, value)

    @classmethod
    def constant(
        cls,
        grid: Grid,
        *,
        a=1.0,
        A=None,
        b=1.0,
        B=None,
        f=0.0,
        F=None,
        alpha=None,
        beta=None,
        lam=None,
        gamma=None,
    ) -> "ProblemSpec":
        """Build a spec from scalars or fields; missing second-equation entries
        copy the first equation, missing constants are the tight field bounds."""

        def as_field(v):
            return v if isinstance(v, ScalarField) else grid.constant(v)

        a, b, f = as_field(a), as_field(b), as_field(f)
        A = a if A is None else as_field(A)
        B = b if B is None else as_field(B)
        F = f if F is None else as_field(F)
        coef = np.concatenate([a.values, A.values])
        offs = np.concatenate([b.values, B.values])
        return cls(
            grid, a, A, b, B, f, F,
            alpha=float(coef.min()) if alpha is None else alpha,
            beta=float(coef.max()) if beta is None else beta,
            lam=float(offs.min()) if lam is None else lam,
            gamma=float(offs.max()) if gamma is None else gamma,
        )

    def fields(self) -> dict[str, ScalarField]:
        return {"a": self.a, "A": self.A, "b": self.b, "B": self.B, "f": self.f, "F": self.F}

    def swapped(self) -> "ProblemSpec":
        """Exchange the roles of the two equations."""
        return ProblemSpec(
            self.grid, self.A, self.a, self.B, self.b, self.F, self.f,
            self.alpha, self.beta, self.lam, self.gamma,
        )

    def with_data(self, f: ScalarField, F: ScalarField) -> "ProblemSpec":
        return ProblemSpec(
            self.grid, self.a, self.A, self.b, self.B, f, F,
            self.alpha, self.beta, self.lam, self.gamma,
        )


@dataclass(frozen=True)
class Violation:
    field: str
    bound: str
    message: str
    nodes: tuple[int, ...]


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def describe(self) -> str:
        return "; ".join(
            "%s (%d nodes, first at %d)" % (v.message, len(v.nodes), v.nodes[0])
            for v in self.violations
        )


def validate(spec: ProblemSpec) -> ValidationResult:
    """Check the pointwise structural bounds of ``spec``.

    Raises :class:`GridMismatchError` if a field is not on ``spec.grid``;
    bound violations are returned, one entry per (field, bound) pair with
    the offending flat node indices.
    """
    for name, fld in spec.fields().items():
        if fld.grid != spec.grid:
            raise GridMismatchError("field %s is not on the problem grid" % name)
    checks = [
        ("a", "alpha", lambda v: v < spec.alpha, "below"),
        ("a", "beta", lambda v: v > spec.beta, "above"),
        ("A", "alpha", lambda v: v < spec.alpha, "below"),
        ("A", "beta", lambda v: v > spec.beta, "above"),
        ("b", "lambda", lambda v: v < spec.lam, "below"),
        ("b", "gamma", lambda v: v > spec.gamma, "above"),
        ("B", "lambda", lambda v: v < spec.lam, "below"),
        ("B", "gamma", lambda v: v > spec.gamma, "above"),
    ]
    found = []
    for name, bound, bad, side in checks:
        idx = np.flatnonzero(bad(getattr(spec, name).values))
        if idx.size:
            found.append(Violation(name, bound, "%s %s %s" % (name, side, bound), tuple(int(i) for i in idx)))
    return ValidationResult(tuple(found))


@dataclass(frozen=True)
class AuditRecord:
    """One checked inequality ``lhs <= rhs * tol``.

    ``informational`` records document a variant that is reported but does
    not gate acceptance.
    """

    name: str
    lhs: float
    rhs: float
    tol: float = 1.0
    context: str = ""
    informational: bool = False

    def __post_init__(self):
        if not self.tol >= 1.0:
            raise ValueError("tolerance factor must be >= 1")

    @property
    def passed(self) -> bool:
        return bool(self.lhs <= self.rhs * self.tol)

    @property
    def margin(self) -> float:
        return self.rhs * self.tol - self.lhs

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"


@dataclass
class SolveReport:
    converged: bool
    differences: list[float] = field(default_factory=list)
    tol: float = 0.0
    halvings: int = 0
    theta: float = 1.0
    norms: dict[str, float] = field(default_factory=dict)
    audits: list[AuditRecord] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.differences)


# -- field files -------------------------------------------------------------

def write_field(path: str | Path, v: ScalarField) -> None:
    """Write ``v`` as a header line plus one ``repr`` value per line."""
    lines = [v.grid.header()]
    lines.extend(repr(float(x)) for x in v.values)
    Path(path).write_text("\n".join(lines) + "\n")


def parse_grid_header(line: str) -> Grid:
    parts = line.split()
    if len(parts) < 2 or parts[0] != "grid":
        raise ValueError("expected header 'grid <dim> <nodes...> <extent...>'")
    dim = int(parts[1])
    if dim not in (1, 2) or len(parts) != 2 + 2 * dim:
        raise ValueError("malformed grid header: %r" % line)
    nodes = tuple(int(p) for p in parts[2:2 + dim])
    extent = tuple(float(p) for p in parts[2 + dim:])
    return Grid(nodes, extent)


def read_field(path: str | Path, grid: Grid | None = None) -> ScalarField:
    """Read a field file; if ``grid`` is given the header must match it."""
    path = Path(path)
    lines = [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValueError("%s: empty field file" % path)
    fgrid = parse_grid_header(lines[0])
    if grid is not None and fgrid != grid:
        raise GridMismatchError("%s: grid %s does not match %s" % (path, fgrid.header(), grid.header()))
    try:
        vals = np.array([float(x) for x in lines[1:]])
    except ValueError as exc:
        raise ValueError("%s: %s" % (path, exc)) from None
    return ScalarField(fgrid, vals)
