"""Flux-form finite differences for ``-div(D grad u) + u`` with zero
Dirichlet data, plus the discrete seminorms the estimates are stated in.

Conventions
-----------
* Nodal coefficients are averaged to faces harmonically; a face on the
  boundary takes the value of its interior node.
* The reaction term enters the divided-difference scaling with coefficient
  exactly one, so the assembled matrix is an M-matrix whose rows exceed
  diagonal dominance by one.  Hence ``||x||_inf <= ||rhs||_inf``.
* Integrals are midpoint sums: value times ``h**dim``.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import _pykernels, kernels
from .grid import Grid, ScalarField, same_grid

CONVENTIONS = {
    "stencil": "flux-3pt/5pt",
    "face_mean": "harmonic",
    "boundary_face": "interior-node",
    "reaction": 1.0,
    "quadrature": "midpoint",
    "gradient_l1": "cell-axis-mean-euclidean",
}


@dataclass(frozen=True)
class FaceCoefficients:
    """Face values: ``x`` has shape ``(ny, nx+1)``, ``y`` is ``(ny+1, nx)`` or
    ``None`` in 1D (1D arrays carry a leading axis of length one)."""

    grid: Grid
    x: np.ndarray
    y: np.ndarray | None


def _harmonic(p, q):
    return 2.0 * p * q / (p + q)


def _as_2d(grid: Grid, values: np.ndarray) -> np.ndarray:
    return values.reshape(grid.shape if grid.dim == 2 else (1, grid.size))


def face_average(D: ScalarField) -> FaceCoefficients:
    vals = D.values
    if np.any(vals <= 0):
        raise ValueError("nodal coefficient must be positive for face averaging")
    d = _as_2d(D.grid, vals)
    fx = np.empty((d.shape[0], d.shape[1] + 1))
    fx[:, 0] = d[:, 0]
    fx[:, -1] = d[:, -1]
    fx[:, 1:-1] = _harmonic(d[:, :-1], d[:, 1:])
    fy = None
    if D.grid.dim == 2:
        fy = np.empty((d.shape[0] + 1, d.shape[1]))
        fy[0] = d[0]
        fy[-1] = d[-1]
        fy[1:-1] = _harmonic(d[:-1], d[1:])
    return FaceCoefficients(D.grid, fx, fy)


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """Square CSR matrix acting on interior-node fields of ``grid``."""

    grid: Grid
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.indptr) - 1

    def to_scipy(self) -> sp.csr_matrix:
        n = self.dimension
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=(n, n))

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def diagonal(self) -> np.ndarray:
        return _pykernels._diagonal(self.indptr, self.indices, self.data)


def assemble_faces(faces: FaceCoefficients) -> SparseOperator:
    grid = faces.grid
    h = grid.spacing
    indptr, indices, data = kernels.assemble_csr(
        np.ascontiguousarray(faces.x),
        None if faces.y is None else np.ascontiguousarray(faces.y),
        h[0],
        h[1] if grid.dim == 2 else 1.0,
    )
    return SparseOperator(grid, indptr, indices, data)


def assemble(grid: Grid, D: ScalarField) -> SparseOperator:
    """Matrix of ``-div(D grad .) + I`` on the interior nodes of ``grid``."""
    if D.grid != grid:
        raise ValueError("coefficient is not on the requested grid")
    return assemble_faces(face_average(D))


def apply(op: SparseOperator, v: ScalarField) -> ScalarField:
    if v.values.size != op.dimension:
        raise ValueError("operator of dimension %d applied to %d values" % (op.dimension, v.values.size))
    return v.with_values(kernels.csr_matvec(op.indptr, op.indices, op.data, v.values))


def _face_differences(u: ScalarField):
    """Difference quotients across every face, ghost zeros on the boundary."""
    grid = u.grid
    d = np.pad(_as_2d(grid, u.values), ((1, 1), (1, 1)) if grid.dim == 2 else ((0, 0), (1, 1)))
    hx = grid.spacing[0]
    if grid.dim == 1:
        return np.diff(d, axis=1) / hx, None
    hy = grid.spacing[1]
    gx = np.diff(d[1:-1, :], axis=1) / hx  # (ny, nx+1)
    gy = np.diff(d[:, 1:-1], axis=0) / hy  # (ny+1, nx)
    return gx, gy


def face_products(u: ScalarField, phi: ScalarField, D: ScalarField) -> float:
    """``sum_faces D_face (du/h)(dphi/h) h**dim``: the discrete flux pairing."""
    same_grid(u, phi, D)
    faces = face_average(D)
    ux, uy = _face_differences(u)
    px, py = _face_differences(phi)
    total = float(np.sum(faces.x * ux * px))
    if uy is not None:
        total += float(np.sum(faces.y * uy * py))
    return total * u.grid.cell_volume


def weighted_gradient_energy(u: ScalarField, D: ScalarField) -> float:
    """``sum_faces D_face (du/h)**2 h**dim`` with harmonic face values."""
    return face_products(u, u, D)


def flux_l2_squared(u: ScalarField, D: ScalarField) -> float:
    """``sum_faces (D_face du/h)**2 h**dim``."""
    same_grid(u, D)
    faces = face_average(D)
    ux, uy = _face_differences(u)
    total = float(np.sum((faces.x * ux) ** 2))
    if uy is not None:
        total += float(np.sum((faces.y * uy) ** 2))
    return total * u.grid.cell_volume


def cell_gradient_magnitude(u: ScalarField) -> np.ndarray:
    """|grad_h u| on every cell of the padded grid (boundary nodes included).

    In 2D a cell has two faces per axis; their difference quotients are
    averaged and the Euclidean norm taken.  Shape ``(nx+1,)`` or
    ``(ny+1, nx+1)``.
    """
    gx, gy = _face_differences(u)
    if gy is None:
        return np.abs(gx[0])
    # boundary rows/columns have zero tangential differences
    gx = np.pad(gx, ((1, 1), (0, 0)))
    gy = np.pad(gy, ((0, 0), (1, 1)))
    cx = 0.5 * (gx[:-1] + gx[1:])
    cy = 0.5 * (gy[:, :-1] + gy[:, 1:])
    return np.hypot(cx, cy)


def cell_average(v: ScalarField, boundary: str = "zero") -> np.ndarray:
    """Mean of the corner values of each cell.

    ``boundary="zero"`` treats boundary nodes as zero (solution fields);
    ``"extend"`` copies the nearest interior value (coefficients).
    """
    mode = {"zero": "constant", "extend": "edge"}[boundary]
    if v.grid.dim == 1:
        d = np.pad(v.values, 1, mode=mode)
        return 0.5 * (d[:-1] + d[1:])
    d = np.pad(v.array, 1, mode=mode)
    return 0.25 * (d[:-1, :-1] + d[:-1, 1:] + d[1:, :-1] + d[1:, 1:])


def gradient_l1(u: ScalarField) -> float:
    """Discrete W^{1,1}_0 seminorm ``sum_cells |grad_h u| h**dim``."""
    return float(np.sum(cell_gradient_magnitude(u))) * u.grid.cell_volume


class SolverNonConvergence(RuntimeError):
    """A linear solve hit its iteration cap."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


def solve_spd(op: SparseOperator, rhs: ScalarField, tol: float = 1e-10) -> ScalarField:
    """Jacobi-preconditioned conjugate gradients.

    The result satisfies ``||A x - rhs||_2 <= tol ||rhs||_2``; the iteration
    cap is ten times the dimension.
    """
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    if rhs.values.size != op.dimension:
        raise ValueError("right-hand side does not match the operator")
    maxiter = 10 * op.dimension
    x, its, res = kernels.pcg(op.indptr, op.indices, op.data, np.ascontiguousarray(rhs.values), tol, maxiter)
    bnorm = math.sqrt(float(rhs.values @ rhs.values))
    if res > tol * bnorm:
        raise SolverNonConvergence(
            "CG did not converge in %d iterations (residual %.3e)" % (its, res), res, its
        )
    return rhs.with_values(x)


def fingerprint() -> str:
    """Short hash of the discretization conventions and stencil sources."""
    h = hashlib.sha256(repr(sorted(CONVENTIONS.items())).encode())
    here = Path(__file__).parent
    for name in ("discretization.py", "_pykernels.py", "_ckernels.pyx"):
        path = here / name
        if path.exists():
            h.update(path.read_bytes())
    return h.hexdigest()[:16]
