"""Alternating Picard iteration for the truncated coupled system

    -div(a grad w / (b + |T_rho(W)|)^2) + w = g
    -div(A grad W / (B + |T_sigma(w)|)^2) + W = G

with zero Dirichlet data.  Each half step is a linear SPD solve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .audit import audit_linfty
from .discretization import apply, assemble, gradient_l1, solve_spd
from .grid import ProblemSpec, ScalarField, SolveReport, l2_norm, linf_norm, same_grid, validate
from .truncation import INFINITE, check_level, degenerate_coefficient


@dataclass(frozen=True)
class FixedPointConfig:
    tol: float = 1e-8
    max_iter: int = 200
    theta: float = 1.0
    linear_tol: float = 1e-10
    stall_window: int = 5
    min_halvings: int = 3

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("stopping tolerance must be positive")
        if not 0 < self.theta <= 1:
            raise ValueError("damping factor must lie in (0, 1]")
        if not self.linear_tol > 0:
            raise ValueError("linear tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("need at least one iteration")


class PicardNonConvergence(RuntimeError):
    """The fixed-point iteration ran out of iterations."""

    def __init__(self, message, differences, halvings, rung=None):
        super().__init__(message)
        self.differences = list(differences)
        self.halvings = halvings
        self.rung = rung


def auto_levels(g: ScalarField, G: ScalarField) -> tuple[float, float]:
    """``(||g||_inf, ||G||_inf)``; a zero level freezes the coefficient at a/b^2."""
    return linf_norm(g), linf_norm(G)


def barrier_levels(g: ScalarField, G: ScalarField) -> tuple[float, float]:
    """Levels that can never clip an iterate.

    The ``w`` equation truncates ``W``, whose barrier is ``||G||_inf``, and
    vice versa, so ``(||G||_inf, ||g||_inf)`` leaves both truncations idle
    and the fixed point solves the untruncated system.
    """
    return linf_norm(G), linf_norm(g)


def _half_step(coef, offset, other, level, rhs, cfg):
    D = degenerate_coefficient(coef, offset, other, level)
    return solve_spd(assemble(rhs.grid, D), rhs, cfg.linear_tol)


def solve_truncated(
    spec: ProblemSpec,
    rho: float = INFINITE,
    sigma: float = INFINITE,
    cfg: FixedPointConfig = FixedPointConfig(),
    initial: tuple[ScalarField, ScalarField] | None = None,
):
    """Fixed point ``(w, W)`` of the truncated system with data ``spec.f``,
    ``spec.F``.

    Returns ``(w, W, report)``.  The iteration starts from zero unless
    ``initial`` is given.  When the successive difference fails to decrease
    for ``cfg.stall_window`` iterations the damping factor is halved; the
    iteration cap is only enforced once it has been halved
    ``cfg.min_halvings`` times, forcing halvings at the cap if needed.
    """
    rho, sigma = check_level(rho), check_level(sigma)
    result = validate(spec)
    if not result.ok:
        raise ValueError("structural assumptions violated: " + result.describe())
    grid = spec.grid
    g, G = spec.f, spec.F
    if initial is None:
        w, W = grid.zeros(), grid.zeros()
    else:
        w, W = initial
        same_grid(w, W, g)

    theta = cfg.theta
    halvings = 0
    stall = 0
    budget = cfg.max_iter
    diffs: list[float] = []
    prev = math.inf
    converged = False
    while len(diffs) < budget:
        wt = _half_step(spec.a, spec.b, W, rho, g, cfg)
        w_new = wt if theta == 1.0 else w * (1.0 - theta) + wt * theta
        Wt = _half_step(spec.A, spec.B, w_new, sigma, G, cfg)
        W_new = Wt if theta == 1.0 else W * (1.0 - theta) + Wt * theta
        d = max(l2_norm(w_new - w), l2_norm(W_new - W))
        diffs.append(d)
        w, W = w_new, W_new
        if d <= cfg.tol:
            converged = True
            break
        stall = stall + 1 if d >= prev else 0
        prev = d
        if stall >= cfg.stall_window:
            theta *= 0.5
            halvings += 1
            stall = 0
        if len(diffs) == budget and halvings < cfg.min_halvings:
            theta *= 0.5
            halvings += 1
            budget += cfg.stall_window
    if not converged:
        raise PicardNonConvergence(
            "Picard iteration did not converge in %d iterations (last difference %.3e, "
            "damping halved %d times)" % (len(diffs), diffs[-1], halvings),
            diffs,
            halvings,
        )
    report = SolveReport(converged=True, differences=diffs, tol=cfg.tol, halvings=halvings, theta=theta)
    report.norms = solution_norms(w, W)
    report.audits = [
        audit_linfty(w, g, name="linfty_w"),
        audit_linfty(W, G, name="linfty_W"),
    ]
    return w, W, report


def solution_norms(w: ScalarField, W: ScalarField) -> dict[str, float]:
    return {
        "l2_u": l2_norm(w),
        "linf_u": linf_norm(w),
        "w11_u": gradient_l1(w),
        "l2_z": l2_norm(W),
        "linf_z": linf_norm(W),
        "w11_z": gradient_l1(W),
    }


def _relative(res: np.ndarray, rhs: np.ndarray) -> float:
    rn = float(np.linalg.norm(res))
    bn = float(np.linalg.norm(rhs))
    return rn / bn if bn > 0 else rn


def residuals(
    spec: ProblemSpec,
    w: ScalarField,
    W: ScalarField,
    rho: float = INFINITE,
    sigma: float = INFINITE,
) -> tuple[float, float]:
    """Relative Euclidean residuals of the two discrete equations (absolute
    when the corresponding datum vanishes)."""
    grid = spec.grid
    D1 = degenerate_coefficient(spec.a, spec.b, W, rho)
    D2 = degenerate_coefficient(spec.A, spec.B, w, sigma)
    r1 = apply(assemble(grid, D1), w).values - spec.f.values
    r2 = apply(assemble(grid, D2), W).values - spec.F.values
    return _relative(r1, spec.f.values), _relative(r2, spec.F.values)
