"""Numerical certificates for the a priori estimates of the approximating
problems, evaluated on computed solutions.

Every check is returned as an :class:`~degensys.grid.AuditRecord`
``lhs <= rhs * tol``.  Continuum inequalities get ``tol = 1.05`` to absorb
quadrature and stencil consistency error; the discrete maximum principle is
checked at ``1 + 1e-8``.
"""
from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .discretization import (
    cell_average,
    cell_gradient_magnitude,
    face_products,
    flux_l2_squared,
    gradient_l1,
    weighted_gradient_energy,
)
from .grid import AuditRecord, ScalarField, l2_norm, l2_norm_squared, linf_norm, same_grid
from .truncation import INFINITE, degenerate_coefficient, remainder_field

ESTIMATE_TOL = 1.05
BARRIER_TOL = 1.0 + 1e-8


def audit_linfty(w: ScalarField, g: ScalarField, name: str = "linf_barrier", context: str = "") -> AuditRecord:
    return AuditRecord(name, linf_norm(w), linf_norm(g), BARRIER_TOL, context)


def default_kgrid(u: ScalarField) -> list[float]:
    """0 and the quartiles of ``|u|``."""
    q = np.quantile(np.abs(u.values), [0.25, 0.5, 0.75])
    return sorted({0.0, *(float(x) for x in q)})


def superlevel_mass(u: ScalarField, f: ScalarField, k: float) -> float:
    """``sum over {|u| >= k} of f**2 h**dim``."""
    same_grid(u, f)
    mask = np.abs(u.values) >= k
    return float(np.sum(f.values[mask] ** 2)) * u.grid.cell_volume


def audit_truncated_l2(u: ScalarField, f: ScalarField, k: float, name="truncated_l2", context="") -> AuditRecord:
    lhs = l2_norm(remainder_field(u, k))
    return AuditRecord(name, lhs, math.sqrt(superlevel_mass(u, f, k)), ESTIMATE_TOL, context)


def inverse_weight(b: ScalarField, z: ScalarField) -> ScalarField:
    """``1 / (b + |z|)**2``."""
    return degenerate_coefficient(b.grid.constant(1.0), b, z, INFINITE)


def audit_weighted_gradient(
    u: ScalarField, z: ScalarField, f: ScalarField, b: ScalarField, k: float, alpha: float,
    name="weighted_gradient", context="",
) -> AuditRecord:
    lhs = alpha * weighted_gradient_energy(remainder_field(u, k), inverse_weight(b, z))
    return AuditRecord(name, lhs, superlevel_mass(u, f, k), ESTIMATE_TOL, context)


def w11_bound(f: ScalarField, b: ScalarField, weight_datum: ScalarField, alpha: float) -> float:
    return l2_norm(f) * (l2_norm(b) + l2_norm(weight_datum)) / math.sqrt(alpha)


def audit_w11(u: ScalarField, f: ScalarField, b: ScalarField, alpha: float, name="w11", context="") -> AuditRecord:
    """``sum |grad u| h**dim <= ||f|| (||b|| + ||f||) / sqrt(alpha)``."""
    return AuditRecord(name, gradient_l1(u), w11_bound(f, b, f, alpha), ESTIMATE_TOL, context)


def audit_w11_second(
    z: ScalarField, F: ScalarField, f: ScalarField, b: ScalarField, B: ScalarField, alpha: float, context="",
) -> list[AuditRecord]:
    """The second-unknown bound with both candidate constants:
    ``||F|| (||b|| + ||f||)`` (first-equation offsets) and
    ``||F|| (||B|| + ||F||)`` (its own)."""
    lhs = gradient_l1(z)
    return [
        AuditRecord("w11_z_mixed", lhs, w11_bound(F, b, f, alpha), ESTIMATE_TOL, context),
        AuditRecord("w11_z_own", lhs, w11_bound(F, B, F, alpha), ESTIMATE_TOL, context),
    ]


def audit_w11_chain(
    u: ScalarField, z: ScalarField, f: ScalarField, b: ScalarField, alpha: float, name="w11_chain", context="",
) -> AuditRecord:
    """Cauchy-Schwarz step: ``sum |grad u| <= sqrt(mass/alpha) (||b|| + ||z||)``
    with ``mass`` the weighted-gradient right side at ``k = 0``."""
    rhs = math.sqrt(superlevel_mass(u, f, 0.0) / alpha) * (l2_norm(b) + l2_norm(z))
    return AuditRecord(name, gradient_l1(u), rhs, ESTIMATE_TOL, context)


def _top_count(n_items: int, fraction: float) -> int:
    if not 0 < fraction <= 1:
        raise ValueError("fractions must lie in (0, 1]")
    return min(n_items, max(1, math.ceil(fraction * n_items - 1e-12)))


def _top_mask(score: np.ndarray, count: int) -> np.ndarray:
    # stable order keeps ties deterministic
    order = np.argsort(-score.ravel(), kind="stable")
    mask = np.zeros(score.size, dtype=bool)
    mask[order[:count]] = True
    return mask.reshape(score.shape)


def equiintegrability_profile(u: ScalarField, fractions: Sequence[float]) -> list[tuple[float, float]]:
    """Largest ``sum_E u**2 h**dim`` over node sets of ``ceil(delta * N)`` nodes."""
    out = []
    sq = u.values * u.values
    for delta in fractions:
        mask = _top_mask(np.abs(u.values), _top_count(u.values.size, delta))
        out.append((float(delta), float(np.sum(sq * mask)) * u.grid.cell_volume))
    return out


def equiintegrability_bound(u: ScalarField, f: ScalarField, delta: float, kgrid: Iterable[float]) -> float:
    """``min_k 2 k**2 |E| + 2 sum_{|u| >= k} f**2 h**dim`` with ``|E|`` the
    measure of the worst-case set."""
    measure = _top_count(u.values.size, delta) * u.grid.cell_volume
    return min(2.0 * k * k * measure + 2.0 * superlevel_mass(u, f, k) for k in kgrid)


def audit_equiintegrability(
    u: ScalarField, f: ScalarField, delta: float, kgrid: Iterable[float] | None = None, context="",
) -> AuditRecord:
    kgrid = default_kgrid(u) if kgrid is None else list(kgrid)
    (_, mass), = equiintegrability_profile(u, [delta])
    rhs = equiintegrability_bound(u, f, delta, kgrid)
    return AuditRecord("l2_equiintegrability", mass, rhs, ESTIMATE_TOL, context or "delta=%g" % delta)


def gradient_equiintegrability_profile(
    u: ScalarField, z: ScalarField, f: ScalarField, b: ScalarField, alpha: float, fractions: Sequence[float],
    context="",
) -> list[AuditRecord]:
    """Worst-case ``sum_E |grad_h u| h**dim`` over cell sets of a given
    fraction against ``(||f||^2/alpha)^(1/2) [(int_E b^2)^(1/2) + (int_E z^2)^(1/2)]``.

    Cell values of ``b`` and ``z`` are corner means (``b`` extended, ``z``
    zero on the boundary).
    """
    same_grid(u, z, f, b)
    grad = cell_gradient_magnitude(u).ravel()
    bc = cell_average(b, "extend").ravel()
    zc = cell_average(z, "zero").ravel()
    vol = u.grid.cell_volume
    scale = math.sqrt(l2_norm_squared(f) / alpha)
    out = []
    for delta in fractions:
        mask = _top_mask(grad, _top_count(grad.size, delta))
        lhs = float(np.sum(grad * mask)) * vol
        rhs = scale * (math.sqrt(float(np.sum(bc[mask] ** 2)) * vol) + math.sqrt(float(np.sum(zc[mask] ** 2)) * vol))
        ctx = "delta=%g" % delta if not context else "%s delta=%g" % (context, delta)
        out.append(AuditRecord("gradient_equiintegrability", lhs, rhs, ESTIMATE_TOL, ctx))
    return out


def audit_flux_l2(
    u: ScalarField, z: ScalarField, a: ScalarField, b: ScalarField, f: ScalarField,
    alpha: float, beta: float, lam: float, context="",
) -> list[AuditRecord]:
    """``sum |D grad u|^2 <= beta^2 / (lam^2 alpha) ||f||^2`` with the
    untruncated coefficient ``D = a/(b+|z|)^2``, plus the informational
    variant with constant ``alpha^2 / lam^2``."""
    lhs = flux_l2_squared(u, degenerate_coefficient(a, b, z, INFINITE))
    mass = l2_norm_squared(f)
    return [
        AuditRecord("flux_l2", lhs, beta * beta / (lam * lam * alpha) * mass, ESTIMATE_TOL, context),
        AuditRecord("flux_l2_alpha", lhs, alpha * alpha / (lam * lam) * mass, ESTIMATE_TOL, context, informational=True),
    ]


def sine_modes(grid, orders=(1, 2, 3)) -> list[ScalarField]:
    """Tensor-product sine modes vanishing on the boundary."""
    modes = []
    for k in orders:
        def phi(*xs, k=k):
            out = 1.0
            for x, L in zip(xs, grid.extent):
                out = out * np.sin(k * np.pi * x / L)
            return out
        modes.append(grid.sample(phi))
    return modes


def flux_pairing(u: ScalarField, z: ScalarField, a: ScalarField, b: ScalarField, phi: ScalarField) -> float:
    """``sum_faces D_face (du/h)(dphi/h) h**dim`` with untruncated ``D``."""
    return face_products(u, phi, degenerate_coefficient(a, b, z, INFINITE))


def flux_convergence(rungs, a: ScalarField, b: ScalarField, test_functions: Sequence[ScalarField] | None = None):
    """Cauchy differences of the flux pairing between consecutive rungs.

    ``rungs`` is a sequence of objects with ``n``, ``u``, ``z``.  Returns
    rows ``(mode, n_prev, n_next, value_prev, value_next, |difference|)``.
    """
    if len(rungs) < 2:
        raise ValueError("need at least two rungs")
    if test_functions is None:
        test_functions = sine_modes(rungs[0].u.grid)
    rows = []
    for m, phi in enumerate(test_functions, start=1):
        vals = [flux_pairing(r.u, r.z, a, b, phi) for r in rungs]
        for prev, nxt, vp, vn in zip(rungs[:-1], rungs[1:], vals[:-1], vals[1:]):
            rows.append((m, prev.n, nxt.n, vp, vn, abs(vn - vp)))
    return rows


def audit_rung(spec, u: ScalarField, z: ScalarField, kgrid_u=None, kgrid_z=None, context="") -> list[AuditRecord]:
    """Truncated L2, weighted gradient and W^{1,1} checks for both unknowns.

    The data are the *original* ``spec.f``, ``spec.F``.
    """
    kgrid_u = default_kgrid(u) if kgrid_u is None else kgrid_u
    kgrid_z = default_kgrid(z) if kgrid_z is None else kgrid_z
    f, F = spec.f, spec.F
    recs = []
    for k in kgrid_u:
        ctx = "%s k=%.6g" % (context, k)
        recs.append(audit_truncated_l2(u, f, k, "truncated_l2_u", ctx.strip()))
        recs.append(audit_weighted_gradient(u, z, f, spec.b, k, spec.alpha, "weighted_gradient_u", ctx.strip()))
    for k in kgrid_z:
        ctx = "%s k=%.6g" % (context, k)
        recs.append(audit_truncated_l2(z, F, k, "truncated_l2_z", ctx.strip()))
        recs.append(audit_weighted_gradient(z, u, F, spec.B, k, spec.alpha, "weighted_gradient_z", ctx.strip()))
    recs.append(audit_w11(u, f, spec.b, spec.alpha, "w11_u", context))
    recs.extend(audit_w11_second(z, F, f, spec.b, spec.B, spec.alpha, context))
    recs.append(audit_w11_chain(u, z, f, spec.b, spec.alpha, "w11_chain_u", context))
    recs.append(audit_w11_chain(z, u, F, spec.B, spec.alpha, "w11_chain_z", context))
    return recs


def audits_passed(records: Iterable[AuditRecord]) -> bool:
    return all(r.passed for r in records if not r.informational)


AUDIT_COLUMNS = ("name", "context", "lhs", "rhs", "tol", "margin", "verdict")


def audit_rows(records: Iterable[AuditRecord]):
    for r in records:
        verdict = r.verdict + (" (info)" if r.informational else "")
        yield (r.name, r.context, repr(r.lhs), repr(r.rhs), repr(r.tol), repr(r.margin), verdict)
