import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degensys.audit import (
    AUDIT_COLUMNS,
    BARRIER_TOL,
    ESTIMATE_TOL,
    audit_equiintegrability,
    audit_flux_l2,
    audit_linfty,
    audit_rows,
    audit_rung,
    audit_truncated_l2,
    audit_w11,
    audit_w11_second,
    audit_weighted_gradient,
    audits_passed,
    default_kgrid,
    equiintegrability_profile,
    flux_convergence,
    flux_pairing,
    gradient_equiintegrability_profile,
    inverse_weight,
    sine_modes,
)
from degensys.cases import build
from degensys.discretization import weighted_gradient_energy
from degensys.grid import Grid, ProblemSpec, ScalarField, l2_norm
from degensys.ladder import run_ladder
from degensys.solver import solve_truncated
from degensys.truncation import remainder_field

from oracles import newton_coupled
from specgen import random_spec


def test_linfty_examples():
    g = Grid.unit(5)
    rec = audit_linfty(g.zeros(), g.zeros())
    assert rec.passed and rec.lhs == rec.rhs == 0.0
    assert rec.tol == BARRIER_TOL
    f = g.sample(lambda x: np.sin(3 * x))
    assert not audit_linfty(f + g.constant(1.0), f).passed


def test_default_kgrid_sorted_nonnegative():
    g = Grid.unit(20)
    u = g.sample(lambda x: np.cos(9 * x) - 0.2)
    k = default_kgrid(u)
    assert k[0] == 0.0 and k == sorted(k) and len(k) == 4


def test_truncated_l2_above_sup_is_zero():
    g = Grid.unit(9)
    u = g.sample(lambda x: x * (1 - x))
    rec = audit_truncated_l2(u, g.constant(1.0), 1.0)
    assert rec.lhs == 0.0 and rec.passed


def solved_1d_instance():
    g = Grid.unit(9)
    spec = ProblemSpec.constant(
        g, a=g.sample(lambda x: 1 + x), b=g.sample(lambda x: 1 + x * x), f=g.sample(lambda x: 8 * np.sin(5 * x) + 3),
        alpha=1.0, beta=2.0, lam=1.0, gamma=2.0,
    )
    w, W = newton_coupled(spec)
    return spec, ScalarField(g, w), ScalarField(g, W)


def test_truncated_l2_on_oracle_solution_by_direct_summation():
    spec, u, z = solved_1d_instance()
    h = spec.grid.cell_volume
    k = float(np.median(np.abs(u.values)))
    rem = [s - (s if abs(s) <= k else math.copysign(k, s)) for s in u.values]
    lhs = math.sqrt(sum(r * r for r in rem) * h)
    rhs = math.sqrt(sum(fv * fv for s, fv in zip(u.values, spec.f.values) if abs(s) >= k) * h)
    rec = audit_truncated_l2(u, spec.f, k)
    assert rec.lhs == pytest.approx(lhs, rel=1e-13)
    assert rec.rhs == pytest.approx(rhs, rel=1e-13)
    assert rec.passed and rec.margin > 0


def test_truncated_l2_k0_is_l2_bound():
    spec, u, z = solved_1d_instance()
    rec = audit_truncated_l2(u, spec.f, 0.0)
    assert rec.lhs == pytest.approx(l2_norm(u), rel=1e-15)
    assert rec.rhs == pytest.approx(l2_norm(spec.f), rel=1e-15)
    assert rec.passed


def test_weighted_gradient_examples():
    g = Grid.unit(9)
    rec = audit_weighted_gradient(g.zeros(), g.zeros(), g.constant(1.0), g.constant(1.0), 0.0, 1.0)
    assert rec.lhs == 0.0 and rec.passed
    spec, u, z = solved_1d_instance()
    D = inverse_weight(spec.b, z)
    rem = remainder_field(u, 0.1)
    assert weighted_gradient_energy(rem, D * 2.0) == pytest.approx(2 * weighted_gradient_energy(rem, D), rel=1e-15)
    for k in default_kgrid(u):
        assert audit_weighted_gradient(u, z, spec.f, spec.b, k, spec.alpha).passed


def test_w11_examples():
    g = Grid.unit(9)
    rec = audit_w11(g.zeros(), g.zeros(), g.constant(1.0), 1.0)
    assert rec.lhs == rec.rhs == 0.0 and rec.passed
    spec, u, _ = solved_1d_instance()
    rec = audit_w11(u, spec.f, spec.b, spec.alpha)
    weaker = audit_w11(u, spec.f, spec.b, spec.alpha / 100)
    assert weaker.rhs == pytest.approx(10 * rec.rhs, rel=1e-14)
    assert rec.passed and weaker.passed


def test_w11_unit_square_regression():
    spec = build("unit-square-constant")
    rep = run_ladder(spec)
    rec = audit_w11(rep.top.u, spec.f, spec.b, spec.alpha)
    assert rec.lhs == pytest.approx(0.17237814539951046, rel=1e-6)
    assert rec.rhs == pytest.approx(1.93798828125, rel=1e-12)
    assert rec.passed


def test_second_variable_emits_both_constants():
    spec, u, z = solved_1d_instance()
    recs = audit_w11_second(z, spec.F, spec.f, spec.b, spec.B * 3.0, spec.alpha)
    assert [r.name for r in recs] == ["w11_z_mixed", "w11_z_own"]
    assert recs[0].lhs == recs[1].lhs
    assert recs[1].rhs > recs[0].rhs


def test_records_recomputable():
    spec, u, z = solved_1d_instance()
    recs = audit_rung(spec, u, z)
    for r in recs:
        assert r.margin == r.rhs * r.tol - r.lhs
        assert r.passed == (r.lhs <= r.rhs * r.tol)
        assert r.tol == ESTIMATE_TOL
    rows = list(audit_rows(recs))
    assert all(len(row) == len(AUDIT_COLUMNS) for row in rows)
    names = {r.name for r in recs}
    assert {"w11_chain_u", "w11_chain_z", "weighted_gradient_z", "truncated_l2_z"} <= names


@pytest.mark.parametrize("seed", range(6))
def test_audits_pass_on_random_instances(seed):
    rng = np.random.default_rng(40 + seed)
    g = Grid.unit(int(rng.integers(7, 40)), 1 + seed % 2)
    spec = random_spec(rng, g)
    rep = run_ladder(spec, (1, 8, 64))
    for r in rep.rungs:
        recs = audit_rung(spec, r.u, r.z)
        assert audits_passed(recs), [x for x in recs if not x.passed]


def test_equiintegrability_constant_and_full():
    g = Grid.unit(40, 2)
    c = 1.7
    (delta, mass), = equiintegrability_profile(g.constant(c), [0.1])
    # interior nodes cover N h^2 = (40/41)^2 of the square
    assert mass == pytest.approx(c * c * 160 * g.cell_volume, rel=1e-14)
    assert mass == pytest.approx(c * c * 0.1 * g.measure, rel=2 * 2 / 41)
    u = g.sample(lambda x, y: np.sin(4 * x) * y)
    assert equiintegrability_profile(u, [1.0])[0][1] == float(np.sum(u.values * u.values)) * g.cell_volume


@given(st.lists(st.floats(-1e3, 1e3), min_size=30, max_size=30), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_worst_case_set_beats_any_subset(vals, seed):
    g = Grid.unit(30)
    u = ScalarField(g, vals)
    fr = [0.05, 0.2, 0.5, 1.0]
    prof = [m for _, m in equiintegrability_profile(u, fr)]
    assert all(b >= a for a, b in zip(prof, prof[1:]))
    rng = np.random.default_rng(seed)
    for delta, m in zip(fr, prof):
        count = math.ceil(delta * 30 - 1e-12)
        pick = rng.choice(30, count, replace=False)
        assert np.sum(np.square(u.values[pick])) * g.cell_volume <= m * (1 + 1e-12)


def test_equiintegrability_rejects_bad_fraction():
    with pytest.raises(ValueError):
        equiintegrability_profile(Grid.unit(5).zeros(), [0.0])


def test_equiintegrability_audit_on_ladder():
    spec = build("unbounded-spike", Grid.unit(31, 2))
    for r in run_ladder(spec).rungs:
        assert audit_equiintegrability(r.u, spec.f, 0.01).passed


def test_gradient_profile_examples():
    g = Grid.unit(15, 2)
    one = g.constant(1.0)
    recs = gradient_equiintegrability_profile(g.zeros(), g.zeros(), one, one, 1.0, [0.1, 1.0])
    assert all(r.lhs == 0.0 for r in recs)
    spec = build("symmetric-variable", g)
    u, z, _ = solve_truncated(spec)
    fr = [0.01, 0.05, 0.25, 1.0]
    recs = gradient_equiintegrability_profile(u, z, spec.f, spec.b, spec.alpha, fr)
    lhs = [r.lhs for r in recs]
    assert all(b >= a for a, b in zip(lhs, lhs[1:]))
    assert all(r.passed for r in recs)
    # whole domain: the numerator is the W^{1,1} seminorm
    assert lhs[-1] == pytest.approx(audit_w11(u, spec.f, spec.b, spec.alpha).lhs, rel=1e-13)


def test_flux_zero_cases():
    g = Grid.unit(9, 2)
    spec = ProblemSpec.constant(g, f=0.0)
    rep = run_ladder(spec, (1, 2, 4))
    assert all(row[5] == 0.0 for row in flux_convergence(rep.rungs, spec.a, spec.b))
    u = g.sample(lambda x, y: x * y * (1 - x))
    assert flux_pairing(u, g.zeros(), spec.a, spec.b, g.zeros()) == 0.0
    with pytest.raises(ValueError):
        flux_convergence(rep.rungs[:1], spec.a, spec.b)


def test_flux_rows_shape():
    spec = build("unit-square-constant", Grid.unit(9, 2))
    rep = run_ladder(spec, (1, 2, 4))
    rows = flux_convergence(rep.rungs, spec.a, spec.b)
    assert [(r[0], r[1], r[2]) for r in rows[:2]] == [(1, 1, 2), (1, 2, 4)]
    assert len(rows) == 3 * 2


def test_flux_cauchy_small_for_large_bounded_rungs():
    spec = build("unit-square-constant", Grid.unit(31, 2))
    rep = run_ladder(spec, (2**18, 2**19, 2**20))
    modes = sine_modes(spec.grid)
    for row in flux_convergence(rep.rungs, spec.a, spec.b, modes):
        if row[2] == 2**20:
            assert row[5] <= 1e-6 * l2_norm(modes[row[0] - 1])


def test_flux_l2_bound_and_informational_variant():
    spec = build("symmetric-variable", Grid.unit(31, 2))
    u, z, _ = solve_truncated(spec)
    recs = audit_flux_l2(u, z, spec.a, spec.b, spec.f, spec.alpha, spec.beta, spec.lam)
    assert recs[0].name == "flux_l2" and recs[0].passed
    assert recs[1].informational
    failing = [recs[0].__class__("x", 2.0, 1.0, 1.05, informational=True)]
    assert audits_passed(failing)
