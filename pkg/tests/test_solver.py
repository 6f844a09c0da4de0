import numpy as np
import pytest

from degensys.grid import Grid, ProblemSpec, linf_norm
from degensys.solver import (
    FixedPointConfig,
    PicardNonConvergence,
    auto_levels,
    barrier_levels,
    residuals,
    solve_truncated,
)
from degensys.truncation import INFINITE

from oracles import newton_coupled
from specgen import random_spec


def test_config_invariants():
    with pytest.raises(ValueError):
        FixedPointConfig(tol=0.0)
    for theta in (0.0, 1.5):
        with pytest.raises(ValueError):
            FixedPointConfig(theta=theta)


def test_auto_levels_examples():
    g = Grid.unit(5)
    assert auto_levels(g.constant(5.0), g.constant(3.0)) == (5.0, 3.0)
    assert auto_levels(g.zeros(), g.constant(1.0))[0] == 0.0
    spike = np.zeros(5)
    spike[2] = -2.5
    assert auto_levels(g.sample(lambda x: spike), g.zeros())[0] == 2.5
    assert barrier_levels(g.constant(5.0), g.constant(3.0)) == (3.0, 5.0)


def test_zero_data_one_iteration():
    spec = ProblemSpec.constant(Grid.unit(7, 2), f=0.0)
    w, W, rep = solve_truncated(spec, *auto_levels(spec.f, spec.F))
    assert rep.iterations == 1
    assert np.all(w.values == 0) and np.all(W.values == 0)


def test_symmetric_data_gives_equal_components():
    g = Grid((9, 7), (1.0, 1.0))
    spec = ProblemSpec.constant(g, a=2.0, b=0.5, f=g.sample(lambda x, y: 10 * np.sin(7 * x) * y))
    w, W, _ = solve_truncated(spec)
    assert np.max(np.abs(w.values - W.values)) <= 1e-7


def test_swap_symmetry():
    rng = np.random.default_rng(5)
    spec = random_spec(rng, Grid((8, 6), (1.0, 1.5)))
    # both orderings update w first, so the iterates differ; the fixed points agree
    w, W, _ = solve_truncated(spec, 3.0, 7.0)
    w2, W2, _ = solve_truncated(spec.swapped(), 7.0, 3.0)
    assert np.max(np.abs(w.values - W2.values)) <= 1e-7
    assert np.max(np.abs(W.values - w2.values)) <= 1e-7


def test_constant_case_matches_newton():
    g = Grid.unit(9)
    spec = ProblemSpec.constant(g, a=1.0, b=1.0, f=1.0)
    w, W, _ = solve_truncated(spec, cfg=FixedPointConfig(tol=1e-12, linear_tol=1e-13))
    nw, nW = newton_coupled(spec)
    assert np.max(np.abs(w.values - nw)) <= 1e-8
    assert np.max(np.abs(W.values - nW)) <= 1e-8


@pytest.mark.parametrize("seed", range(8))
def test_random_instances_match_newton_with_levels(seed):
    rng = np.random.default_rng(100 + seed)
    spec = random_spec(rng, Grid.unit(int(rng.integers(3, 17))))
    rho, sigma = auto_levels(spec.f, spec.F)
    w, W, _ = solve_truncated(spec, rho, sigma, FixedPointConfig(tol=1e-12, linear_tol=1e-13))
    nw, nW = newton_coupled(spec, rho, sigma)
    assert max(np.max(np.abs(w.values - nw)), np.max(np.abs(W.values - nW))) <= 1e-7


@pytest.mark.parametrize("seed", range(10))
def test_linf_barrier(seed):
    rng = np.random.default_rng(seed)
    g = Grid.unit(int(rng.integers(3, 30)), int(rng.integers(1, 3)))
    spec = random_spec(rng, g, data_scale=50.0)
    w, W, rep = solve_truncated(spec, *barrier_levels(spec.f, spec.F))
    assert linf_norm(w) <= linf_norm(spec.f) * (1 + 1e-8)
    assert linf_norm(W) <= linf_norm(spec.F) * (1 + 1e-8)
    assert all(a.passed for a in rep.audits)


def test_truncation_inactive_when_level_exceeds_solution():
    rng = np.random.default_rng(9)
    spec = random_spec(rng, Grid((10, 10), (1.0, 1.0)))
    rho, sigma = barrier_levels(spec.f, spec.F)
    w, W, _ = solve_truncated(spec, rho, sigma)
    assert rho >= linf_norm(W) and sigma >= linf_norm(w)
    w2, W2, _ = solve_truncated(spec, INFINITE, INFINITE)
    assert np.max(np.abs(w.values - w2.values)) <= 1e-8
    assert np.max(np.abs(W.values - W2.values)) <= 1e-8


def test_residual_examples():
    g = Grid.unit(9)
    spec = ProblemSpec.constant(g, f=1.0)
    assert residuals(spec, g.zeros(), g.zeros())[0] == pytest.approx(1.0, rel=1e-15)
    cfg = FixedPointConfig()
    w, W, _ = solve_truncated(spec, cfg=cfg)
    r1, r2 = residuals(spec, w, W)
    # the fixed point is only reached to cfg.tol in successive differences
    assert max(r1, r2) <= 10 * cfg.tol
    bumped = w.values.copy()
    bumped[4] += 1.0
    assert residuals(spec, w.with_values(bumped), W)[0] > r1


def test_zero_datum_gives_absolute_residual():
    g = Grid.unit(5)
    spec = ProblemSpec.constant(g, f=0.0)
    assert residuals(spec, g.constant(0.0), g.zeros()) == (0.0, 0.0)
    assert residuals(spec, g.constant(1.0), g.zeros())[0] > 0


def test_nonconvergence_after_three_halvings():
    spec = ProblemSpec.constant(Grid.unit(15), f=30.0)
    cfg = FixedPointConfig(tol=1e-300, max_iter=4)
    with pytest.raises(PicardNonConvergence) as info:
        solve_truncated(spec, cfg=cfg)
    err = info.value
    assert err.halvings >= 3
    assert len(err.differences) >= cfg.max_iter
    assert "did not converge" in str(err)


def test_invalid_spec_rejected():
    g = Grid.unit(4)
    spec = ProblemSpec.constant(g, a=0.5, f=1.0, alpha=1.0, beta=1.0, lam=1.0, gamma=1.0)
    with pytest.raises(ValueError, match="structural"):
        solve_truncated(spec)


def test_warm_start_reaches_same_fixed_point():
    rng = np.random.default_rng(4)
    spec = random_spec(rng, Grid((12, 9), (1.0, 1.0)))
    w, W, _ = solve_truncated(spec)
    w2, W2, rep = solve_truncated(spec, initial=(w * 0.5, W * 0.5))
    assert np.max(np.abs(w.values - w2.values)) <= 1e-7
