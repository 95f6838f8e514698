import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gibbs_bounds import DomainError
from gibbs_bounds.bounds import (
    BoundContext,
    EnsembleSpec,
    Schedule,
    closed_form_schedule,
    ensemble_uniform_epsilon,
    epsilon_hat,
    telescoping_epsilon,
)
from gibbs_bounds.telescope import (
    EnumerationCapError,
    OptimizerGrid,
    brute_force_optimize,
    build_value_table,
    geometric_j_candidates,
    optimize_schedule,
)


def test_zero_only_grid_forces_uniform():
    ctx, ens = BoundContext(50, 100, 0.1), EnsembleSpec(10)
    sched, res = optimize_schedule(ctx, ens, OptimizerGrid(2, 0.01, (0,)))
    assert sched.j_values == (0.0, 0.0)
    assert sched.delta_values[0] == pytest.approx(0.1)
    assert res.epsilon == epsilon_hat(ctx, 0, sched.delta_values[0])
    assert res.epsilon == pytest.approx(epsilon_hat(ctx, 0, 0.1), rel=1e-12)


def test_reference_configuration_matches_brute_force():
    ctx, ens = BoundContext(50, 100, 0.1), EnsembleSpec(10)
    grid = OptimizerGrid(2, 0.01)
    dp_sched, dp = optimize_schedule(ctx, ens, grid)
    bf_sched, bf = brute_force_optimize(ctx, ens, grid)
    assert dp.epsilon == bf.epsilon
    assert dp_sched == bf_sched


def test_single_candidate_grid():
    ctx, ens = BoundContext(50, 100, 0.02), EnsembleSpec(10)
    grid = OptimizerGrid(1, 0.01, (3,))
    sched, res = brute_force_optimize(ctx, ens, grid)
    assert sched.j_values == (3.0,)
    # two delta units, spent where they help most
    assert sum(sched.delta_values) == pytest.approx(0.02)
    assert optimize_schedule(ctx, ens, grid)[1].epsilon == res.epsilon


def test_beats_closed_form_schedule_on_its_grid():
    ctx, ens = BoundContext(1000, 500, 0.05), EnsembleSpec(100)
    closed = closed_form_schedule(ctx, ens, 3)
    inc = 1e-3
    units = [int(d / inc) for d in closed.delta_values]
    units[-1] = round(0.05 / inc) - sum(units[:-1])
    on_grid = Schedule(closed.j_values, tuple(k * inc for k in units))
    grid = OptimizerGrid(closed.t, inc, geometric_j_candidates(100, 3, closed.t))
    _, res = optimize_schedule(ctx, ens, grid)
    assert res.epsilon <= telescoping_epsilon(ctx, ens, on_grid).epsilon


def test_dominates_ensemble_uniform():
    ctx, ens = BoundContext(10**5, 300, 0.05), EnsembleSpec(40)
    _, res = optimize_schedule(ctx, ens, OptimizerGrid(2, 0.005))
    assert res.epsilon <= ensemble_uniform_epsilon(ctx, ens).epsilon


def test_monotone_improvement():
    # power-of-two increments keep the coarse delta points exactly on the fine grid
    ctx, ens = BoundContext(200, 80, 0.25), EnsembleSpec(12)
    coarse = optimize_schedule(ctx, ens, OptimizerGrid(2, 1 / 32, (0, 2, 4)))[1].epsilon
    finer = optimize_schedule(ctx, ens, OptimizerGrid(2, 1 / 128, (0, 2, 4)))[1].epsilon
    richer = optimize_schedule(ctx, ens, OptimizerGrid(2, 1 / 128, (0, 1, 2, 3, 4, 6)))[1].epsilon
    assert finer <= coarse
    assert richer <= finer


def test_value_table_invariants():
    ctx, ens = BoundContext(300, 60, 0.1), EnsembleSpec(8)
    table = build_value_table(ctx, ens, OptimizerGrid(3, 0.005))
    for i, values in table.values.items():
        assert np.all(values >= 0.0)
        assert np.all(values <= 1.0 + table.t)
        assert np.all(np.diff(values, axis=1) <= 0.0)


@pytest.mark.parametrize(
    "grid, exc",
    [
        (lambda: OptimizerGrid(0), DomainError),
        (lambda: OptimizerGrid(1, 0.01, ()), DomainError),
        (lambda: OptimizerGrid(1, 0.01, (1, 1)), DomainError),
        (lambda: OptimizerGrid(1, -0.01), DomainError),
    ],
)
def test_grid_validation(grid, exc):
    with pytest.raises(exc):
        grid()


def test_resolve_errors():
    ctx, ens = BoundContext(50, 100, 0.1), EnsembleSpec(10)
    with pytest.raises(DomainError):
        optimize_schedule(ctx, ens, OptimizerGrid(1, 0.2))
    with pytest.raises(DomainError):
        optimize_schedule(ctx, ens, OptimizerGrid(1, 0.01, (0, 11)))


def test_infeasible_candidates():
    ctx, ens = BoundContext(50, 100, 0.1), EnsembleSpec(5)
    grid = OptimizerGrid(2, 0.01, (3, 4))
    with pytest.raises(DomainError):
        optimize_schedule(ctx, ens, grid)
    with pytest.raises(DomainError):
        brute_force_optimize(ctx, ens, grid)


def test_cap():
    ctx, ens = BoundContext(50, 100, 0.1), EnsembleSpec(10)
    with pytest.raises(EnumerationCapError):
        brute_force_optimize(ctx, ens, OptimizerGrid(3, 0.001), cap=1000)


@settings(max_examples=25, deadline=None)
@given(
    m=st.integers(1, 10**4),
    n=st.integers(1, 2000),
    s_frac=st.floats(0.0, 1.0),
    delta_units=st.integers(1, 12),
    t=st.integers(1, 2),
    fractional=st.booleans(),
)
def test_dp_equals_exhaustive(m, n, s_frac, delta_units, t, fractional):
    s = max(1, min(8, round(s_frac * m)))
    delta = delta_units * 0.01
    ctx, ens = BoundContext(m, n, delta), EnsembleSpec(s)
    cands = geometric_j_candidates(s, 1.0, 4) if fractional else None
    grid = OptimizerGrid(t, 0.01, cands)
    dp_sched, dp = optimize_schedule(ctx, ens, grid)
    bf_sched, bf = brute_force_optimize(ctx, ens, grid)
    assert dp.epsilon_raw == bf.epsilon_raw
    assert dp_sched == bf_sched
    assert dp_sched.total_j <= s
    assert dp_sched.total_delta <= delta * (1 + 1e-12)
