import io

import numpy as np
import pytest

from admm_lasso_inf import (
    AdmmOptions, AdmmState, InnerOptions, adapt_penalty, initial_state, lasso_objective, residuals,
    smooth_part, solve_lasso_inf, top_eigenvalue, with_trace, x_update,
)
from calibration import oracle_parameters
from conftest import small_instances
from constrained_l1 import preset
from measurement_model import DimensionError, partition, system_from_arrays
from oracles import reference_solve


def test_separable_identity_problem():
    # identity sensing: soft thresholding clipped to the consistency box
    system = system_from_arrays(np.eye(3), [1.0, -2.0, 0.2], Delta=1.0)
    report = solve_lasso_inf(system, 0.3)
    assert report.converged
    np.testing.assert_allclose(report.x_hat, [0.7, -1.7, 0.0], atol=1e-4)

    report = solve_lasso_inf(system, 0.8)
    assert report.converged
    np.testing.assert_allclose(report.x_hat, [0.5, -1.5, 0.0], atol=1e-4)
    assert report.linf_violation <= 1e-6


def test_saturation_constraint_binds():
    # unconstrained minimiser 0.9 violates x >= G - Delta = 1
    system = system_from_arrays([[1.0]], [0.9], Delta=1.0, G=2.0, Phi_bar_plus=[[1.0]])
    report = solve_lasso_inf(system, 0.0)
    assert report.converged
    np.testing.assert_allclose(report.x_hat, [1.0], atol=1e-4)
    assert report.saturation_violation <= 1e-6


def test_matches_reference_solver():
    for instance in small_instances(10):
        system = partition(instance)
        lam = oracle_parameters(system, instance.x_star).lam
        report = solve_lasso_inf(system, lam)
        assert report.converged
        assert report.max_violation <= 1e-6
        _, reference = reference_solve(system, preset('LassoInf', {'lambda': lam}), instance.x_star)
        assert report.objective == pytest.approx(reference, rel=1e-3, abs=1e-9)


@pytest.mark.slow
def test_matches_reference_solver_fifty_instances():
    for instance in small_instances(50, first_seed=100):
        system = partition(instance)
        lam = oracle_parameters(system, instance.x_star).lam
        report = solve_lasso_inf(system, lam)
        _, reference = reference_solve(system, preset('LassoInf', {'lambda': lam}), instance.x_star)
        assert report.objective == pytest.approx(reference, rel=1e-4, abs=1e-9)


def test_objective_not_above_true_signal(system, instance):
    lam = oracle_parameters(system, instance.x_star).lam
    report = solve_lasso_inf(system, lam)
    assert report.objective <= lasso_objective(system, instance.x_star, lam) * (1 + 1e-4) + 1e-9


def test_report_fields(system):
    report = solve_lasso_inf(system, 0.5)
    assert report.model == 'LassoInf'
    assert report.iterations >= 1
    assert report.inner_iterations >= report.iterations
    assert report.wall_ms >= 0.0
    assert set(report.feasibility) == {'linf', 'saturation'}
    document = report.to_dict()
    assert len(document['x_hat']) == system.N


def test_trace_writes_one_row_per_iteration(system):
    handle = io.StringIO()
    report = solve_lasso_inf(system, 0.5, with_trace(AdmmOptions(), handle))
    lines = handle.getvalue().strip().splitlines()
    assert lines[0] == 'iteration,theta,r_norm,d_norm,objective'
    assert len(lines) == report.iterations + 1


def test_iteration_cap_reports_non_convergence(system):
    report = solve_lasso_inf(system, 0.0, AdmmOptions(max_outer=1))
    assert report.iterations == 1
    assert not report.converged


def test_invalid_inputs(system):
    with pytest.raises(ValueError):
        solve_lasso_inf(system, -1.0)
    with pytest.raises(DimensionError):
        solve_lasso_inf(system, 0.5, x0=np.zeros(system.N + 1))
    empty = system_from_arrays(np.zeros((0, 3)), [], Delta=1.0, Phi_bar_plus=np.ones((1, 3)))
    with pytest.raises(ValueError):
        solve_lasso_inf(empty, 0.5)


@pytest.mark.parametrize('kwargs', [{'theta0': 0.0}, {'mu': 1.0}, {'tau': 0.5}, {'tol_abs': 0.0}, {'max_outer': 0}])
def test_invalid_options(kwargs):
    with pytest.raises(ValueError):
        AdmmOptions(**kwargs)


def test_options_from_dict():
    options = AdmmOptions.from_dict({'mu': 5.0, 'inner': {'max_iter': 50}})
    assert options.mu == 5.0
    assert options.inner.max_iter == 50
    assert AdmmOptions.from_dict(options.to_dict()) == options


def test_adapt_penalty():
    assert adapt_penalty(1.0, 100.0, 1.0, 10.0, 2.0) == 2.0
    assert adapt_penalty(1.0, 1.0, 100.0, 10.0, 2.0) == 0.5
    assert adapt_penalty(1.0, 5.0, 1.0, 10.0, 2.0) == 1.0


def test_top_eigenvalue():
    A = np.diag([3.0, 1.0, 0.5])
    assert top_eigenvalue(A) == pytest.approx(9.0, rel=1e-8)
    assert top_eigenvalue(np.zeros((0, 3))) == 0.0
    B = np.random.default_rng(4).standard_normal((30, 10))
    assert top_eigenvalue(B, 500) == pytest.approx(np.linalg.norm(B, 2) ** 2, rel=1e-6)


def test_x_update_and_residual_shapes(system):
    state = initial_state(system, 1.0)
    state.u = np.zeros(system.M_tilde)
    state.v = np.zeros(system.M_bar)
    x = x_update(state, system, 0.5, InnerOptions(max_iter=200))
    assert x.shape == (system.N,)
    state.x = x
    r, d = residuals(state, system)
    assert r.shape == (system.M_tilde + system.M_bar,)
    assert d.shape == r.shape


def perturbed_state(system, theta, seed):
    rng = np.random.default_rng(seed)
    state = initial_state(system, theta, x0=rng.standard_normal(system.N))
    state.u = rng.standard_normal(system.M_tilde) * 0.3
    state.v = rng.uniform(size=system.M_bar)
    state.alpha = rng.standard_normal(system.M_tilde)
    state.beta = rng.standard_normal(system.M_bar)
    return state


def test_x_update_least_squares_limit():
    # lambda = 0 and theta -> 0 leave only 1/2 ||Phi x - y||^2
    rng = np.random.default_rng(8)
    Phi = rng.standard_normal((30, 5))
    y = rng.standard_normal(30)
    system = system_from_arrays(Phi, y, Delta=1.0)
    state = initial_state(system, 1e-9)
    x = x_update(state, system, 0.0, InnerOptions(max_iter=5000, tol=1e-12))
    np.testing.assert_allclose(x, np.linalg.lstsq(Phi, y, rcond=None)[0], atol=1e-6)


def test_smooth_gradient_matches_finite_differences(system):
    state = perturbed_state(system, 0.7, seed=9)
    smooth = smooth_part(state, system)
    x = np.random.default_rng(10).standard_normal(system.N)
    _, gradient = smooth(x)
    h = 1e-5
    numeric = np.array([(smooth(x + h * e)[0] - smooth(x - h * e)[0]) / (2 * h) for e in np.eye(system.N)])
    np.testing.assert_allclose(gradient, numeric, rtol=1e-5, atol=1e-5)


def test_x_update_objective_never_increases(system):
    state = perturbed_state(system, 0.8, seed=11)
    lam = 0.3
    smooth = smooth_part(state, system)

    def objective(x):
        return smooth(x)[0] + lam * system.Delta * np.abs(x).sum()

    # the inner solver is deterministic, so max_iter=k replays the first k steps
    values = [objective(state.x)]
    values += [objective(x_update(state, system, lam, InnerOptions(max_iter=k))) for k in range(1, 30)]
    for before, after in zip(values, values[1:]):
        assert after <= before + 1e-12 * max(1.0, abs(before))
    assert values[-1] < values[0]


def test_x_update_checks_dimensions(system):
    state = initial_state(system, 1.0)
    state.alpha = np.zeros(system.M_tilde + 1)
    with pytest.raises(DimensionError):
        x_update(state, system, 0.5)


def test_state_round_trip(system):
    state = initial_state(system, 2.0, x0=np.ones(system.N))
    restored = AdmmState.from_dict(state.to_dict())
    assert restored.theta == 2.0
    np.testing.assert_array_equal(restored.x, state.x)
    np.testing.assert_array_equal(restored.u, state.u)
