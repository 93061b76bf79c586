import math

import numpy as np
import pytest

from analysis import f_max
from calibration import (
    CalibrationMethod, CalibrationResult, admits, calibrate, epsilon_empirical, lambda_empirical,
    lambda_hoeffding, oracle_parameters,
)
from measurement_model import QuantizerConfig, generate_instance, partition


def test_epsilon_quantile_single_row():
    # ||xi|| / Delta is uniform on [0, 1/2] for one unit-interval row
    epsilon = epsilon_empirical(0.1, 1.0, 1, n_samples=20_000, seed=3)
    assert epsilon == pytest.approx(0.45, abs=0.01)


def test_epsilon_shrinks_as_pi_grows():
    loose = epsilon_empirical(0.01, 1.0, 50, n_samples=5000, seed=1)
    median = epsilon_empirical(0.5, 1.0, 50, n_samples=5000, seed=1)
    tight = epsilon_empirical(0.99, 1.0, 50, n_samples=5000, seed=1)
    assert tight < median < loose
    # ||xi|| concentrates around sqrt(M/12)
    assert median == pytest.approx(math.sqrt(50 / 12), rel=0.05)


def test_results_independent_of_thread_count():
    Phi = np.random.default_rng(0).standard_normal((20, 30))
    single = lambda_empirical(0.05, 0.5, Phi, n_samples=5000, seed=9, threads=1)
    pooled = lambda_empirical(0.05, 0.5, Phi, n_samples=5000, seed=9, threads=4)
    assert single == pooled
    assert epsilon_empirical(0.05, 0.5, 20, 5000, 9, 1) == epsilon_empirical(0.05, 0.5, 20, 5000, 9, 3)


def test_lambda_scales_with_matrix():
    Phi = np.random.default_rng(2).standard_normal((15, 10))
    base = lambda_empirical(0.05, 1.0, Phi, n_samples=4000, seed=5)
    scaled = lambda_empirical(0.05, 1.0, 2.0 * Phi, n_samples=4000, seed=5)
    assert scaled == pytest.approx(2.0 * base, rel=1e-12)


@pytest.mark.parametrize('pi', [0.0, 1.0, -0.1, 1.5])
def test_invalid_pi(pi):
    with pytest.raises(ValueError):
        epsilon_empirical(pi, 1.0, 5, n_samples=2000)
    with pytest.raises(ValueError):
        lambda_hoeffding(pi, 10, 1.0)


def test_too_few_samples():
    with pytest.raises(ValueError):
        epsilon_empirical(0.05, 1.0, 5, n_samples=999)
    with pytest.raises(ValueError):
        lambda_empirical(0.05, 1.0, np.eye(3), n_samples=10)


def test_hoeffding_formula():
    assert lambda_hoeffding(0.05, 200, 1.0) == pytest.approx(math.sqrt(2 * math.log(8000)))
    assert lambda_hoeffding(0.05, 200, 3.0) == pytest.approx(3 * math.sqrt(2 * math.log(8000)))


def test_hoeffding_coverage():
    rng = np.random.default_rng(11)
    Phi_tilde = rng.standard_normal((150, 200))
    Delta, pi = 0.25, 0.05
    lam = lambda_hoeffding(pi, 200, f_max(Phi_tilde))
    xi = rng.uniform(-Delta / 2, Delta / 2, size=(1000, 150))
    covered = np.max(np.abs(xi @ Phi_tilde), axis=1) <= lam * Delta / 2
    assert covered.mean() >= 0.92


def test_oracle_admits_true_signal(system, instance):
    result = oracle_parameters(system, instance.x_star)
    assert result.method is CalibrationMethod.ORACLE
    assert result.confidence == 1.0
    assert admits(system, instance.x_star, result, tol=1e-12)
    tighter = CalibrationResult(result.epsilon * 0.5, result.lam * 0.5, CalibrationMethod.EMPIRICAL, 0.9, 1000)
    if result.epsilon > 0:
        assert not admits(system, instance.x_star, tighter)


def test_calibrate_dispatch(system, instance):
    assert calibrate(system, 'empirical', 1.0, x_star=instance.x_star).method is CalibrationMethod.ORACLE
    with pytest.raises(ValueError):
        calibrate(system, 'oracle')
    empirical = calibrate(system, 'empirical', 0.9, n_samples=2000, seed=4)
    assert empirical.method is CalibrationMethod.EMPIRICAL
    assert empirical.samples == 2000
    hoeffding = calibrate(system, 'hoeffding', 0.9, n_samples=2000, seed=4)
    assert hoeffding.epsilon == empirical.epsilon
    assert hoeffding.lam == pytest.approx(lambda_hoeffding(0.1, system.N, f_max(system.Phi_tilde)))
    with pytest.raises(ValueError):
        calibrate(system, 'bayes', 0.9)


def test_result_document():
    result = CalibrationResult(1.5, 2.5, CalibrationMethod.HOEFFDING, 0.95, 1000)
    document = result.to_dict()
    assert document['lambda'] == 2.5
    assert document['method'] == 'hoeffding'
    assert CalibrationResult.from_dict(document) == result
    assert result.params == {'epsilon': 1.5, 'lambda': 2.5}
    with pytest.raises(ValueError):
        CalibrationResult(-1.0, 1.0, CalibrationMethod.EMPIRICAL, 0.9, 1000)


@pytest.mark.slow
def test_empirical_parameters_admit_fresh_instances():
    pi = 0.1
    cfg = QuantizerConfig(4, 0.4)
    trials = 500
    admitted = 0
    for seed in range(trials):
        instance = generate_instance(60, 40, 3, 10.0, cfg, seed=seed)
        system = partition(instance)
        result = calibrate(system, 'empirical', 1 - pi, n_samples=5000, seed=seed)
        admitted += admits(system, instance.x_star, result)
    # both the l2 and the Dantzig event must hold
    assert admitted / trials >= 1 - 2 * pi - 0.03
