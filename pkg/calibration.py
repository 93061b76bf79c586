"""
Choice of epsilon (l2 constraint) and lambda (lasso weight / Dantzig bound) so
that the true signal is admitted with a target confidence P = 1 - pi.
"""

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

import config
from analysis import f_max
from measurement_model import derive_seed

logger = logging.getLogger(__name__)


class CalibrationMethod(enum.Enum):
    EMPIRICAL = 'empirical'
    HOEFFDING = 'hoeffding'
    ORACLE = 'oracle'


@dataclass(frozen=True)
class CalibrationResult:
    epsilon: float
    lam: float
    method: CalibrationMethod
    confidence: float
    samples: int

    def __post_init__(self):
        if self.epsilon < 0 or self.lam < 0:
            raise ValueError("epsilon and lambda must be nonnegative")
        if self.method is CalibrationMethod.ORACLE and self.confidence != 1.0:
            raise ValueError("Oracle calibration always has confidence 1")

    @property
    def params(self):
        return {'epsilon': self.epsilon, 'lambda': self.lam}

    def to_dict(self):
        return {
            'epsilon': self.epsilon,
            'lambda': self.lam,
            'method': self.method.value,
            'confidence': self.confidence,
            'samples': self.samples,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            epsilon=float(data['epsilon']),
            lam=float(data['lambda']),
            method=CalibrationMethod(data['method']),
            confidence=float(data['confidence']),
            samples=int(data['samples']),
        )


def _check_pi(pi):
    if not 0 < pi < 1:
        raise ValueError(f"pi must lie in (0, 1), got {pi}")


def _upper_quantile(values, pi):
    """Order statistic at index ceil((1 - pi) * n), 1-based."""
    ordered = np.sort(values)
    index = min(max(math.ceil((1 - pi) * ordered.size), 1), ordered.size)
    return float(ordered[index - 1])


def _sample_statistic(statistic, n_samples, rows, Delta, seed, threads=1):
    """
    Draw n_samples uniform error vectors in fixed-size blocks, each block with
    its own derived seed, so the sample set is independent of the thread count.
    """
    block = config.CALIBRATION_BLOCK
    n_blocks = math.ceil(n_samples / block)

    def run_block(index):
        size = min(block, n_samples - index * block)
        rng = np.random.default_rng(derive_seed(seed, index))
        xi = rng.uniform(-Delta / 2, Delta / 2, size=(size, rows))
        return statistic(xi)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run_block, range(n_blocks)))
    else:
        parts = [run_block(index) for index in range(n_blocks)]
    return np.concatenate(parts)


def epsilon_empirical(pi, Delta, M_tilde, n_samples=config.CALIBRATION_SAMPLES, seed=0, threads=1):
    _check_pi(pi)
    if n_samples < 1000:
        raise ValueError(f"n_samples must be at least 1000, got {n_samples}")
    values = _sample_statistic(lambda xi: np.linalg.norm(xi, axis=1) / Delta,
                               n_samples, M_tilde, Delta, seed, threads)
    return _upper_quantile(values, pi)


def lambda_empirical(pi, Delta, Phi_tilde, n_samples=config.CALIBRATION_SAMPLES, seed=0, threads=1):
    _check_pi(pi)
    if n_samples < 1000:
        raise ValueError(f"n_samples must be at least 1000, got {n_samples}")
    Phi_tilde = np.asarray(Phi_tilde, dtype=float)

    def statistic(xi):
        return 2 * np.max(np.abs(xi @ Phi_tilde), axis=1) / Delta

    values = _sample_statistic(statistic, n_samples, Phi_tilde.shape[0], Delta, seed, threads)
    return _upper_quantile(values, pi)


def lambda_hoeffding(pi, N, f_max_value):
    """sqrt(2 log(2N/pi)) * f_max: admits x* with probability at least 1 - pi."""
    _check_pi(pi)
    return math.sqrt(2 * math.log(2 * N / pi)) * f_max_value


def oracle_parameters(system, x_star):
    residual = system.Phi_tilde @ np.asarray(x_star, dtype=float) - system.y_tilde
    epsilon = float(np.linalg.norm(residual)) / system.Delta
    correlation = system.Phi_tilde.T @ residual
    lam = 2 * float(np.max(np.abs(correlation), initial=0.0)) / system.Delta
    return CalibrationResult(epsilon=epsilon, lam=lam, method=CalibrationMethod.ORACLE,
                             confidence=1.0, samples=0)


def calibrate(system, method='empirical', confidence=0.95, x_star=None,
              n_samples=config.CALIBRATION_SAMPLES, seed=0, threads=1):
    """
    Calibrate (epsilon, lambda) for a partitioned system.

    Confidence 1 always routes to the oracle setting, which needs x_star.
    The Hoeffding method supplies lambda only; epsilon still comes from the
    empirical quantile.
    """
    method = CalibrationMethod(method)
    if confidence >= 1.0 or method is CalibrationMethod.ORACLE:
        if x_star is None:
            raise ValueError("Oracle calibration needs the true signal")
        return oracle_parameters(system, x_star)

    pi = 1.0 - confidence
    epsilon = epsilon_empirical(pi, system.Delta, system.M_tilde, n_samples, seed, threads)
    if method is CalibrationMethod.HOEFFDING:
        lam = lambda_hoeffding(pi, system.N, f_max(system.Phi_tilde))
    else:
        lam = lambda_empirical(pi, system.Delta, system.Phi_tilde, n_samples, derive_seed(seed, 1), threads)
    logger.debug("Calibrated %s at P=%.4g: epsilon=%.6g lambda=%.6g", method.value, confidence, epsilon, lam)
    return CalibrationResult(epsilon=epsilon, lam=lam, method=method, confidence=confidence, samples=n_samples)


def admits(system, x_star, result, tol=0.0):
    """Whether x* satisfies ||Phi~ x* - y~|| <= eps*Delta and the Dantzig bound."""
    residual = system.Phi_tilde @ np.asarray(x_star, dtype=float) - system.y_tilde
    l2_ok = np.linalg.norm(residual) <= result.epsilon * system.Delta + tol
    correlation = np.max(np.abs(system.Phi_tilde.T @ residual), initial=0.0)
    return bool(l2_ok and correlation <= result.lam * system.Delta / 2 + tol)
