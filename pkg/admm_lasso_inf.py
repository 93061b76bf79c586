"""
ADMM for the LASSO-infinity model

    min 1/2 ||Phi~ x - y~||^2 + lambda * Delta * ||x||_1
    s.t. ||Phi~ x - y~||_inf <= Delta/2,  Phi_bar x >= y_bar

with auxiliary variables u = Phi~ x - y~ and v = Phi_bar x - y_bar, unscaled
multipliers alpha and beta, and an adaptive penalty theta. The x-update is a
LASSO subproblem solved by monotone FISTA with restart.
"""

import csv
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

import config
from measurement_model import DimensionError
from prox_ops import project_linf_ball, project_nonneg, soft_threshold

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class InnerOptions:
    max_iter: int = config.INNER_MAX_ITER
    tol: float = config.INNER_TOL
    power_iterations: int = config.POWER_ITERATIONS
    inflation: float = config.LIPSCHITZ_INFLATION

    def __post_init__(self):
        if self.max_iter < 1 or self.tol <= 0 or self.power_iterations < 1 or self.inflation < 1:
            raise ValueError("Invalid inner solver options")

    def to_dict(self):
        return {
            'max_iter': self.max_iter,
            'tol': self.tol,
            'power_iterations': self.power_iterations,
            'inflation': self.inflation,
        }


@dataclass(frozen=True)
class AdmmOptions:
    theta0: float = config.ADMM_THETA0
    mu: float = config.ADMM_MU
    tau: float = config.ADMM_TAU
    max_outer: int = config.ADMM_MAX_OUTER
    tol_abs: float = config.ADMM_TOL_ABS
    tol_rel: float = config.ADMM_TOL_REL
    # None keeps each solver's own default; 0 holds theta0 fixed
    adapt_iterations: Optional[int] = None
    inner: InnerOptions = field(default_factory=InnerOptions)
    trace: Optional[Callable] = None

    def __post_init__(self):
        if self.theta0 <= 0:
            raise ValueError(f"theta0 must be positive, got {self.theta0}")
        if self.mu <= 1 or self.tau <= 1:
            raise ValueError(f"mu and tau must exceed 1, got mu={self.mu}, tau={self.tau}")
        if self.tol_abs <= 0 or self.tol_rel <= 0:
            raise ValueError("Tolerances must be positive")
        if self.max_outer < 1:
            raise ValueError(f"max_outer must be at least 1, got {self.max_outer}")
        if self.adapt_iterations is not None and self.adapt_iterations < 0:
            raise ValueError(f"adapt_iterations must be nonnegative, got {self.adapt_iterations}")

    def to_dict(self):
        return {
            'theta0': self.theta0,
            'mu': self.mu,
            'tau': self.tau,
            'max_outer': self.max_outer,
            'tol_abs': self.tol_abs,
            'tol_rel': self.tol_rel,
            'adapt_iterations': self.adapt_iterations,
            'inner': self.inner.to_dict(),
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        inner = InnerOptions(**data.pop('inner', {}))
        return cls(inner=inner, **data)


@dataclass
class AdmmState:
    x: np.ndarray
    u: np.ndarray
    v: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    theta: float
    x_last: np.ndarray

    def to_dict(self):
        return {name: (value.tolist() if isinstance(value, np.ndarray) else value)
                for name, value in vars(self).items()}

    @classmethod
    def from_dict(cls, data):
        arrays = {name: np.asarray(data[name], dtype=float)
                  for name in ('x', 'u', 'v', 'alpha', 'beta', 'x_last')}
        return cls(theta=float(data['theta']), **arrays)


@dataclass(eq=False)
class SolveReport:
    x_hat: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    objective: float
    feasibility: dict
    converged: bool
    model: str = 'LassoInf'
    inner_iterations: int = 0
    stalled: bool = False
    wall_ms: float = 0.0

    @property
    def linf_violation(self):
        return self.feasibility.get('linf', 0.0)

    @property
    def saturation_violation(self):
        return self.feasibility.get('saturation', 0.0)

    @property
    def max_violation(self):
        return max(self.feasibility.values(), default=0.0)

    def to_dict(self):
        return {
            'model': self.model,
            'x_hat': self.x_hat.tolist(),
            'iterations': self.iterations,
            'inner_iterations': self.inner_iterations,
            'primal_residual': self.primal_residual,
            'dual_residual': self.dual_residual,
            'objective': self.objective,
            'feasibility': dict(self.feasibility),
            'converged': self.converged,
            'stalled': self.stalled,
            'wall_ms': self.wall_ms,
        }


class CsvTrace:
    """Trace sink writing one CSV row per outer iteration."""
    header = ('iteration', 'theta', 'r_norm', 'd_norm', 'objective')

    def __init__(self, handle):
        self.writer = csv.writer(handle)
        self.writer.writerow(self.header)

    def __call__(self, iteration, theta, r_norm, d_norm, objective):
        self.writer.writerow((iteration, repr(theta), repr(r_norm), repr(d_norm), repr(objective)))


def lasso_objective(system, x, lam):
    residual = system.Phi_tilde @ x - system.y_tilde
    return 0.5 * float(residual @ residual) + lam * system.Delta * float(np.abs(x).sum())


def constraint_violations(system, x, linf=True, saturation=True, l2_radius=None, dantzig_radius=None):
    """Recompute the violation of each requested constraint at x (0 when satisfied)."""
    x = np.asarray(x, dtype=float)
    residual = system.Phi_tilde @ x - system.y_tilde
    violations = {}
    if linf:
        worst = float(np.max(np.abs(residual))) if residual.size else 0.0
        violations['linf'] = max(worst - system.Delta / 2, 0.0)
    if l2_radius is not None:
        violations['l2'] = max(float(np.linalg.norm(residual)) - l2_radius, 0.0)
    if dantzig_radius is not None:
        correlation = system.Phi_tilde.T @ residual
        violations['dantzig'] = max(float(np.max(np.abs(correlation))) - dantzig_radius, 0.0)
    if saturation:
        if system.M_bar:
            violations['saturation'] = max(float(np.max(system.y_bar - system.Phi_bar @ x)), 0.0)
        else:
            violations['saturation'] = 0.0
    return violations


def top_eigenvalue(A, iterations=config.POWER_ITERATIONS):
    """Power-iteration estimate of the largest eigenvalue of A^T A."""
    if A.size == 0:
        return 0.0
    rng = np.random.default_rng(0)
    vector = rng.standard_normal(A.shape[1])
    vector /= np.linalg.norm(vector)
    estimate = 0.0
    for _ in range(iterations):
        image = A.T @ (A @ vector)
        norm = np.linalg.norm(image)
        if norm == 0.0:
            return 0.0
        vector = image / norm
        estimate = float(np.linalg.norm(A @ vector) ** 2)
    return estimate


def _smooth_terms(state, system):
    c1 = state.u + system.y_tilde + state.alpha / state.theta
    c2 = state.v + system.y_bar + state.beta / state.theta
    return c1, c2


def smooth_part(state, system):
    """
    The differentiable x-terms of the augmented Lagrangian at the current
    u, v, multipliers and theta, as a function returning (value, gradient).
    """
    theta = state.theta
    Phi_t, Phi_b = system.Phi_tilde, system.Phi_bar
    c1, c2 = _smooth_terms(state, system)

    def smooth(x):
        p = Phi_t @ x
        q = Phi_b @ x
        value = 0.5 * np.sum((p - system.y_tilde) ** 2) + 0.5 * theta * np.sum((p - c1) ** 2) \
            + 0.5 * theta * np.sum((q - c2) ** 2)
        grad = Phi_t.T @ ((1 + theta) * p - system.y_tilde - theta * c1) + theta * (Phi_b.T @ (q - c2))
        return float(value), grad

    return smooth


def _accelerated_prox_gradient(state, system, lam, inner, eig_tilde, eig_bar):
    """Monotone FISTA with restart on the x-terms of the augmented Lagrangian."""
    theta = state.theta
    smooth = smooth_part(state, system)
    weight = lam * system.Delta

    L = inner.inflation * ((1 + theta) * eig_tilde + theta * eig_bar)
    L = max(L, np.finfo(float).tiny)

    x = state.x.copy()
    f_x, _ = smooth(x)
    F_x = f_x + weight * np.abs(x).sum()
    y = x.copy()
    t = 1.0
    iterations = 0
    while iterations < inner.max_iter:
        iterations += 1
        f_y, g_y = smooth(y)
        while True:
            z = soft_threshold(y - g_y / L, weight / L)
            f_z, _ = smooth(z)
            step = z - y
            if f_z <= f_y + g_y @ step + 0.5 * L * (step @ step) + 1e-12 * max(1.0, abs(f_y)):
                break
            L *= 2.0
        F_z = f_z + weight * np.abs(z).sum()
        if F_z > F_x:
            # restart from the last accepted iterate
            y = x.copy()
            t = 1.0
            continue
        t_next = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        x_prev = x
        x = z
        F_x = F_z
        y = x + ((t - 1) / t_next) * (x - x_prev)
        t = t_next
        if np.linalg.norm(x - x_prev) <= inner.tol * max(1.0, np.linalg.norm(x)):
            break
    return x, iterations


def x_update(state, system, lam, inner_options=None):
    inner_options = inner_options or InnerOptions()
    _check_dimensions(state, system)
    eig_tilde = top_eigenvalue(system.Phi_tilde, inner_options.power_iterations)
    eig_bar = top_eigenvalue(system.Phi_bar, inner_options.power_iterations)
    x, _ = _accelerated_prox_gradient(state, system, lam, inner_options, eig_tilde, eig_bar)
    return x


def residuals(state, system):
    r = np.concatenate([
        state.u - system.Phi_tilde @ state.x + system.y_tilde,
        state.v - system.Phi_bar @ state.x + system.y_bar,
    ])
    step = state.x - state.x_last
    d = state.theta * np.concatenate([system.Phi_tilde @ step, system.Phi_bar @ step])
    return r, d


def adapt_penalty(theta, r_norm, d_norm, mu, tau):
    if r_norm > mu * d_norm:
        return theta * tau
    if d_norm > mu * r_norm:
        return theta / tau
    return theta


def _check_dimensions(state, system):
    N = system.N
    if state.x.shape != (N,) or state.x_last.shape != (N,):
        raise DimensionError(f"x must have length {N}")
    if state.u.shape != (system.M_tilde,) or state.alpha.shape != (system.M_tilde,):
        raise DimensionError(f"u and alpha must have length {system.M_tilde}")
    if state.v.shape != (system.M_bar,) or state.beta.shape != (system.M_bar,):
        raise DimensionError(f"v and beta must have length {system.M_bar}")


def _check_system(system):
    if system.M_tilde == 0:
        raise ValueError("The unsaturated block is empty")
    if system.y_tilde.shape != (system.M_tilde,) or system.Phi_bar.shape[1] != system.N \
            or system.y_bar.shape != (system.M_bar,):
        raise DimensionError("Partitioned system blocks have inconsistent shapes")


def initial_state(system, theta0, x0=None):
    x = np.zeros(system.N) if x0 is None else np.asarray(x0, dtype=float).copy()
    if x.shape != (system.N,):
        raise DimensionError(f"x0 must have length {system.N}")
    return AdmmState(
        x=x,
        u=system.Phi_tilde @ x - system.y_tilde,
        v=system.Phi_bar @ x - system.y_bar,
        alpha=np.zeros(system.M_tilde),
        beta=np.zeros(system.M_bar),
        theta=float(theta0),
        x_last=x.copy(),
    )


def solve_lasso_inf(system, lam, options=None, x0=None):
    """
    Run the ADMM iteration until the primal/dual stopping rule holds and x is
    feasible to tol_abs, or until max_outer iterations.

    Returns:
        SolveReport; non-convergence is reported through converged=False.
    """
    options = options or AdmmOptions()
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    _check_system(system)

    started = time.perf_counter()
    state = initial_state(system, options.theta0, x0)
    Delta = system.Delta
    eig_tilde = top_eigenvalue(system.Phi_tilde, options.inner.power_iterations)
    eig_bar = top_eigenvalue(system.Phi_bar, options.inner.power_iterations)
    sqrt_m = np.sqrt(system.M_tilde + system.M_bar)
    sqrt_n = np.sqrt(system.N)

    converged = False
    inner_total = 0
    r_norm = d_norm = float('inf')
    iteration = 0
    for iteration in range(1, options.max_outer + 1):
        state.x_last = state.x.copy()
        p = system.Phi_tilde @ state.x - system.y_tilde
        q = system.Phi_bar @ state.x - system.y_bar
        state.u = project_linf_ball(p - state.alpha / state.theta, Delta / 2)
        state.v = project_nonneg(q - state.beta / state.theta)

        state.x, inner_iterations = _accelerated_prox_gradient(
            state, system, lam, options.inner, eig_tilde, eig_bar)
        inner_total += inner_iterations

        p = system.Phi_tilde @ state.x - system.y_tilde
        q = system.Phi_bar @ state.x - system.y_bar
        state.alpha = state.alpha + state.theta * (state.u - p)
        state.beta = state.beta + state.theta * (state.v - q)

        r, d = residuals(state, system)
        r_norm = float(np.linalg.norm(r))
        d_norm = float(np.linalg.norm(d))
        if options.trace is not None:
            options.trace(iteration, state.theta, r_norm, d_norm, lasso_objective(system, state.x, lam))

        eps_primal = sqrt_m * options.tol_abs + options.tol_rel * max(
            np.sqrt(state.u @ state.u + state.v @ state.v), np.sqrt(p @ p + q @ q))
        eps_dual = sqrt_n * options.tol_abs + options.tol_rel * np.sqrt(
            np.sum((system.Phi_tilde.T @ state.alpha) ** 2) + np.sum((system.Phi_bar.T @ state.beta) ** 2))
        if r_norm <= eps_primal and d_norm <= eps_dual:
            violations = constraint_violations(system, state.x)
            if max(violations.values()) <= options.tol_abs:
                converged = True
                break

        if options.adapt_iterations is None or iteration <= options.adapt_iterations:
            state.theta = adapt_penalty(state.theta, r_norm, d_norm, options.mu, options.tau)

    x_hat = state.x
    report = SolveReport(
        x_hat=x_hat,
        iterations=iteration,
        primal_residual=r_norm,
        dual_residual=d_norm,
        objective=lasso_objective(system, x_hat, lam),
        feasibility=constraint_violations(system, x_hat),
        converged=converged,
        model='LassoInf',
        inner_iterations=inner_total,
        wall_ms=(time.perf_counter() - started) * 1000.0,
    )
    if converged:
        logger.debug("LASSO-inf converged in %d iterations (objective %.6g)", iteration, report.objective)
    else:
        logger.warning("LASSO-inf did not converge in %d iterations (r=%.3g, d=%.3g)",
                       iteration, r_norm, d_norm)
    return report


def with_trace(options, handle):
    return replace(options, trace=CsvTrace(handle))
