"""
Constrained l1 models (basis pursuit with quantization, Dantzig and saturation
constraints) solved by consensus ADMM: one split variable per constraint, each
with a closed-form projection, and an x-update that is a cached Cholesky solve.
"""

import logging
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

import config
from admm_lasso_inf import AdmmOptions, SolveReport, adapt_penalty, constraint_violations, lasso_objective
from measurement_model import DimensionError
from prox_ops import project_l2_ball, project_linf_ball, project_nonneg, soft_threshold

logger = logging.getLogger(__name__)

OBJECTIVES = ('l1_min', 'lasso')
PRESETS = ('Linf', 'L2', 'Dantzig', 'L2DantzigInf', 'LassoInf', 'Lasso')


class SpecError(ValueError):
    """Raised for invalid model specifications or missing preset parameters."""


@dataclass(frozen=True)
class ModelSpec:
    name: str = 'custom'
    epsilon: Optional[float] = None
    use_linf: bool = False
    dantzig_lambda: Optional[float] = None
    use_saturation: bool = True
    objective: str = 'l1_min'
    lasso_lambda: Optional[float] = None

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise SpecError(f"Unknown objective {self.objective!r}")
        if self.objective == 'lasso' and (self.lasso_lambda is None or self.lasso_lambda < 0):
            raise SpecError("The lasso objective needs a nonnegative lambda")
        if self.epsilon is not None and self.epsilon < 0:
            raise SpecError(f"epsilon must be nonnegative, got {self.epsilon}")
        if self.dantzig_lambda is not None and self.dantzig_lambda < 0:
            raise SpecError(f"Dantzig lambda must be nonnegative, got {self.dantzig_lambda}")

    @property
    def use_l2(self):
        return self.epsilon is not None

    @property
    def use_dantzig(self):
        return self.dantzig_lambda is not None

    @property
    def has_constraint(self):
        return self.use_l2 or self.use_linf or self.use_dantzig or self.use_saturation

    @property
    def is_trivial(self):
        return self.objective == 'l1_min' and not self.has_constraint

    def to_dict(self):
        params = {}
        if self.epsilon is not None:
            params['epsilon'] = self.epsilon
        lam = self.lasso_lambda if self.lasso_lambda is not None else self.dantzig_lambda
        if lam is not None:
            params['lambda'] = lam
        return {
            'preset': self.name,
            'params': params,
            'use_linf': self.use_linf,
            'use_saturation': self.use_saturation,
            'objective': self.objective,
            'epsilon': self.epsilon,
            'dantzig_lambda': self.dantzig_lambda,
            'lasso_lambda': self.lasso_lambda,
        }

    @classmethod
    def from_dict(cls, data):
        name = data.get('preset', 'custom')
        if name in PRESETS:
            return preset(name, data.get('params', {}))
        return cls(
            name=name,
            epsilon=data.get('epsilon'),
            use_linf=bool(data.get('use_linf', False)),
            dantzig_lambda=data.get('dantzig_lambda'),
            use_saturation=bool(data.get('use_saturation', True)),
            objective=data.get('objective', 'l1_min'),
            lasso_lambda=data.get('lasso_lambda'),
        )


def _require(params, key, name):
    value = (params or {}).get(key)
    if value is None:
        raise SpecError(f"Preset {name} needs parameter {key!r}")
    return float(value)


def preset(name, params=None):
    """Named model: all presets keep the saturation constraints."""
    if name == 'Linf':
        return ModelSpec(name=name, use_linf=True)
    if name == 'L2':
        return ModelSpec(name=name, epsilon=_require(params, 'epsilon', name))
    if name == 'Dantzig':
        return ModelSpec(name=name, dantzig_lambda=_require(params, 'lambda', name))
    if name == 'L2DantzigInf':
        return ModelSpec(name=name, epsilon=_require(params, 'epsilon', name), use_linf=True,
                         dantzig_lambda=_require(params, 'lambda', name))
    if name == 'LassoInf':
        return ModelSpec(name=name, use_linf=True, objective='lasso',
                         lasso_lambda=_require(params, 'lambda', name))
    if name == 'Lasso':
        return ModelSpec(name=name, objective='lasso', lasso_lambda=_require(params, 'lambda', name))
    raise SpecError(f"Unknown preset {name!r}; expected one of {', '.join(PRESETS)}")


def feasibility_report(system, x, spec):
    return constraint_violations(
        system, x,
        linf=spec.use_linf,
        saturation=spec.use_saturation,
        l2_radius=spec.epsilon * system.Delta if spec.use_l2 else None,
        dantzig_radius=spec.dantzig_lambda * system.Delta / 2 if spec.use_dantzig else None,
    )


def spec_objective(system, x, spec):
    if spec.objective == 'lasso':
        return lasso_objective(system, x, spec.lasso_lambda)
    return float(np.abs(x).sum())


class _Block:
    """One split z = A x - b with its projection; A is None for the identity."""

    def __init__(self, name, A, b, project):
        self.name = name
        self.A = A
        self.b = b
        self.project = project
        self.z = None
        self.w = None

    def apply(self, x):
        return (x if self.A is None else self.A @ x) - self.b

    def apply_T(self, y):
        return y if self.A is None else self.A.T @ y

    def gram(self, N):
        return np.eye(N) if self.A is None else self.A.T @ self.A


def _operator_scale(A):
    if A.size == 0:
        return 1.0
    norm = float(np.linalg.norm(A, 2))
    return norm if norm > 0 else 1.0


def _ball_block(name, A, b, radius, project):
    # rows scaled to unit spectral norm; the ball shrinks with them
    scale = _operator_scale(A)
    radius = radius / scale
    return _Block(name, A / scale, b / scale, lambda z: project(z, radius))


def _build_blocks(system, spec):
    Delta = system.Delta
    N = system.N
    Phi, y = system.Phi_tilde, system.y_tilde
    blocks = [_Block('l1', None, np.zeros(N), None)]
    if spec.use_l2:
        blocks.append(_ball_block('l2', Phi, y, spec.epsilon * Delta, project_l2_ball))
    if spec.use_linf:
        blocks.append(_ball_block('linf', Phi, y, Delta / 2, project_linf_ball))
    if spec.use_dantzig:
        blocks.append(_ball_block('dantzig', Phi.T @ Phi, Phi.T @ y, spec.dantzig_lambda * Delta / 2,
                                  project_linf_ball))
    if spec.use_saturation and system.M_bar:
        scale = _operator_scale(system.Phi_bar)
        blocks.append(_Block('saturation', system.Phi_bar / scale, system.y_bar / scale, project_nonneg))
    return blocks


def _zero_report(system, spec):
    x_hat = np.zeros(system.N)
    return SolveReport(
        x_hat=x_hat, iterations=0, primal_residual=0.0, dual_residual=0.0,
        objective=0.0, feasibility=feasibility_report(system, x_hat, spec),
        converged=True, model=spec.name,
    )


def solve_constrained(system, spec, options=None, x0=None):
    """
    Minimize ||x||_1 (or the lasso objective) subject to the constraints active in spec.

    Returns:
        SolveReport with feasibility recomputed from x_hat; stalls and
        non-convergence are flagged, never raised.
    """
    options = options or AdmmOptions()
    N = system.N
    if system.Phi_bar.shape[1] != N or system.y_tilde.shape != (system.M_tilde,):
        raise DimensionError("Partitioned system blocks have inconsistent shapes")
    if spec.is_trivial:
        logger.warning("Model %s has no constraint; x = 0 is optimal", spec.name)
        return _zero_report(system, spec)

    started = time.perf_counter()
    blocks = _build_blocks(system, spec)
    lasso = spec.objective == 'lasso'
    l1_weight = spec.lasso_lambda * system.Delta if lasso else 1.0

    base = sum(block.gram(N) for block in blocks)
    data_gram = system.Phi_tilde.T @ system.Phi_tilde if lasso else None
    data_rhs = system.Phi_tilde.T @ system.y_tilde if lasso else None
    factors = {}

    def factor(theta):
        if not lasso:
            theta = None
        if theta not in factors:
            matrix = base if theta is None else base + data_gram / theta
            factors[theta] = cho_factor(matrix)
        return factors[theta]

    adapt_until = options.adapt_iterations
    if adapt_until is None:
        adapt_until = config.CONSENSUS_ADAPT_ITERATIONS
    stall_window = max(config.STALL_WINDOW, int(config.STALL_WINDOW_FRACTION * options.max_outer))

    theta = options.theta0
    x = np.zeros(N) if x0 is None else np.asarray(x0, dtype=float).copy()
    for block in blocks:
        block.z = block.apply(x)
        block.w = np.zeros_like(block.z)

    sqrt_p = np.sqrt(sum(block.z.size for block in blocks))
    sqrt_n = np.sqrt(N)
    history = []
    converged = stalled = False
    r_norm = d_norm = float('inf')
    iteration = 0
    for iteration in range(1, options.max_outer + 1):
        rhs = sum(block.apply_T(block.b + block.z - block.w) for block in blocks)
        if lasso:
            rhs = rhs + data_rhs / theta
        x = cho_solve(factor(theta), rhs)

        primal_parts, z_parts, ax_parts = [], [], []
        dual = np.zeros(N)
        for block in blocks:
            ax = block.apply(x)
            z_old = block.z
            if block.name == 'l1':
                block.z = soft_threshold(ax + block.w, l1_weight / theta)
            else:
                block.z = block.project(ax + block.w)
            block.w = block.w + ax - block.z
            primal_parts.append(ax - block.z)
            z_parts.append(block.z)
            ax_parts.append(ax)
            dual += block.apply_T(block.z - z_old)

        r_norm = float(np.linalg.norm(np.concatenate(primal_parts)))
        d_norm = float(theta * np.linalg.norm(dual))
        if options.trace is not None:
            options.trace(iteration, theta, r_norm, d_norm, spec_objective(system, x, spec))

        eps_primal = sqrt_p * options.tol_abs + options.tol_rel * max(
            np.linalg.norm(np.concatenate(z_parts)), np.linalg.norm(np.concatenate(ax_parts)))
        scaled_dual = sum(block.apply_T(block.w) for block in blocks)
        eps_dual = sqrt_n * options.tol_abs + options.tol_rel * theta * np.linalg.norm(scaled_dual)
        if r_norm <= eps_primal and d_norm <= eps_dual:
            if max(feasibility_report(system, x, spec).values(), default=0.0) <= options.tol_abs:
                converged = True
                break

        history.append(r_norm)
        # theta is fixed past adapt_until, so a flat residual there means no feasible point
        if iteration > adapt_until + stall_window and r_norm > eps_primal \
                and r_norm > (1 - config.STALL_DECREASE) * history[-stall_window - 1]:
            stalled = True
            break

        if iteration > adapt_until:
            continue
        new_theta = adapt_penalty(theta, r_norm, d_norm, options.mu, options.tau)
        if new_theta != theta:
            for block in blocks:
                block.w = block.w * (theta / new_theta)
            theta = new_theta

    report = SolveReport(
        x_hat=x,
        iterations=iteration,
        primal_residual=r_norm,
        dual_residual=d_norm,
        objective=spec_objective(system, x, spec),
        feasibility=feasibility_report(system, x, spec),
        converged=converged,
        model=spec.name,
        stalled=stalled,
        wall_ms=(time.perf_counter() - started) * 1000.0,
    )
    if stalled:
        logger.warning("Model %s stalled after %d iterations (r=%.3g); constraints may be infeasible",
                       spec.name, iteration, r_norm)
    elif not converged:
        logger.warning("Model %s did not converge in %d iterations", spec.name, iteration)
    return report
