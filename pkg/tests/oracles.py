"""Reference solutions from scipy.optimize, independent of the ADMM code paths."""

import numpy as np
from scipy.optimize import linprog, minimize


def _linear_rows(system, spec):
    """Rows (A, c) of the linear constraints A x >= c active in spec."""
    Phi, y, Delta = system.Phi_tilde, system.y_tilde, system.Delta
    rows, bounds = [], []
    if spec.use_linf:
        rows += [Phi, -Phi]
        bounds += [y - Delta / 2, -y - Delta / 2]
    if spec.use_dantzig:
        gram, rhs = Phi.T @ Phi, Phi.T @ y
        radius = spec.dantzig_lambda * Delta / 2
        rows += [gram, -gram]
        bounds += [rhs - radius, -rhs - radius]
    if spec.use_saturation and system.M_bar:
        rows.append(system.Phi_bar)
        bounds.append(system.y_bar)
    if not rows:
        return np.zeros((0, system.N)), np.zeros(0)
    return np.vstack(rows), np.concatenate(bounds)


def _split(x):
    return np.concatenate([np.maximum(x, 0.0), np.maximum(-x, 0.0)])


def _lp(system, spec):
    N = system.N
    A, c = _linear_rows(system, spec)
    A_z = np.hstack([A, -A])
    result = linprog(np.ones(2 * N), A_ub=-A_z if A.size else None, b_ub=-c if A.size else None,
                     bounds=[(0, None)] * (2 * N), method='highs')
    assert result.status == 0, result.message
    x = result.x[:N] - result.x[N:]
    return x, float(np.abs(x).sum())


def _slsqp(system, spec, x0):
    N = system.N
    Phi, y, Delta = system.Phi_tilde, system.y_tilde, system.Delta
    lasso = spec.objective == 'lasso'
    weight = spec.lasso_lambda * Delta if lasso else 1.0

    def unpack(z):
        return z[:N] - z[N:]

    def objective(z):
        value = weight * z.sum()
        if lasso:
            r = Phi @ unpack(z) - y
            value += 0.5 * r @ r
        return value

    def gradient(z):
        g = np.zeros(N)
        if lasso:
            g = Phi.T @ (Phi @ unpack(z) - y)
        return np.concatenate([g + weight, -g + weight])

    constraints = []
    A, c = _linear_rows(system, spec)
    if A.size:
        A_z = np.hstack([A, -A])
        constraints.append({'type': 'ineq', 'fun': lambda z: A_z @ z - c, 'jac': lambda z: A_z})
    if spec.use_l2:
        radius = spec.epsilon * Delta

        def l2_margin(z):
            r = Phi @ unpack(z) - y
            return np.array([radius ** 2 - r @ r])

        def l2_jac(z):
            g = -2 * Phi.T @ (Phi @ unpack(z) - y)
            return np.concatenate([g, -g])[None, :]

        constraints.append({'type': 'ineq', 'fun': l2_margin, 'jac': l2_jac})

    result = minimize(objective, _split(np.asarray(x0, dtype=float)), jac=gradient, method='SLSQP',
                      bounds=[(0, None)] * (2 * N), constraints=constraints,
                      options={'ftol': 1e-14, 'maxiter': 5000})
    x = unpack(result.x)
    if lasso:
        r = Phi @ x - y
        return x, float(0.5 * r @ r + weight * np.abs(x).sum())
    return x, float(np.abs(x).sum())


def reference_solve(system, spec, x0):
    """
    Optimal point and objective for spec: an LP (HiGHS) when all constraints
    are linear and the objective is ||x||_1, otherwise SLSQP started at x0.
    """
    if spec.objective == 'l1_min' and not spec.use_l2:
        return _lp(system, spec)
    return _slsqp(system, spec, x0)
