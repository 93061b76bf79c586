"""Projections and proximal operators shared by the solvers."""

import numpy as np


def _check_radius(r, name='r'):
    if r < 0:
        raise ValueError(f"{name} must be nonnegative, got {r}")


def project_linf_ball(x, r):
    """sign(x) * min(|x|, r), the projection onto the l-infinity ball of radius r."""
    _check_radius(r)
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.minimum(np.abs(x), r)


def soft_threshold(x, t):
    """Proximal operator of t*||.||_1."""
    _check_radius(t, 't')
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def project_l2_ball(x, r):
    _check_radius(r)
    x = np.asarray(x, dtype=float)
    norm = np.linalg.norm(x)
    if norm <= r:
        return x.copy()
    return x * (r / norm)


def project_nonneg(x):
    return np.maximum(np.asarray(x, dtype=float), 0.0)
