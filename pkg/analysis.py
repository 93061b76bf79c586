"""
Recovery metrics, restricted extreme eigenvalues, the error-bound constants
and bounds for LASSO-infinity solutions, and numerical checks of the
inequalities the bounds are built from.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

import config
from measurement_model import derive_seed

logger = logging.getLogger(__name__)

# subsets per batched eigenvalue call
_SUBSET_BATCH = 20_000


class BudgetExceededError(ValueError):
    """Raised when exhaustive subset enumeration would exceed the configured budget."""


def snr(x_hat, x_star):
    x_star = np.asarray(x_star, dtype=float)
    reference = np.linalg.norm(x_star)
    if reference == 0.0:
        raise ValueError("SNR is undefined for a zero true signal")
    error = np.linalg.norm(np.asarray(x_hat, dtype=float) - x_star)
    if error == 0.0:
        return config.SNR_CAP_DB
    return min(-20.0 * math.log10(error / reference), config.SNR_CAP_DB)


def f_max(Phi_tilde):
    Phi_tilde = np.asarray(Phi_tilde, dtype=float)
    if Phi_tilde.shape[1] == 0:
        raise ValueError("f_max needs at least one column")
    if Phi_tilde.shape[0] == 0:
        return 0.0
    return float(np.max(np.linalg.norm(Phi_tilde, axis=0)))


@dataclass(frozen=True)
class RhoReport:
    k: int
    rho_minus: float
    rho_plus: float
    mode: str
    samples: Optional[int] = None
    matrix_tag: str = 'Phi_tilde'

    @property
    def one_sided(self):
        """Sampled extremes bound rho_minus from above and rho_plus from below."""
        return self.mode == 'sampled'

    def to_dict(self):
        return {
            'k': self.k,
            'rho_minus': self.rho_minus,
            'rho_plus': self.rho_plus,
            'mode': self.mode,
            'samples': self.samples,
            'one_sided': self.one_sided,
            'matrix_tag': self.matrix_tag,
        }


def _subset_extremes(gram, subsets):
    """Smallest and largest eigenvalues over the Gram principal submatrices of the subsets."""
    low, high = math.inf, -math.inf
    subsets = np.asarray(subsets, dtype=int)
    for start in range(0, subsets.shape[0], _SUBSET_BATCH):
        chunk = subsets[start:start + _SUBSET_BATCH]
        blocks = gram[chunk[:, :, None], chunk[:, None, :]]
        eigenvalues = np.linalg.eigvalsh(blocks)
        low = min(low, float(eigenvalues[:, 0].min()))
        high = max(high, float(eigenvalues[:, -1].max()))
    return low, high


def _combinations(N, size):
    return np.array(list(itertools.combinations(range(N), size)), dtype=int).reshape(-1, size)


def rho_extremes(k, Psi, mode='exhaustive', n_samples=2000, seed=0,
                 budget=config.RHO_SUBSET_BUDGET, matrix_tag='Phi_tilde'):
    """
    rho-(k, Psi) and rho+(k, Psi): extreme squared singular values over column
    subsets of size at most k.

    Exhaustive mode enumerates every size 1..k for rho- and size k for rho+.
    Sampled mode draws n_samples random k-subsets and is one-sided.
    """
    Psi = np.asarray(Psi, dtype=float)
    N = Psi.shape[1]
    if not 1 <= k <= N:
        raise ValueError(f"k must satisfy 1 <= k <= N={N}, got {k}")
    gram = Psi.T @ Psi

    if mode == 'exhaustive':
        if math.comb(N, k) > budget:
            raise BudgetExceededError(f"C({N},{k}) = {math.comb(N, k)} subsets exceeds budget {budget}")
        rho_minus = math.inf
        rho_plus = -math.inf
        for size in range(1, k + 1):
            low, high = _subset_extremes(gram, _combinations(N, size))
            rho_minus = min(rho_minus, low)
            if size == k:
                rho_plus = high
        return RhoReport(k=k, rho_minus=max(rho_minus, 0.0), rho_plus=max(rho_plus, 0.0),
                         mode='exhaustive', matrix_tag=matrix_tag)

    if mode == 'sampled':
        rng = np.random.default_rng(seed)
        subsets = np.argsort(rng.random((n_samples, N)), axis=1)[:, :k]
        low, high = _subset_extremes(gram, subsets)
        return RhoReport(k=k, rho_minus=max(low, 0.0), rho_plus=max(high, 0.0),
                         mode='sampled', samples=n_samples, matrix_tag=matrix_tag)

    raise ValueError(f"Unknown mode {mode!r}")


@dataclass(frozen=True)
class BoundConstants:
    A0: float
    A1: float
    C1: Optional[float]
    C2: Optional[float]

    @property
    def valid(self):
        return self.A0 > 0

    def to_dict(self):
        return {'A0': self.A0, 'A1': self.A1, 'C1': self.C1, 'C2': self.C2, 'valid': self.valid}


def bound_constants(rho_s_plus_l_minus, rho_s_plus_2l_plus, rho_s_plus_2l_minus, s, l):
    spread = rho_s_plus_2l_plus - rho_s_plus_2l_minus
    A0 = rho_s_plus_l_minus - 3 * math.sqrt(s / l) * spread
    A1 = 4 * spread
    if A0 <= 0:
        return BoundConstants(A0=A0, A1=A1, C1=None, C2=None)
    factor = 1 + 9 * s / l
    return BoundConstants(A0=A0, A1=A1, C1=4 + math.sqrt(factor) * A1 / A0, C2=math.sqrt(factor / A0))


def rho_for_bounds(Psi, s, l, mode='exhaustive', **kwargs):
    """RhoReports of orders s+l and s+2l needed by bound_constants."""
    return rho_extremes(s + l, Psi, mode=mode, **kwargs), rho_extremes(s + 2 * l, Psi, mode=mode, **kwargs)


def _tail_l1(x_star, T0):
    mask = np.ones(x_star.size, dtype=bool)
    mask[np.asarray(T0, dtype=int)] = False
    return float(np.abs(x_star[mask]).sum())


def error_bounds(system, x_star, T0, s, l, lam, Delta, constants):
    """Evaluate the lasso-term bound and the l-infinity-term bound on ||x_hat - x*||."""
    if not constants.valid:
        raise ValueError("Bound constants are invalid (A0 <= 0)")
    if len(T0) != s:
        raise ValueError(f"|T0| must equal s={s}, got {len(T0)}")
    x_star = np.asarray(x_star, dtype=float)
    tail = _tail_l1(x_star, T0)
    C1, C2 = constants.C1, constants.C2
    factor = math.sqrt(1 + 9 * s / l)
    bound_lasso = 6 * C2 ** 2 * math.sqrt(s) * lam * Delta / factor + C1 / math.sqrt(l) * tail \
        + 2.5 * C2 * math.sqrt(lam * Delta * tail)
    bound_linf = C2 * math.sqrt(system.M_tilde) * Delta + C1 / math.sqrt(l) * tail
    return bound_lasso, bound_linf


@dataclass(frozen=True)
class BoundReport:
    s: int
    l: int
    A0: float
    A1: float
    C1: Optional[float]
    C2: Optional[float]
    bound_lasso: Optional[float]
    bound_linf: Optional[float]
    f_max: float
    rho: tuple = field(default_factory=tuple)

    @property
    def valid(self):
        return self.A0 > 0

    @property
    def bound(self):
        if not self.valid:
            return None
        return min(self.bound_lasso, self.bound_linf)

    def to_dict(self):
        return {
            's': self.s,
            'l': self.l,
            'A0': self.A0,
            'A1': self.A1,
            'C1': self.C1,
            'C2': self.C2,
            'bound_lasso': self.bound_lasso,
            'bound_linf': self.bound_linf,
            'valid': self.valid,
            'f_max': self.f_max,
            'rho': [report.to_dict() for report in self.rho],
        }


def bound_report(system, x_star, T0, s, l, lam, mode='exhaustive', **kwargs):
    rho_sl, rho_s2l = rho_for_bounds(system.Phi_tilde, s, l, mode=mode, **kwargs)
    constants = bound_constants(rho_sl.rho_minus, rho_s2l.rho_plus, rho_s2l.rho_minus, s, l)
    bound_lasso = bound_linf = None
    if constants.valid:
        bound_lasso, bound_linf = error_bounds(system, x_star, T0, s, l, lam, system.Delta, constants)
    return BoundReport(
        s=s, l=l, A0=constants.A0, A1=constants.A1, C1=constants.C1, C2=constants.C2,
        bound_lasso=bound_lasso, bound_linf=bound_linf, f_max=f_max(system.Phi_tilde),
        rho=(rho_sl, rho_s2l),
    )


def format_bound_table(report):
    rows = [
        ('s', report.s), ('l', report.l), ('A0', report.A0), ('A1', report.A1),
        ('C1', report.C1), ('C2', report.C2), ('f_max', report.f_max),
        ('bound_lasso', report.bound_lasso), ('bound_linf', report.bound_linf), ('valid', report.valid),
    ]
    for rho in report.rho:
        rows.append((f'rho-({rho.k})', rho.rho_minus))
        rows.append((f'rho+({rho.k})', rho.rho_plus))
    width = max(len(name) for name, _ in rows)
    return '\n'.join(f'{name:<{width}}  {value if value is not None else "-"}' for name, value in rows)


def _split_blocks(h, T0, l):
    """T0, then T1, T2, ... holding the next-largest l entries of |h| off T0."""
    T0 = np.asarray(T0, dtype=int)
    rest = np.setdiff1d(np.arange(h.size), T0)
    rest = rest[np.argsort(-np.abs(h[rest]), kind='stable')]
    return [rest[start:start + l] for start in range(0, rest.size, l)]


@dataclass
class InequalityReport:
    margins: dict = field(default_factory=dict)

    @property
    def holds(self):
        return all(margin >= -1e-9 for margin in self.margins.values())

    def to_dict(self):
        return {'margins': dict(self.margins), 'holds': self.holds}


def check_partition_inequalities(h, T0, l, x_star=None):
    """
    Margins (right side minus left side) of
      ||h_{T01^c}|| <= sum_{j>=2} ||h_Tj|| <= ||h_{T0^c}||_1 / sqrt(l)
    and, when x_star is given,
      ||h_{T0^c}||_1 <= 3 ||h_T0||_1 + 4 ||x*_{T0^c}||_1.
    """
    h = np.asarray(h, dtype=float)
    T0 = np.asarray(T0, dtype=int)
    blocks = _split_blocks(h, T0, l)
    outside_T01 = np.concatenate(blocks[1:]) if len(blocks) > 1 else np.array([], dtype=int)
    tail_norm = float(np.linalg.norm(h[outside_T01]))
    block_sum = float(sum(np.linalg.norm(h[block]) for block in blocks[1:]))
    off_T0 = float(np.abs(h).sum() - np.abs(h[T0]).sum())

    report = InequalityReport()
    report.margins['block_triangle'] = block_sum - tail_norm
    report.margins['block_l1'] = off_T0 / math.sqrt(l) - block_sum
    if x_star is not None:
        report.margins['cone'] = 3 * float(np.abs(h[T0]).sum()) + 4 * _tail_l1(np.asarray(x_star, dtype=float), T0) - off_T0
    return report


def check_solution_inequalities(system, x_hat, x_star, T0, l, lam, constants=None):
    """
    Margins of the inequalities satisfied by a LASSO-infinity solution x_hat when
    x* is feasible and the Dantzig-type bound holds:
      ||Phi~ h||_inf <= Delta, ||h|| <= sqrt(1+9s/l)||h_T01|| + 4||x*_T0c||_1/sqrt(l),
      ||Phi~ h||^2 <= 1.5 lam Delta ||h||_1, ||Phi~ h||^2 <= M~ Delta^2,
    and, when constants are given,
      ||Phi~ h||^2 >= A0 ||h_T01||^2 - A1 ||h_T01|| ||x*_T0c||_1 / sqrt(l).
    """
    x_star = np.asarray(x_star, dtype=float)
    h = np.asarray(x_hat, dtype=float) - x_star
    T0 = np.asarray(T0, dtype=int)
    s = T0.size
    Delta = system.Delta
    image = system.Phi_tilde @ h
    image_sq = float(image @ image)
    blocks = _split_blocks(h, T0, l)
    T01 = np.concatenate([T0] + blocks[:1])
    h_T01 = float(np.linalg.norm(h[T01]))
    tail = _tail_l1(x_star, T0)

    report = check_partition_inequalities(h, T0, l, x_star)
    report.margins['residual_linf'] = Delta - float(np.max(np.abs(image), initial=0.0))
    report.margins['error_split'] = math.sqrt(1 + 9 * s / l) * h_T01 + 4 * tail / math.sqrt(l) - float(np.linalg.norm(h))
    report.margins['image_lasso'] = 1.5 * lam * Delta * float(np.abs(h).sum()) - image_sq
    report.margins['image_linf'] = system.M_tilde * Delta ** 2 - image_sq
    if constants is not None:
        report.margins['restricted_lower'] = image_sq - (constants.A0 * h_T01 ** 2 - constants.A1 * h_T01 * tail / math.sqrt(l))
    return report


@dataclass(frozen=True)
class EnvelopeReport:
    M: int
    N: int
    k: int
    trials: int
    slack: float
    upper_envelope: float
    lower_envelope: float
    sqrt_rho_plus: tuple
    sqrt_rho_minus: tuple

    @property
    def pass_fraction(self):
        passed = sum(1 for upper, lower in zip(self.sqrt_rho_plus, self.sqrt_rho_minus)
                     if upper <= self.upper_envelope and lower >= self.lower_envelope)
        return passed / self.trials

    @property
    def regime_ok(self):
        """k log N small relative to M; the caller owns this condition."""
        return self.k * math.log(self.N) < 0.1 * self.M

    def to_dict(self):
        return {
            'M': self.M, 'N': self.N, 'k': self.k, 'trials': self.trials, 'slack': self.slack,
            'upper_envelope': self.upper_envelope, 'lower_envelope': self.lower_envelope,
            'pass_fraction': self.pass_fraction, 'regime_ok': self.regime_ok,
            'mean_sqrt_rho_plus': float(np.mean(self.sqrt_rho_plus)),
            'mean_sqrt_rho_minus': float(np.mean(self.sqrt_rho_minus)),
        }


def check_gaussian_envelopes(M, N, k, trials, seed, slack=config.ENVELOPE_SLACK, n_subsets=200):
    """
    Sample standard Gaussian M x N matrices and compare sampled sqrt(rho+-(k))
    with (17/16) sqrt(M) (1 + slack) and (15/16) sqrt(M) (1 - slack).
    """
    upper = 17 / 16 * math.sqrt(M) * (1 + slack)
    lower = 15 / 16 * math.sqrt(M) * (1 - slack)
    plus, minus = [], []
    for trial in range(trials):
        rng = np.random.default_rng(derive_seed(seed, trial))
        Psi = rng.standard_normal((M, N))
        report = rho_extremes(k, Psi, mode='sampled', n_samples=n_subsets, seed=derive_seed(seed, trial, 1),
                              matrix_tag='Phi')
        plus.append(math.sqrt(report.rho_plus))
        minus.append(math.sqrt(report.rho_minus))
    envelope = EnvelopeReport(M=M, N=N, k=k, trials=trials, slack=slack, upper_envelope=upper,
                              lower_envelope=lower, sqrt_rho_plus=tuple(plus), sqrt_rho_minus=tuple(minus))
    if not envelope.regime_ok:
        logger.info("k log N = %.3g is not small relative to M = %d", k * math.log(N), M)
    return envelope


def asymptotic_estimates(M, M_tilde, N, S, pi, Delta):
    """
    Leading-order sizes of the two bound terms for a standard Gaussian sensing
    matrix: lambda ~ sqrt(2 log(2N/pi)) sqrt(M~), the lasso term
    ~ sqrt(S log N / M) Delta and the l-infinity term ~ sqrt(M~/M) Delta.
    Constants are dropped; only ratios across sizes are meaningful.
    """
    lam = math.sqrt(2 * math.log(2 * N / pi)) * math.sqrt(M_tilde)
    return {
        'lambda': lam,
        'lasso_term': math.sqrt(S * math.log(N) / M) * Delta,
        'linf_term': math.sqrt(M_tilde / M) * Delta,
    }
