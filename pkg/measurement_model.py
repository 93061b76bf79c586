"""
Finite-bit quantizer with saturation, synthetic problem instances and the
partition of recorded measurements into unsaturated and saturated blocks.
"""

import enum
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


class DimensionError(ValueError):
    """Raised when array shapes or problem dimensions are inconsistent."""


class Saturation(enum.Enum):
    NONE = 'none'
    POSITIVE = 'positive'
    NEGATIVE = 'negative'


# integer codes used by the vectorised quantizer
_SAT_CODES = {0: Saturation.NONE, 1: Saturation.POSITIVE, -1: Saturation.NEGATIVE}


@dataclass(frozen=True)
class QuantizerConfig:
    """B-bit quantizer saturating at G; the interval is Delta = G * 2**(1-B)."""
    bits: int
    saturation_level: float

    def __post_init__(self):
        if isinstance(self.bits, bool) or int(self.bits) != self.bits or self.bits < 1:
            raise ValueError(f"bits must be an integer >= 1, got {self.bits}")
        if not math.isfinite(self.saturation_level) or self.saturation_level <= 0:
            raise ValueError(f"saturation_level must be positive, got {self.saturation_level}")
        object.__setattr__(self, 'bits', int(self.bits))
        object.__setattr__(self, 'saturation_level', float(self.saturation_level))

    @property
    def interval(self):
        return math.ldexp(self.saturation_level, 1 - self.bits)

    @property
    def level_count(self):
        return 2 ** self.bits

    @property
    def top_level(self):
        return self.saturation_level - self.interval / 2

    def to_dict(self):
        return {
            'bits': self.bits,
            'saturation_level': self.saturation_level,
            'interval': self.interval,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(bits=data['bits'], saturation_level=data['saturation_level'])


@dataclass(frozen=True)
class RecordedMeasurement:
    level: float
    saturation: Saturation

    def to_dict(self):
        return {'level': self.level, 'saturation': self.saturation.value}


def _frozen(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


def _frozen_codes(codes):
    codes = np.array(codes, dtype=int)
    codes.setflags(write=False)
    return codes


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    Phi: np.ndarray
    x_star: np.ndarray
    true_obs: np.ndarray
    levels: np.ndarray
    saturation_codes: np.ndarray
    quantizer: QuantizerConfig
    seed: int
    R: float

    @property
    def N(self):
        return self.Phi.shape[1]

    @property
    def M(self):
        return self.Phi.shape[0]

    @property
    def S(self):
        return int(np.count_nonzero(self.x_star))

    @property
    def support(self):
        return np.flatnonzero(self.x_star)

    @property
    def recorded(self):
        return [RecordedMeasurement(float(level), _SAT_CODES[int(code)])
                for level, code in zip(self.levels, self.saturation_codes)]

    def to_dict(self):
        return {
            'N': self.N,
            'M': self.M,
            'S': self.S,
            'R': self.R,
            'seed': self.seed,
            'quantizer': self.quantizer.to_dict(),
            'Phi': self.Phi.tolist(),
            'x_star': self.x_star.tolist(),
            'true_obs': self.true_obs.tolist(),
            'recorded': [measurement.to_dict() for measurement in self.recorded],
        }

    @classmethod
    def from_dict(cls, data):
        quantizer = QuantizerConfig.from_dict(data['quantizer'])
        Phi = np.asarray(data['Phi'], dtype=float)
        x_star = np.asarray(data['x_star'], dtype=float)
        if Phi.ndim != 2 or Phi.shape != (data['M'], data['N']) or x_star.shape != (data['N'],):
            raise DimensionError("Instance document dimensions do not match its arrays")
        recorded = data['recorded']
        if len(recorded) != data['M']:
            raise DimensionError("Instance document has the wrong number of recorded measurements")
        codes = {saturation.value: code for code, saturation in _SAT_CODES.items()}
        return cls(
            Phi=_frozen(Phi),
            x_star=_frozen(x_star),
            true_obs=_frozen(data.get('true_obs', Phi @ x_star)),
            levels=_frozen([entry['level'] for entry in recorded]),
            saturation_codes=_frozen_codes([codes[entry['saturation']] for entry in recorded]),
            quantizer=quantizer,
            seed=int(data['seed']),
            R=float(data['R']),
        )


@dataclass(frozen=True, eq=False)
class PartitionedSystem:
    Phi_tilde: np.ndarray
    y_tilde: np.ndarray
    Phi_bar_plus: np.ndarray
    Phi_bar_minus: np.ndarray
    Phi_bar: np.ndarray
    y_bar: np.ndarray
    tilde_index: np.ndarray
    plus_index: np.ndarray
    minus_index: np.ndarray
    Delta: float
    G: float
    M: int = field(default=0)

    @property
    def N(self):
        return self.Phi_tilde.shape[1]

    @property
    def M_tilde(self):
        return self.Phi_tilde.shape[0]

    @property
    def M_bar(self):
        return self.Phi_bar.shape[0]

    def saturation_satisfied(self, x, tol=0.0):
        """Evaluate the saturation constraints through the separate +/- blocks."""
        x = np.asarray(x, dtype=float)
        bound = self.G - self.Delta
        plus_ok = np.all(self.Phi_bar_plus @ x >= bound - tol)
        minus_ok = np.all(self.Phi_bar_minus @ x <= -bound + tol)
        return bool(plus_ok and minus_ok)

    def to_dict(self):
        return {
            'N': self.N,
            'M': self.M,
            'M_tilde': self.M_tilde,
            'M_bar': self.M_bar,
            'M_bar_plus': int(self.plus_index.size),
            'M_bar_minus': int(self.minus_index.size),
            'Delta': self.Delta,
            'G': self.G,
            'saturation_ratio': saturation_ratio(self),
        }


def system_from_arrays(Phi_tilde, y_tilde, Delta, G=None, Phi_bar_plus=None, Phi_bar_minus=None):
    """Build a PartitionedSystem directly from blocks (tests, hand-made systems)."""
    Phi_tilde = np.atleast_2d(np.asarray(Phi_tilde, dtype=float))
    y_tilde = np.asarray(y_tilde, dtype=float).reshape(-1)
    N = Phi_tilde.shape[1]
    if y_tilde.shape[0] != Phi_tilde.shape[0]:
        raise DimensionError("y_tilde length must equal the number of rows of Phi_tilde")
    plus = np.zeros((0, N)) if Phi_bar_plus is None else np.asarray(Phi_bar_plus, dtype=float).reshape(-1, N)
    minus = np.zeros((0, N)) if Phi_bar_minus is None else np.asarray(Phi_bar_minus, dtype=float).reshape(-1, N)
    G = float(Delta) if G is None else float(G)
    M_tilde = Phi_tilde.shape[0]
    return PartitionedSystem(
        Phi_tilde=_frozen(Phi_tilde),
        y_tilde=_frozen(y_tilde),
        Phi_bar_plus=_frozen(plus),
        Phi_bar_minus=_frozen(minus),
        Phi_bar=_frozen(np.vstack([-minus, plus])),
        y_bar=_frozen(np.full(minus.shape[0] + plus.shape[0], G - Delta)),
        tilde_index=np.arange(M_tilde),
        plus_index=np.arange(M_tilde + minus.shape[0], M_tilde + minus.shape[0] + plus.shape[0]),
        minus_index=np.arange(M_tilde, M_tilde + minus.shape[0]),
        Delta=float(Delta),
        G=G,
        M=M_tilde + minus.shape[0] + plus.shape[0],
    )


def representable_levels(cfg):
    """Levels -G + Delta/2, -G + 3*Delta/2, ..., G - Delta/2 in increasing order."""
    half = 2 ** (cfg.bits - 1)
    return (np.arange(-half, half) + 0.5) * cfg.interval


def quantize_vector(cfg, t):
    """
    Round every entry of t to its nearest representable level.

    Ties round away from zero (so 0 records as +Delta/2); values beyond the range
    clamp to the extreme levels. Returns (levels, codes) with codes +1/-1 for
    positive/negative saturation and 0 otherwise.
    """
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("Cannot quantize non-finite values")
    half = 2 ** (cfg.bits - 1)
    scaled = t / cfg.interval
    j = np.floor(scaled)
    j = np.where((scaled == j) & (scaled < 0), j - 1, j)
    j = np.clip(j, -half, half - 1)
    levels = (j + 0.5) * cfg.interval
    codes = np.where(j == half - 1, 1, np.where(j == -half, -1, 0)).astype(int)
    return levels, codes


def quantize(cfg, t):
    if not math.isfinite(t):
        raise ValueError(f"Cannot quantize non-finite value {t}")
    levels, codes = quantize_vector(cfg, np.array([t]))
    return RecordedMeasurement(float(levels[0]), _SAT_CODES[int(codes[0])])


def derive_seed(master_seed, *keys):
    """Derive an independent 64-bit seed from a master seed and integer keys."""
    sequence = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def _record(Phi, x_star, cfg, seed, R):
    true_obs = Phi @ x_star
    levels, codes = quantize_vector(cfg, true_obs)
    return ProblemInstance(
        Phi=_frozen(Phi),
        x_star=_frozen(x_star),
        true_obs=_frozen(true_obs),
        levels=_frozen(levels),
        saturation_codes=_frozen_codes(codes),
        quantizer=cfg,
        seed=int(seed),
        R=float(R),
    )


def generate_instance(N, M, S, R, cfg, seed):
    """
    Draw a synthetic instance: Phi with i.i.d. N(0, 1/R^2) entries, an S-sparse x*
    with standard Gaussian nonzeros on a uniformly random support, and the
    quantized observations of Phi x*. Deterministic given seed.
    """
    if N < 1 or M < 1:
        raise ValueError(f"Dimensions must be positive, got N={N}, M={M}")
    if S < 1 or S > N:
        raise ValueError(f"Sparsity must satisfy 1 <= S <= N, got S={S}, N={N}")
    if R <= 0:
        raise ValueError(f"R must be positive, got {R}")

    rng = np.random.default_rng(seed)
    Phi = rng.normal(0.0, 1.0 / R, size=(M, N))
    support = rng.choice(N, size=S, replace=False)
    x_star = np.zeros(N)
    x_star[support] = rng.standard_normal(S)
    instance = _record(Phi, x_star, cfg, seed, R)
    logger.debug("Generated instance N=%d M=%d S=%d seed=%d", N, M, S, seed)
    return instance


def with_quantizer(instance, cfg):
    """Re-record the same Phi and x* under another quantizer."""
    return _record(np.array(instance.Phi), np.array(instance.x_star), cfg, instance.seed, instance.R)


def partition(instance):
    codes = instance.saturation_codes
    tilde_index = np.flatnonzero(codes == 0)
    plus_index = np.flatnonzero(codes == 1)
    minus_index = np.flatnonzero(codes == -1)
    Phi = instance.Phi
    Delta = instance.quantizer.interval
    G = instance.quantizer.saturation_level

    Phi_bar_plus = Phi[plus_index]
    Phi_bar_minus = Phi[minus_index]
    Phi_bar = np.vstack([-Phi_bar_minus, Phi_bar_plus])
    return PartitionedSystem(
        Phi_tilde=_frozen(Phi[tilde_index]),
        y_tilde=_frozen(instance.levels[tilde_index]),
        Phi_bar_plus=_frozen(Phi_bar_plus),
        Phi_bar_minus=_frozen(Phi_bar_minus),
        Phi_bar=_frozen(Phi_bar),
        y_bar=_frozen(np.full(Phi_bar.shape[0], G - Delta)),
        tilde_index=tilde_index,
        plus_index=plus_index,
        minus_index=minus_index,
        Delta=Delta,
        G=G,
        M=instance.M,
    )


def saturation_ratio(system):
    if system.M == 0:
        return 0.0
    return system.M_bar / system.M


def instance_to_json(instance):
    return json.dumps(instance.to_dict())


def instance_from_json(text):
    return ProblemInstance.from_dict(json.loads(text))
