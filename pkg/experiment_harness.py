"""
Parameter sweeps over synthetic quantized/saturated instances: per-trial
instance generation, calibration and reconstruction by every configured
model, SNR aggregation, model ranking and CSV output.
"""

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

import config
from admm_lasso_inf import AdmmOptions, solve_lasso_inf
from analysis import snr
from calibration import CalibrationMethod, calibrate
from constrained_l1 import PRESETS, preset, solve_constrained
from measurement_model import QuantizerConfig, derive_seed, generate_instance, partition, with_quantizer

logger = logging.getLogger(__name__)

SWEPT_VARIABLES = ('N', 'S', 'M', 'B', 'P', 'G', 'saturation_ratio')
PARAMETERS = ('N', 'M', 'S', 'B', 'G', 'R', 'P')
INTEGER_PARAMETERS = ('N', 'M', 'S', 'B')
FIXED_DEFAULTS = {'R': 10.0, 'P': 1.0}

CSV_HEADER = ('swept_value', 'model', 'trial', 'snr_db', 'saturation_ratio', 'iterations', 'converged', 'wall_ms')
AGG_HEADER = ('swept_value', 'model', 'mean_snr', 'std_snr', 'trials', 'mean_saturation_ratio', 'converged_fraction')


@dataclass(frozen=True)
class SweepConfig:
    swept: str
    values: tuple
    fixed: dict
    models: tuple = ('LassoInf',)
    trials: int = 30
    master_seed: int = 0
    admm: AdmmOptions = field(default_factory=AdmmOptions)
    calibration_method: str = 'empirical'
    calibration_samples: int = config.CALIBRATION_SAMPLES
    coupled: dict = field(default_factory=dict)
    record_wall_time: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'values', tuple(self.values))
        object.__setattr__(self, 'models', tuple(self.models))
        if self.swept in self.fixed:
            raise ValueError(f"Swept variable {self.swept} must not appear in the fixed map")
        defaults = {name: value for name, value in FIXED_DEFAULTS.items() if name != self.swept}
        object.__setattr__(self, 'fixed', {**defaults, **dict(self.fixed)})
        object.__setattr__(self, 'coupled', dict(self.coupled))
        self._validate()

    def _validate(self):
        if self.swept not in SWEPT_VARIABLES:
            raise ValueError(f"Unknown swept variable {self.swept!r}; expected one of {', '.join(SWEPT_VARIABLES)}")
        if not self.values:
            raise ValueError("A sweep needs at least one value")
        if self.trials < 1:
            raise ValueError(f"trials must be at least 1, got {self.trials}")
        if not self.models:
            raise ValueError("A sweep needs at least one model")
        for name in self.models:
            if name not in PRESETS:
                raise ValueError(f"Unknown model {name!r}; expected one of {', '.join(PRESETS)}")
        CalibrationMethod(self.calibration_method)
        if self.calibration_samples < 1000:
            raise ValueError(f"calibration_samples must be at least 1000, got {self.calibration_samples}")
        for name in self.coupled:
            if name not in PARAMETERS or name == self.swept:
                raise ValueError(f"Cannot couple parameter {name!r}")
            if self.coupled[name] <= 0:
                raise ValueError(f"Coupling ratio for {name} must be positive")
        for name in self.fixed:
            if name not in PARAMETERS:
                raise ValueError(f"Unknown fixed parameter {name!r}")
        missing = set(self._required()) - set(self.fixed) - set(self.coupled)
        if missing:
            raise ValueError(f"Missing fixed parameters: {', '.join(sorted(missing))}")
        for value in self.values:
            self.parameters(value)

    def _required(self):
        required = [name for name in PARAMETERS if name != self.swept]
        if self.swept == 'saturation_ratio':
            required.remove('G')
        return required

    def parameters(self, value):
        """Full parameter map for one swept value; raises on inconsistent values."""
        params = {name: self.fixed[name] for name in self._required() if name in self.fixed}
        if self.swept == 'saturation_ratio':
            if not 0 < value < 1:
                raise ValueError(f"Target saturation ratio must lie in (0, 1), got {value}")
        else:
            params[self.swept] = value
        for name, ratio in self.coupled.items():
            params[name] = ratio * value
        for name in INTEGER_PARAMETERS:
            if name in params:
                params[name] = int(round(params[name]))
        for name, item in params.items():
            if item <= 0:
                raise ValueError(f"Parameter {name} must be positive, got {item}")
        if params['S'] > params['N']:
            raise ValueError(f"Sparsity S={params['S']} exceeds N={params['N']}")
        if params['P'] > 1:
            raise ValueError(f"Confidence P must not exceed 1, got {params['P']}")
        return params

    def to_dict(self):
        return {
            'swept': self.swept,
            'values': list(self.values),
            'fixed': {name: value for name, value in self.fixed.items()},
            'models': list(self.models),
            'trials': self.trials,
            'master_seed': self.master_seed,
            'admm': self.admm.to_dict(),
            'calibration_method': self.calibration_method,
            'calibration_samples': self.calibration_samples,
            'coupled': dict(self.coupled),
            'record_wall_time': self.record_wall_time,
        }

    @classmethod
    def from_dict(cls, data):
        if 'swept' not in data or 'values' not in data:
            raise ValueError("Sweep config needs 'swept' and 'values'")
        return cls(
            swept=data['swept'],
            values=data['values'],
            fixed=data.get('fixed', {}),
            models=data.get('models', ('LassoInf',)),
            trials=int(data.get('trials', 30)),
            master_seed=int(data.get('master_seed', 0)),
            admm=AdmmOptions.from_dict(data.get('admm')),
            calibration_method=data.get('calibration_method', 'empirical'),
            calibration_samples=int(data.get('calibration_samples', config.CALIBRATION_SAMPLES)),
            coupled=data.get('coupled', {}),
            record_wall_time=bool(data.get('record_wall_time', False)),
        )


@dataclass(frozen=True)
class SweepRow:
    value_index: int
    swept_value: float
    model_index: int
    model: str
    trial: int
    snr_db: float
    saturation_ratio: float
    iterations: int
    converged: bool
    wall_ms: Optional[float] = None
    saturation_level: Optional[float] = None

    @property
    def sort_key(self):
        return self.value_index, self.model_index, self.trial

    def csv_fields(self):
        return (
            repr(self.swept_value), self.model, self.trial, repr(self.snr_db), repr(self.saturation_ratio),
            self.iterations, 'true' if self.converged else 'false',
            '' if self.wall_ms is None else repr(self.wall_ms),
        )

    def to_dict(self):
        return {
            'value_index': self.value_index,
            'swept_value': self.swept_value,
            'model_index': self.model_index,
            'model': self.model,
            'trial': self.trial,
            'snr_db': self.snr_db,
            'saturation_ratio': self.saturation_ratio,
            'iterations': self.iterations,
            'converged': self.converged,
            'wall_ms': self.wall_ms,
            'saturation_level': self.saturation_level,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


@dataclass(frozen=True)
class AggregateRow:
    value_index: int
    swept_value: float
    model_index: int
    model: str
    mean_snr: float
    std_snr: float
    trials: int
    mean_saturation_ratio: float
    converged_fraction: float

    def csv_fields(self):
        return (
            repr(self.swept_value), self.model, repr(self.mean_snr), repr(self.std_snr), self.trials,
            repr(self.mean_saturation_ratio), repr(self.converged_fraction),
        )

    def to_dict(self):
        return {
            'swept_value': self.swept_value,
            'model': self.model,
            'mean_snr': self.mean_snr,
            'std_snr': self.std_snr,
            'trials': self.trials,
            'mean_saturation_ratio': self.mean_saturation_ratio,
            'converged_fraction': self.converged_fraction,
        }


def _group(rows):
    groups = {}
    for row in rows:
        groups.setdefault((row.value_index, row.model_index), []).append(row)
    return groups


def aggregate(rows):
    """Per (swept value, model) mean and sample standard deviation of the SNR."""
    aggregates = []
    for (value_index, model_index), group in sorted(_group(rows).items()):
        snrs = np.array([row.snr_db for row in group])
        std = float(np.std(snrs, ddof=1)) if snrs.size > 1 else 0.0
        aggregates.append(AggregateRow(
            value_index=value_index,
            swept_value=group[0].swept_value,
            model_index=model_index,
            model=group[0].model,
            mean_snr=float(np.mean(snrs)),
            std_snr=std,
            trials=len(group),
            mean_saturation_ratio=float(np.mean([row.saturation_ratio for row in group])),
            converged_fraction=sum(row.converged for row in group) / len(group),
        ))
    return aggregates


@dataclass
class SweepResult:
    config: SweepConfig
    rows: list
    aggregates: list = field(default_factory=list)

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda row: row.sort_key)
        if not self.aggregates:
            self.aggregates = aggregate(self.rows)

    def mean_snr(self, model, swept_value):
        for row in self.aggregates:
            if row.model == model and row.swept_value == swept_value:
                return row.mean_snr
        raise KeyError(f"No aggregate for model {model} at {swept_value}")

    def to_dict(self):
        return {
            'config': self.config.to_dict(),
            'rows': [row.to_dict() for row in self.rows],
            'aggregates': [row.to_dict() for row in self.aggregates],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(config=SweepConfig.from_dict(data['config']),
                   rows=[SweepRow.from_dict(row) for row in data['rows']])


def _count_saturated(instance):
    return np.count_nonzero(instance.saturation_codes) / instance.M


def tune_saturation_level(instance, target, max_iter=config.SATURATION_BISECTION_ITERS,
                          rtol=config.SATURATION_RATIO_RTOL):
    """
    Bisect G (geometrically) until the realized saturation ratio is within rtol
    relative of target. Returns the re-recorded instance and its G.
    """
    bits = instance.quantizer.bits
    peak = float(np.max(np.abs(instance.true_obs)))
    if bits == 1 or peak == 0.0:
        return instance, instance.quantizer.saturation_level
    # no saturation at hi, almost all at lo
    hi = 1.01 * peak / (1 - 2.0 ** (1 - bits))
    lo = hi * 1e-6
    best, best_gap = instance, math.inf
    for _ in range(max_iter):
        mid = math.sqrt(lo * hi)
        candidate = with_quantizer(instance, QuantizerConfig(bits, mid))
        ratio = _count_saturated(candidate)
        gap = abs(ratio - target)
        if gap < best_gap:
            best, best_gap = candidate, gap
        if gap <= rtol * target:
            break
        if ratio > target:
            lo = mid
        else:
            hi = mid
    if best_gap > rtol * target:
        logger.warning("Saturation ratio %.4g not reached; closest realized %.4g",
                       target, _count_saturated(best))
    return best, best.quantizer.saturation_level


def _solve(system, name, calibration, options):
    if name == 'LassoInf':
        return solve_lasso_inf(system, calibration.lam, options)
    return solve_constrained(system, preset(name, calibration.params), options)


def _run_trial(sweep, value_index, trial):
    value = sweep.values[value_index]
    params = sweep.parameters(value)
    seed = derive_seed(sweep.master_seed, value_index, trial)
    quantizer = QuantizerConfig(params['B'], params.get('G', 1.0))
    instance = generate_instance(params['N'], params['M'], params['S'], params['R'], quantizer, seed)
    if sweep.swept == 'saturation_ratio':
        instance, _ = tune_saturation_level(instance, value)
    system = partition(instance)
    ratio = system.M_bar / system.M

    confidence = params['P']
    method = 'oracle' if confidence >= 1.0 else sweep.calibration_method
    calibration = calibrate(system, method, confidence, x_star=instance.x_star,
                            n_samples=sweep.calibration_samples, seed=derive_seed(seed, 1))

    rows = []
    for model_index, name in enumerate(sweep.models):
        try:
            report = _solve(system, name, calibration, sweep.admm)
            x_hat, iterations, converged, wall_ms = report.x_hat, report.iterations, report.converged, report.wall_ms
        except ValueError as e:
            logger.warning("Model %s failed at %s=%s trial %d: %s", name, sweep.swept, value, trial, e)
            x_hat, iterations, converged, wall_ms = np.zeros(system.N), 0, False, 0.0
        rows.append(SweepRow(
            value_index=value_index,
            swept_value=value,
            model_index=model_index,
            model=name,
            trial=trial,
            snr_db=snr(x_hat, instance.x_star),
            saturation_ratio=ratio,
            iterations=iterations,
            converged=converged,
            wall_ms=wall_ms if sweep.record_wall_time else None,
            saturation_level=instance.quantizer.saturation_level,
        ))
    return rows


def run_sweep(sweep, threads=1):
    """
    Run every (value, trial) unit, optionally on a thread pool; instance seeds
    depend only on the master seed and the unit's indices.
    """
    units = [(value_index, trial) for value_index in range(len(sweep.values)) for trial in range(sweep.trials)]
    logger.info("Sweeping %s over %d values x %d trials x %d models",
                sweep.swept, len(sweep.values), sweep.trials, len(sweep.models))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda unit: _run_trial(sweep, *unit), units))
    else:
        parts = [_run_trial(sweep, *unit) for unit in units]
    rows = [row for part in parts for row in part]
    non_converged = sum(not row.converged for row in rows)
    if non_converged:
        logger.info("%d of %d solves did not converge", non_converged, len(rows))
    return SweepResult(config=sweep, rows=rows)


def compare_models(result):
    """
    Rank models by mean SNR at each swept value. Each model's gap to the best
    carries the standard error of the trial-paired differences; a gap within
    two standard errors counts as tied with the best.
    """
    by_value = {}
    for (value_index, model_index), group in sorted(_group(result.rows).items()):
        by_value.setdefault(value_index, []).append((model_index, sorted(group, key=lambda row: row.trial)))

    summary = []
    for value_index, entries in sorted(by_value.items()):
        means = {model_index: float(np.mean([row.snr_db for row in group])) for model_index, group in entries}
        ordered = sorted(entries, key=lambda entry: (-means[entry[0]], entry[0]))
        best_index, best_group = ordered[0]
        best_snr = np.array([row.snr_db for row in best_group])
        ranking = []
        for rank, (model_index, group) in enumerate(ordered, start=1):
            diffs = best_snr - np.array([row.snr_db for row in group])
            se = float(np.std(diffs, ddof=1) / math.sqrt(diffs.size)) if diffs.size > 1 else 0.0
            gap = float(np.mean(diffs))
            ranking.append({
                'rank': rank,
                'model': group[0].model,
                'mean_snr': means[model_index],
                'gap_to_best': gap,
                'paired_se': se,
                'tied_with_best': gap <= 2 * se,
            })
        summary.append({'swept_value': entries[0][1][0].swept_value, 'ranking': ranking})
    return summary


def aggregate_path(path):
    path = Path(path)
    return path.with_name(f'{path.stem}_agg{path.suffix or ".csv"}')


def write_sweep_csv(result, path):
    """Write the per-trial rows to path and the aggregates to <stem>_agg.csv."""
    path = Path(path)
    with path.open('w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(CSV_HEADER)
        for row in result.rows:
            writer.writerow(row.csv_fields())
    agg = aggregate_path(path)
    with agg.open('w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(AGG_HEADER)
        for row in result.aggregates:
            writer.writerow(row.csv_fields())
    return path, agg
