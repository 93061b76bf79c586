# reconstruction_management.py

import numpy as np
from flask import Blueprint, current_app, request, jsonify

from admm_lasso_inf import AdmmOptions, solve_lasso_inf, with_trace
from analysis import BudgetExceededError, bound_report, format_bound_table, snr
from calibration import calibrate
from constrained_l1 import ModelSpec, PRESETS, preset, solve_constrained
from instance_management import load_instance
from logs import log_action
from measurement_model import partition

reconstruction_management_blueprint = Blueprint('reconstruction_management', __name__)


def _calibration(system, instance, data):
    """Explicit params win; otherwise calibrate (oracle unless a confidence below 1 is given)."""
    params = data.get('params')
    if params:
        return None, {'epsilon': params.get('epsilon'), 'lambda': params.get('lambda')}
    result = calibrate(
        system,
        method=data.get('method', 'oracle'),
        confidence=float(data.get('confidence', 1.0)),
        x_star=instance.x_star,
        n_samples=int(data.get('samples', current_app.config['CALIBRATION_SAMPLES'])),
        seed=int(data.get('seed', 0)),
        threads=int(data.get('threads', 1)),
    )
    return result, result.params


def solve_logic(data, trace=None):
    try:
        instance = load_instance(data)
        system = partition(instance)
        model = data.get('model', 'LassoInf')
        options = AdmmOptions.from_dict(data.get('options'))
        if trace is not None:
            options = with_trace(options, trace)
        calibration, params = _calibration(system, instance, data)

        if model == 'LassoInf':
            if params.get('lambda') is None:
                return {"msg": "LassoInf needs parameter 'lambda'"}, 400
            report = solve_lasso_inf(system, float(params['lambda']), options)
        elif model in PRESETS:
            report = solve_constrained(system, preset(model, params), options)
        elif isinstance(model, dict):
            report = solve_constrained(system, ModelSpec.from_dict(model), options)
        else:
            return {"msg": f"Unknown model {model!r}"}, 400
    except (KeyError, ValueError, TypeError) as e:
        return {"msg": str(e)}, 400

    return {
        'model': report.model,
        'report': report.to_dict(),
        'params': params,
        'calibration': calibration.to_dict() if calibration else None,
        'snr_db': snr(report.x_hat, instance.x_star),
    }, 200


def calibrate_logic(data):
    try:
        instance = load_instance(data)
        system = partition(instance)
        result = calibrate(
            system,
            method=data.get('method', 'empirical'),
            confidence=float(data.get('confidence', 0.95)),
            x_star=instance.x_star,
            n_samples=int(data.get('samples', current_app.config['CALIBRATION_SAMPLES'])),
            seed=int(data.get('seed', 0)),
            threads=int(data.get('threads', 1)),
        )
    except (KeyError, ValueError, TypeError) as e:
        return {"msg": str(e)}, 400
    return result.to_dict(), 200


def _default_support(x_star, s):
    support = np.flatnonzero(x_star)
    if support.size == s:
        return support
    return np.sort(np.argsort(-np.abs(x_star), kind='stable')[:s])


def bounds_logic(data):
    """
    Error bounds for one instance. With 'solve' set (default) the LASSO-infinity
    solution at the same lambda is computed and its error reported next to the bounds.
    """
    try:
        instance = load_instance(data)
        system = partition(instance)
        s = int(data.get('s', instance.S))
        l = int(data.get('l', s))
        if s < 1 or l < 1:
            return {"msg": "s and l must be positive"}, 400
        T0 = np.asarray(data['T0'], dtype=int) if data.get('T0') is not None else _default_support(instance.x_star, s)
        if T0.size != s or np.unique(T0).size != s or np.any((T0 < 0) | (T0 >= instance.N)):
            return {"msg": f"T0 must hold {s} distinct indices in [0, {instance.N})"}, 400
        if 'lambda' in data:
            lam = float(data['lambda'])
        else:
            lam = calibrate(system, 'oracle', 1.0, x_star=instance.x_star).lam
        mode = data.get('mode', 'exhaustive')
        report = bound_report(system, instance.x_star, T0, s, l, lam, mode=mode,
                              n_samples=int(data.get('samples', 2000)), seed=int(data.get('seed', 0)),
                              budget=int(data.get('budget', current_app.config['RHO_SUBSET_BUDGET'])))
    except BudgetExceededError as e:
        return {"msg": str(e)}, 422
    except (KeyError, ValueError, TypeError) as e:
        return {"msg": str(e)}, 400

    payload = {'bounds': report.to_dict(), 'lambda': lam, 'T0': [int(i) for i in T0],
               'table': format_bound_table(report)}
    if data.get('solve', True) and system.M_tilde:
        solved = solve_lasso_inf(system, lam, AdmmOptions.from_dict(data.get('options')))
        error = float(np.linalg.norm(solved.x_hat - instance.x_star))
        payload['measured_error'] = error
        payload['converged'] = solved.converged
        payload['within_bound'] = None if report.bound is None else error <= report.bound
    return payload, 200


@reconstruction_management_blueprint.route('/solve', methods=['POST'])
def solve():
    data = request.get_json(silent=True) or {}
    try:
        payload, status = solve_logic(data)
    except Exception as e:
        return jsonify({"error": str(e)}), 500
    if status == 200:
        log_action('api', 'solve', f"model={payload['model']} converged={payload['report']['converged']} "
                                   f"snr_db={payload['snr_db']:.3f}")
    return jsonify(payload), status


@reconstruction_management_blueprint.route('/calibrate', methods=['POST'])
def calibrate_parameters():
    data = request.get_json(silent=True) or {}
    payload, status = calibrate_logic(data)
    if status == 200:
        log_action('api', 'calibrate', f"method={payload['method']} epsilon={payload['epsilon']:.6g} "
                                       f"lambda={payload['lambda']:.6g}")
    return jsonify(payload), status


@reconstruction_management_blueprint.route('/bounds', methods=['POST'])
def bounds():
    data = request.get_json(silent=True) or {}
    payload, status = bounds_logic(data)
    if status == 200:
        log_action('api', 'bounds', f"s={payload['bounds']['s']} l={payload['bounds']['l']} "
                                    f"valid={payload['bounds']['valid']}")
    return jsonify(payload), status
