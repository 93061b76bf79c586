# sweep_management.py

import json
import os

from flask import Blueprint, current_app, request, jsonify

from experiment_harness import SweepConfig, compare_models, run_sweep, write_sweep_csv
from logs import log_action
from models import db, SweepRecord

sweep_management_blueprint = Blueprint('sweep_management', __name__)


def run_sweep_logic(data, threads=None, out=None):
    """
    Validate a sweep config, run it and persist a SweepRecord. The CSV goes to
    out, or to RESULTS_DIR/sweep_<id>.csv.
    """
    try:
        sweep = SweepConfig.from_dict(data)
    except (KeyError, ValueError, TypeError) as e:
        return {"msg": f"Invalid sweep config: {e}"}, 400

    threads = threads or current_app.config['SWEEP_THREADS']
    record = SweepRecord(
        swept=sweep.swept,
        master_seed=str(sweep.master_seed),
        config=json.dumps(sweep.to_dict()),
        status='Running',
    )
    try:
        db.session.add(record)
        db.session.commit()
    except Exception as e:
        db.session.rollback()
        return {"error": str(e)}, 500

    try:
        result = run_sweep(sweep, threads=threads)
        if out is None:
            os.makedirs(current_app.config['RESULTS_DIR'], exist_ok=True)
            out = os.path.join(current_app.config['RESULTS_DIR'], f'sweep_{record.id}.csv')
        csv_path, agg_path = write_sweep_csv(result, out)
    except Exception as e:
        db.session.rollback()
        record.status = 'Failed'
        db.session.commit()
        if isinstance(e, OSError):
            return {"msg": f"Cannot write results: {e}"}, 400
        return {"error": str(e)}, 500

    record.status = 'Completed'
    record.csv_path = str(csv_path)
    record.agg_path = str(agg_path)
    record.row_count = len(result.rows)
    record.non_converged = sum(not row.converged for row in result.rows)
    record.aggregates = json.dumps([row.to_dict() for row in result.aggregates])
    db.session.commit()

    payload = record.to_dict(include_aggregates=True)
    payload['ranking'] = compare_models(result)
    return payload, 201


@sweep_management_blueprint.route('/run_sweep', methods=['POST'])
def run_sweep_route():
    data = request.get_json(silent=True)
    if not data:
        return jsonify({"msg": "Missing sweep config"}), 400
    payload, status = run_sweep_logic(data, threads=request.args.get('threads', type=int))
    if status == 201:
        log_action('api', 'run_sweep', f"id={payload['id']} swept={payload['swept']} rows={payload['row_count']}")
    return jsonify(payload), status


@sweep_management_blueprint.route('/get_sweeps', methods=['GET'])
def get_sweeps():
    sweeps = SweepRecord.query.order_by(SweepRecord.id).all()
    return jsonify([sweep.to_dict() for sweep in sweeps]), 200


@sweep_management_blueprint.route('/get_sweep/<int:sweep_id>', methods=['GET'])
def get_sweep(sweep_id):
    sweep = db.session.get(SweepRecord, sweep_id)
    if sweep:
        return jsonify(sweep.to_dict(include_aggregates=True)), 200
    return jsonify({"msg": "Sweep not found"}), 404
