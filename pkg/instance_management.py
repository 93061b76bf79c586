# instance_management.py

from flask import Blueprint, request, jsonify

from logs import log_action
from measurement_model import ProblemInstance, QuantizerConfig, generate_instance, partition

instance_management_blueprint = Blueprint('instance_management', __name__)

GENERATE_FIELDS = ('N', 'M', 'S', 'bits', 'saturation_level')


def load_instance(data):
    """Instance document from a request body; raises KeyError/ValueError when malformed."""
    instance_data = data.get('instance') if isinstance(data, dict) else None
    if not isinstance(instance_data, dict):
        raise ValueError("Missing instance document")
    return ProblemInstance.from_dict(instance_data)


def generate_instance_logic(data):
    missing = [name for name in GENERATE_FIELDS if data.get(name) is None]
    if missing:
        return {"msg": f"Missing required instance data: {', '.join(missing)}"}, 400

    try:
        quantizer = QuantizerConfig(bits=data['bits'], saturation_level=float(data['saturation_level']))
        instance = generate_instance(
            N=int(data['N']),
            M=int(data['M']),
            S=int(data['S']),
            R=float(data.get('R', 10.0)),
            cfg=quantizer,
            seed=int(data.get('seed', 0)),
        )
    except (ValueError, TypeError) as e:
        return {"msg": str(e)}, 400
    return instance.to_dict(), 201


def partition_logic(data):
    try:
        instance = load_instance(data)
    except (KeyError, ValueError, TypeError) as e:
        return {"msg": f"Invalid instance: {e}"}, 400
    system = partition(instance)
    payload = system.to_dict()
    payload['tilde_index'] = system.tilde_index.tolist()
    payload['plus_index'] = system.plus_index.tolist()
    payload['minus_index'] = system.minus_index.tolist()
    return payload, 200


@instance_management_blueprint.route('/generate', methods=['POST'])
def generate():
    data = request.get_json(silent=True) or {}
    payload, status = generate_instance_logic(data)
    if status == 201:
        log_action('api', 'generate_instance',
                   f"N={payload['N']} M={payload['M']} S={payload['S']} seed={payload['seed']}")
    return jsonify(payload), status


@instance_management_blueprint.route('/partition', methods=['POST'])
def partition_instance():
    data = request.get_json(silent=True) or {}
    payload, status = partition_logic(data)
    if status == 200:
        log_action('api', 'partition_instance', f"M_tilde={payload['M_tilde']} M_bar={payload['M_bar']}")
    return jsonify(payload), status
