import logging
from datetime import datetime

from flask import Blueprint, jsonify, request

from models import db

logger = logging.getLogger(__name__)

logging_blueprint = Blueprint('logging', __name__)

SOURCES = ('api', 'cli')


class ActionLog(db.Model):
    """One completed operation, recorded from the API or the CLI."""
    __tablename__ = 'action_log'
    id = db.Column(db.Integer, primary_key=True)
    source = db.Column(db.String(20), nullable=False)
    action = db.Column(db.String(255), nullable=False)
    details = db.Column(db.Text, nullable=True, default=None)
    timestamp = db.Column(db.DateTime, default=datetime.now)

    def to_dict(self):
        return {
            'id': self.id,
            'source': self.source,
            'action': self.action,
            'details': self.details,
            'timestamp': self.timestamp.isoformat() if self.timestamp else None
        }


def log_action(source, action, details=None):
    if source not in SOURCES:
        raise ValueError(f"Unknown log source: {source}")
    entry = ActionLog(source=source, action=action, details=details, timestamp=datetime.now())

    # a failed audit write never fails the operation it records
    try:
        db.session.add(entry)
        db.session.commit()
    except Exception as e:
        db.session.rollback()
        logger.error("Failed to record action %s from %s: %s", action, source, e)


def _limited(query):
    limit = request.args.get('limit', type=int)
    query = query.order_by(ActionLog.id)
    if limit is not None and limit > 0:
        # newest entries, still returned oldest first
        ids = [row.id for row in query.with_entities(ActionLog.id).all()[-limit:]]
        query = query.filter(ActionLog.id.in_(ids))
    return [entry.to_dict() for entry in query.all()]


@logging_blueprint.route('/get_logs', methods=['GET'])
def get_all_logs():
    return jsonify(_limited(ActionLog.query)), 200


@logging_blueprint.route('/source/<string:source>', methods=['GET'])
def get_logs_for_source(source):
    if source not in SOURCES:
        return jsonify({"msg": f"Source must be one of {', '.join(SOURCES)}"}), 404
    return jsonify(_limited(ActionLog.query.filter_by(source=source))), 200


@logging_blueprint.route('/action/<string:action>', methods=['GET'])
def get_logs_for_action(action):
    return jsonify(_limited(ActionLog.query.filter_by(action=action))), 200


@logging_blueprint.route('/actions', methods=['GET'])
def get_unique_actions():
    rows = ActionLog.query.with_entities(ActionLog.action).distinct()
    return jsonify(sorted(row.action for row in rows)), 200


@logging_blueprint.route('/search_logs', methods=['GET'])
def search_logs():
    try:
        start = datetime.fromisoformat(request.args['start_date']) if request.args.get('start_date') else None
        end = datetime.fromisoformat(request.args['end_date']) if request.args.get('end_date') else None
    except ValueError:
        return jsonify({"msg": "Dates must be ISO 8601"}), 400

    query = ActionLog.query
    if start:
        query = query.filter(ActionLog.timestamp >= start)
    if end:
        query = query.filter(ActionLog.timestamp <= end)

    action = request.args.get('action')
    if action and action != 'All Actions':
        query = query.filter(ActionLog.action == action)
    if request.args.get('source'):
        query = query.filter(ActionLog.source == request.args['source'])
    if request.args.get('details'):
        query = query.filter(ActionLog.details.like(f"%{request.args['details']}%"))

    return jsonify(_limited(query)), 200
