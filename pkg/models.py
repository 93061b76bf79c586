import json
from datetime import datetime

from flask_sqlalchemy import SQLAlchemy

db = SQLAlchemy()


class SweepRecord(db.Model):
    __tablename__ = 'sweep_records'

    id = db.Column(db.Integer, primary_key=True)
    swept = db.Column(db.String(50), nullable=False)
    master_seed = db.Column(db.String(32), nullable=False)
    config = db.Column(db.Text, nullable=False)
    aggregates = db.Column(db.Text, nullable=True, default=None)
    csv_path = db.Column(db.String(255), nullable=True)
    agg_path = db.Column(db.String(255), nullable=True)
    row_count = db.Column(db.Integer, default=0)
    non_converged = db.Column(db.Integer, default=0)
    status = db.Column(db.Enum('Running', 'Completed', 'Failed', name='sweep_status'), default='Running')
    created_at = db.Column(db.DateTime, default=datetime.now)

    def to_dict(self, include_aggregates=False):
        record = {
            'id': self.id,
            'swept': self.swept,
            # 64-bit seeds overflow SQLite integers
            'master_seed': int(self.master_seed),
            'config': json.loads(self.config),
            'csv_path': self.csv_path,
            'agg_path': self.agg_path,
            'row_count': self.row_count,
            'non_converged': self.non_converged,
            'status': self.status,
            'created_at': self.created_at.isoformat() if self.created_at else None,
        }
        if include_aggregates:
            record['aggregates'] = json.loads(self.aggregates) if self.aggregates else []
        return record
