# Description: The main file of the application. Builds the Flask app, the run registry database and the CLI.
import logging

from flask import Flask, jsonify
from werkzeug.exceptions import HTTPException

from cli import register_commands
from config import DEFAULT_SETTINGS
from getSettings import get_settings
from instance_management import instance_management_blueprint
from logs import logging_blueprint
from models import db
from reconstruction_management import reconstruction_management_blueprint
from sweep_management import sweep_management_blueprint


def create_app(settings=None):
    app = Flask(__name__)

    # Explicit settings (tests) replace the settings file
    if settings is None:
        app.config.update(get_settings())
    else:
        app.config.update({**DEFAULT_SETTINGS, **settings})

    logging.basicConfig(level=app.config['LOG_LEVEL'],
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    db.init_app(app)  # Initialize db with the app context

    # Register the blueprints
    app.register_blueprint(instance_management_blueprint, url_prefix='/instances')
    app.register_blueprint(reconstruction_management_blueprint, url_prefix='/reconstruction')
    app.register_blueprint(sweep_management_blueprint, url_prefix='/sweeps')
    app.register_blueprint(logging_blueprint, url_prefix='/logging')

    @app.errorhandler(HTTPException)
    def handle_http_error(e):
        return jsonify({"msg": e.description}), e.code

    register_commands(app)

    with app.app_context():
        db.create_all()

    return app


if __name__ == '__main__':
    create_app().run(host='0.0.0.0', port=5000)
