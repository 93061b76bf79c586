# getSettings.py

import json
import os

from config import DEFAULT_SETTINGS


def get_settings(path=None):
    """
    Load the application settings.

    Args:
        path (str): Optional path to a JSON settings document. Falls back to the
            QCS_SETTINGS environment variable, then to the defaults in config.py.

    Returns:
        dict of settings, the JSON document merged over the defaults.
    """
    settings = dict(DEFAULT_SETTINGS)
    path = path or os.environ.get('QCS_SETTINGS')
    if not path:
        return settings

    try:
        with open(path, 'r', encoding='utf-8') as handle:
            loaded = json.load(handle)
    except json.JSONDecodeError as e:
        raise ValueError(f"Malformed settings file {path}: {e}") from e

    if not isinstance(loaded, dict):
        raise ValueError(f"Settings file {path} must contain a JSON object")

    settings.update(loaded)
    return settings
