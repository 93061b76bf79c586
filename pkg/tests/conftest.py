import json

import pytest

from app import create_app
from measurement_model import QuantizerConfig, generate_instance, partition


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='run full-size Monte Carlo and sweep tests')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


def small_instances(count, N=8, M=6, S=2, bits=3, saturation_level=2.0, R=1.0, first_seed=0):
    """Instances with at least two unsaturated rows, drawn from consecutive seeds."""
    instances = []
    seed = first_seed
    while len(instances) < count:
        instance = generate_instance(N, M, S, R, QuantizerConfig(bits, saturation_level), seed)
        if partition(instance).M_tilde >= 2:
            instances.append(instance)
        seed += 1
    return instances


@pytest.fixture
def instance():
    return small_instances(1, first_seed=7)[0]


@pytest.fixture
def system(instance):
    return partition(instance)


@pytest.fixture
def app(tmp_path):
    app = create_app({
        'TESTING': True,
        'SQLALCHEMY_DATABASE_URI': 'sqlite://',
        'RESULTS_DIR': str(tmp_path / 'results'),
        'CALIBRATION_SAMPLES': 2000,
    })
    yield app


@pytest.fixture
def client(app):
    return app.test_client()


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture
def write_json(tmp_path):
    def write(name, document):
        path = tmp_path / name
        path.write_text(json.dumps(document))
        return path
    return write
