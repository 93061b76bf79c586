import os

import pytest

# no saturation: G - Delta is far above |Phi x*|
CLEAN_INSTANCE = {'N': 12, 'M': 10, 'S': 2, 'bits': 8, 'saturation_level': 10.0, 'R': 1.0, 'seed': 7}
SATURATED_INSTANCE = {'N': 12, 'M': 10, 'S': 2, 'bits': 3, 'saturation_level': 1.0, 'R': 1.0, 'seed': 7}

SWEEP_CONFIG = {
    'swept': 'B',
    'values': [3],
    'fixed': {'N': 12, 'M': 10, 'S': 2, 'G': 3.0, 'R': 1.0, 'P': 1.0},
    'models': ['LassoInf', 'Linf'],
    'trials': 2,
    'master_seed': 4,
}


@pytest.fixture
def instance_doc(client):
    response = client.post('/instances/generate', json=CLEAN_INSTANCE)
    assert response.status_code == 201
    return response.get_json()


def test_generate_instance(client):
    response = client.post('/instances/generate', json=SATURATED_INSTANCE)
    assert response.status_code == 201
    data = response.get_json()
    assert (data['N'], data['M'], data['S'], data['seed']) == (12, 10, 2, 7)
    assert len(data['recorded']) == 10
    assert data['quantizer']['bits'] == 3


def test_generate_instance_is_deterministic(client):
    first = client.post('/instances/generate', json=CLEAN_INSTANCE).get_json()
    second = client.post('/instances/generate', json=CLEAN_INSTANCE).get_json()
    assert first == second


@pytest.mark.parametrize('body', [
    {'N': 12, 'M': 10, 'S': 2, 'bits': 3},
    {**CLEAN_INSTANCE, 'bits': 0},
    {**CLEAN_INSTANCE, 'S': 20},
    {**CLEAN_INSTANCE, 'saturation_level': 'high'},
])
def test_generate_instance_rejects_bad_input(client, body):
    response = client.post('/instances/generate', json=body)
    assert response.status_code == 400
    assert 'msg' in response.get_json()


def test_partition_instance(client):
    instance = client.post('/instances/generate', json=SATURATED_INSTANCE).get_json()
    response = client.post('/instances/partition', json={'instance': instance})
    assert response.status_code == 200
    data = response.get_json()
    assert data['M_tilde'] + data['M_bar'] == 10
    assert data['M_bar'] == data['M_bar_plus'] + data['M_bar_minus']
    assert sorted(data['tilde_index'] + data['plus_index'] + data['minus_index']) == list(range(10))
    assert data['Delta'] == 0.25


def test_partition_requires_instance(client):
    response = client.post('/instances/partition', json={})
    assert response.status_code == 400
    assert response.get_json()['msg'].startswith('Invalid instance')


def test_solve_with_oracle_parameters(client, instance_doc):
    response = client.post('/reconstruction/solve', json={'instance': instance_doc})
    assert response.status_code == 200
    data = response.get_json()
    assert data['model'] == 'LassoInf'
    assert data['report']['converged']
    assert data['calibration']['method'] == 'oracle'
    assert len(data['report']['x_hat']) == 12
    assert data['snr_db'] > 0


@pytest.mark.parametrize('model', ['Linf', 'L2', 'Dantzig', 'L2DantzigInf', 'Lasso'])
def test_solve_presets(client, instance_doc, model):
    response = client.post('/reconstruction/solve', json={'instance': instance_doc, 'model': model})
    assert response.status_code == 200
    assert response.get_json()['model'] == model


def test_solve_custom_model(client, instance_doc):
    body = {'instance': instance_doc, 'model': {'preset': 'custom', 'use_linf': True}}
    response = client.post('/reconstruction/solve', json=body)
    assert response.status_code == 200
    assert response.get_json()['model'] == 'custom'


def test_solve_with_explicit_parameters(client, instance_doc):
    body = {'instance': instance_doc, 'params': {'lambda': 1.5}}
    data = client.post('/reconstruction/solve', json=body).get_json()
    assert data['params']['lambda'] == 1.5
    assert data['calibration'] is None


@pytest.mark.parametrize('extra', [
    {'model': 'Basis'},
    {'params': {'epsilon': 1.0}},
    {'model': 'L2', 'params': {'lambda': 1.0}},
    {'options': {'mu': 0.5}},
])
def test_solve_rejects_bad_requests(client, instance_doc, extra):
    response = client.post('/reconstruction/solve', json={'instance': instance_doc, **extra})
    assert response.status_code == 400
    assert 'msg' in response.get_json()


def test_calibrate(client, instance_doc):
    body = {'instance': instance_doc, 'confidence': 0.9, 'samples': 2000, 'seed': 3}
    response = client.post('/reconstruction/calibrate', json=body)
    assert response.status_code == 200
    data = response.get_json()
    assert data['method'] == 'empirical'
    assert data['samples'] == 2000
    assert data['epsilon'] > 0 and data['lambda'] > 0
    assert client.post('/reconstruction/calibrate', json=body).get_json() == data


def test_calibrate_rejects_unknown_method(client, instance_doc):
    response = client.post('/reconstruction/calibrate', json={'instance': instance_doc, 'method': 'bayes'})
    assert response.status_code == 400


def test_bounds(client, instance_doc):
    response = client.post('/reconstruction/bounds', json={'instance': instance_doc})
    assert response.status_code == 200
    data = response.get_json()
    assert data['bounds']['s'] == 2 and data['bounds']['l'] == 2
    support = [index for index, value in enumerate(instance_doc['x_star']) if value != 0]
    assert data['T0'] == support
    assert data['measured_error'] >= 0
    if data['bounds']['valid']:
        assert data['within_bound'] is not None
    else:
        assert data['within_bound'] is None
    assert 'A0' in data['table']


def test_bounds_without_solve(client, instance_doc):
    body = {'instance': instance_doc, 's': 1, 'l': 1, 'lambda': 2.0, 'solve': False}
    data = client.post('/reconstruction/bounds', json=body).get_json()
    assert data['lambda'] == 2.0
    assert len(data['T0']) == 1
    assert 'measured_error' not in data


def test_bounds_budget_exceeded(client, instance_doc):
    response = client.post('/reconstruction/bounds', json={'instance': instance_doc, 'budget': 10})
    assert response.status_code == 422
    assert 'budget' in response.get_json()['msg']


def test_bounds_rejects_bad_partition(client, instance_doc):
    response = client.post('/reconstruction/bounds', json={'instance': instance_doc, 's': 2, 'T0': [0]})
    assert response.status_code == 400


def test_run_sweep(client, app):
    response = client.post('/sweeps/run_sweep', json=SWEEP_CONFIG)
    assert response.status_code == 201
    data = response.get_json()
    assert data['status'] == 'Completed'
    assert data['row_count'] == 4
    assert data['master_seed'] == 4
    assert data['csv_path'] == os.path.join(app.config['RESULTS_DIR'], f"sweep_{data['id']}.csv")
    assert os.path.exists(data['csv_path']) and os.path.exists(data['agg_path'])
    assert len(data['aggregates']) == 2
    assert [entry['rank'] for entry in data['ranking'][0]['ranking']] == [1, 2]

    listed = client.get('/sweeps/get_sweeps').get_json()
    assert [sweep['id'] for sweep in listed] == [data['id']]
    assert 'aggregates' not in listed[0]
    fetched = client.get(f"/sweeps/get_sweep/{data['id']}").get_json()
    assert fetched['aggregates'] == data['aggregates']


def test_run_sweep_with_threads_matches_serial(client):
    serial = client.post('/sweeps/run_sweep', json=SWEEP_CONFIG).get_json()
    pooled = client.post('/sweeps/run_sweep?threads=2', json=SWEEP_CONFIG).get_json()
    with open(serial['csv_path'], 'rb') as first, open(pooled['csv_path'], 'rb') as second:
        assert first.read() == second.read()


def test_run_sweep_rejects_bad_config(client):
    assert client.post('/sweeps/run_sweep', json={}).status_code == 400
    response = client.post('/sweeps/run_sweep', json={**SWEEP_CONFIG, 'models': ['Basis']})
    assert response.status_code == 400
    assert response.get_json()['msg'].startswith('Invalid sweep config')
    assert client.get('/sweeps/get_sweeps').get_json() == []


def test_missing_sweep(client):
    response = client.get('/sweeps/get_sweep/99')
    assert response.status_code == 404
    assert response.get_json() == {'msg': 'Sweep not found'}


def test_unknown_route_returns_json(client):
    response = client.get('/instances/nothing')
    assert response.status_code == 404
    assert 'msg' in response.get_json()


def test_actions_are_logged(client, instance_doc):
    client.post('/instances/partition', json={'instance': instance_doc})
    logs = client.get('/logging/get_logs').get_json()
    assert [log['action'] for log in logs] == ['generate_instance', 'partition_instance']
    assert all(log['source'] == 'api' for log in logs)
    assert client.get('/logging/actions').get_json() == ['generate_instance', 'partition_instance']
    assert len(client.get('/logging/action/partition_instance').get_json()) == 1


def test_search_logs(client, instance_doc):
    assert len(client.get('/logging/search_logs?details=seed=7').get_json()) == 1
    assert client.get('/logging/search_logs?source=cli').get_json() == []
    everything = client.get('/logging/search_logs', query_string={'action': 'All Actions', 'start_date': '2000-01-01'})
    assert len(everything.get_json()) == 1
    assert client.get('/logging/search_logs?end_date=2000-01-01T00:00:00').get_json() == []
    assert client.get('/logging/search_logs?start_date=yesterday').status_code == 400


def test_failed_requests_are_not_logged(client):
    client.post('/instances/generate', json={})
    assert client.get('/logging/get_logs').get_json() == []


def test_logs_by_source_and_limit(client, instance_doc):
    client.post('/instances/partition', json={'instance': instance_doc})
    assert len(client.get('/logging/source/api').get_json()) == 2
    assert client.get('/logging/source/cli').get_json() == []
    assert client.get('/logging/source/cron').status_code == 404
    latest = client.get('/logging/get_logs?limit=1').get_json()
    assert [log['action'] for log in latest] == ['partition_instance']


def test_log_action_rejects_unknown_source(app):
    from logs import log_action
    with app.app_context(), pytest.raises(ValueError):
        log_action('cron', 'run_sweep')
