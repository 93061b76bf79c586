# cli.py

import json
import os

import click
from flask.cli import with_appcontext

from instance_management import generate_instance_logic
from logs import log_action
from reconstruction_management import bounds_logic, calibrate_logic, solve_logic
from sweep_management import run_sweep_logic


def _read_json(path):
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            return json.load(handle)
    except json.JSONDecodeError as e:
        raise click.ClickException(f"Malformed JSON in {path}: {e}")
    except OSError as e:
        raise click.ClickException(f"Cannot read {path}: {e}")


def _load_request(config_path, seed=None, threads=None):
    """Request document from --config; an 'instance' given as a path is loaded relative to the config file."""
    data = _read_json(config_path) if config_path else {}
    if not isinstance(data, dict):
        raise click.ClickException("The config document must be a JSON object")
    if isinstance(data.get('instance'), str):
        base = os.path.dirname(os.path.abspath(config_path))
        data['instance'] = _read_json(os.path.join(base, data['instance']))
    if seed is not None:
        data['seed'] = seed
    if threads is not None:
        data['threads'] = threads
    return data


def _emit(payload, out):
    text = json.dumps(payload, indent=2)
    if out:
        try:
            with open(out, 'w', encoding='utf-8') as handle:
                handle.write(text + '\n')
        except OSError as e:
            raise click.ClickException(f"Cannot write {out}: {e}")
    else:
        click.echo(text)


def _check(payload, status):
    if status >= 400:
        raise click.ClickException(payload.get('msg') or payload.get('error') or f"status {status}")


config_option = click.option('--config', 'config_path', type=click.Path(dir_okay=False),
                             help='JSON request document.')
out_option = click.option('--out', type=click.Path(dir_okay=False), help='Output file (stdout when omitted).')
seed_option = click.option('--seed', type=click.IntRange(0, 2 ** 64 - 1), help='Seed override.')
threads_option = click.option('--threads', type=click.IntRange(1), help='Worker threads.')


@click.command('gen')
@config_option
@out_option
@seed_option
@with_appcontext
def gen_command(config_path, out, seed):
    """Generate a synthetic instance and emit it as JSON."""
    data = _load_request(config_path, seed=seed)
    payload, status = generate_instance_logic(data)
    _check(payload, status)
    _emit(payload, out)
    log_action('cli', 'generate_instance', f"N={payload['N']} M={payload['M']} seed={payload['seed']}")


@click.command('solve')
@config_option
@out_option
@seed_option
@click.option('--trace', type=click.Path(dir_okay=False), help='CSV file receiving the per-iteration trace.')
@with_appcontext
def solve_command(config_path, out, seed, trace):
    """Solve one instance with one model and emit the SolveReport JSON."""
    data = _load_request(config_path, seed=seed)
    if trace:
        try:
            with open(trace, 'w', newline='') as handle:
                payload, status = solve_logic(data, trace=handle)
        except OSError as e:
            raise click.ClickException(f"Cannot write {trace}: {e}")
    else:
        payload, status = solve_logic(data)
    _check(payload, status)
    _emit(payload, out)
    if not payload['report']['converged']:
        click.echo(f"warning: {payload['model']} did not converge", err=True)
    log_action('cli', 'solve', f"model={payload['model']} converged={payload['report']['converged']}")


@click.command('calibrate')
@config_option
@out_option
@seed_option
@threads_option
@with_appcontext
def calibrate_command(config_path, out, seed, threads):
    """Calibrate (epsilon, lambda) for an instance."""
    data = _load_request(config_path, seed=seed, threads=threads)
    payload, status = calibrate_logic(data)
    _check(payload, status)
    _emit(payload, out)
    log_action('cli', 'calibrate', f"method={payload['method']}")


@click.command('bounds')
@config_option
@out_option
@seed_option
@with_appcontext
def bounds_command(config_path, out, seed):
    """Evaluate the error bounds; prints JSON and a table."""
    data = _load_request(config_path, seed=seed)
    payload, status = bounds_logic(data)
    _check(payload, status)
    table = payload.pop('table')
    _emit(payload, out)
    click.echo(table, err=bool(out is None))
    log_action('cli', 'bounds', f"valid={payload['bounds']['valid']}")


@click.command('sweep')
@config_option
@out_option
@seed_option
@threads_option
@with_appcontext
def sweep_command(config_path, out, seed, threads):
    """Run a parameter sweep; writes the row CSV and its _agg sibling."""
    if not config_path:
        raise click.ClickException("sweep needs --config")
    data = _read_json(config_path)
    if not isinstance(data, dict):
        raise click.ClickException("The config document must be a JSON object")
    if seed is not None:
        data['master_seed'] = seed
    payload, status = run_sweep_logic(data, threads=threads, out=out)
    _check(payload, status)
    click.echo(f"{payload['row_count']} rows written to {payload['csv_path']} "
               f"({payload['non_converged']} not converged)")
    log_action('cli', 'run_sweep', f"id={payload['id']} rows={payload['row_count']}")


def register_commands(app):
    for command in (gen_command, solve_command, calibrate_command, bounds_command, sweep_command):
        app.cli.add_command(command)
