"""Command-line front end: `smide run | design | check | list`."""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from smide.app import scenarios
from smide.lib.config import get_settings
from smide.lib.errors import ConfigError, SmideError, UnknownScenarioError
from smide.lib.log import configure_logging
from smide.lib.models import CheckReport
from smide.lib.schema import PlantConfig, apply_overrides, load_config

logger = logging.getLogger(__name__)


def _usage(error: SmideError) -> click.UsageError:
    return click.UsageError(str(error))


def _finish(reports: dict[str, CheckReport]) -> None:
    """Exit 1 when any report failed."""
    failed = [name for name, report in reports.items() if not report.passed]
    if failed:
        logger.error(f'failed scenarios: {", ".join(failed)}')
        sys.exit(1)


@click.group()
@click.option(
    '--log-level',
    type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'], case_sensitive=False),
    default=None,
    help='Overrides SMIDE_LOG_LEVEL.',
)
def main(log_level):
    """Sliding-mode control of discontinuous integro-differential equations."""
    settings = get_settings()
    configure_logging((log_level or settings.log_level).upper(), settings.log_file)


@main.command('list')
def list_scenarios():
    """List the registered scenarios."""
    for name, scenario in scenarios.SCENARIOS.items():
        click.echo(f'{name:24} {scenario.description}')


@main.command()
@click.argument('name', required=False)
@click.option('--all', 'run_all', is_flag=True, help='Run every registered scenario.')
@click.option(
    '--config',
    'config_path',
    type=click.Path(dir_okay=False, path_type=Path),
    help='TOML run file with `scenario = "<name>"` and parameter tables.',
)
@click.option('--output-dir', '-o', type=click.Path(file_okay=False, path_type=Path), help='Defaults to SMIDE_OUTPUT_ROOT/<name>.')
@click.option('--set', '-s', 'overrides', multiple=True, metavar='SECTION.KEY=VALUE', help='Override one parameter.')
@click.option(
    '--emit',
    multiple=True,
    type=click.Choice(scenarios.EMITS),
    help='Artifacts to write (repeatable); all by default.',
)
@click.option('--jobs', '-j', default=1, show_default=True, type=click.IntRange(min=1), help='Parallel scenarios with --all.')
def run(name, run_all, config_path, output_dir, overrides, emit, jobs):
    """Run a scenario, write its artifacts and report its checks."""
    emit = emit or scenarios.EMITS
    sources = sum(bool(source) for source in (name, run_all, config_path))
    if sources != 1:
        raise click.UsageError('give exactly one of NAME, --all or --config')
    root = get_settings().output_root
    try:
        if run_all:
            if overrides:
                raise click.UsageError('--set applies to a single scenario; drop it with --all')
            reports = scenarios.run_many(scenarios.scenario_names(), output_dir or root, emit=emit, jobs=jobs)
            for report in reports.values():
                click.echo(report.to_text())
            _finish(reports)
            return
        params = None
        if config_path is not None:
            name, params = scenarios.load_scenario_config(config_path)
        result = scenarios.run_scenario(name, overrides, output_dir or root / name, emit, params)
    except (ConfigError, UnknownScenarioError) as e:
        raise _usage(e) from e
    except SmideError as e:
        logger.error(f'scenario {name} aborted: {e}')
        sys.exit(1)
    click.echo(result.report.to_text())
    click.echo(f'artifacts in {result.directory}')
    _finish({name: result.report})


@main.command()
@click.option('--plant', 'plant_name', help='Scenario whose plant to design for.')
@click.option('--config', 'config_path', type=click.Path(dir_okay=False, path_type=Path), help='TOML plant declaration.')
@click.option('--set', '-s', 'overrides', multiple=True, metavar='SECTION.KEY=VALUE', help='Override one parameter.')
def design(plant_name, config_path, overrides):
    """Run the sliding-mode design and print M, rho and feasibility."""
    if bool(plant_name) == bool(config_path):
        raise click.UsageError('give exactly one of --plant or --config')
    try:
        if plant_name:
            result = scenarios.design_scenario(plant_name, overrides)
        else:
            config = apply_overrides(load_config(config_path, PlantConfig), list(overrides))
            result = scenarios.design_plant_config(config)
    except (ConfigError, UnknownScenarioError) as e:
        raise _usage(e) from e
    except SmideError as e:
        logger.error(f'design aborted: {e}')
        sys.exit(1)
    click.echo(result.summary())


@main.command()
@click.argument('directory', type=click.Path(file_okay=False, path_type=Path))
def check(directory):
    """Re-evaluate the checks of a stored run."""
    try:
        report = scenarios.check_directory(directory)
    except (ConfigError, UnknownScenarioError) as e:
        raise _usage(e) from e
    click.echo(report.to_text())
    _finish({report.scenario: report})
