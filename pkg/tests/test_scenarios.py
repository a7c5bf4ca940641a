import numpy as np
import pytest

from smide.app.scenarios import (
    RUN_CONFIG,
    check_directory,
    design_scenario,
    get_scenario,
    load_scenario_config,
    run_many,
    run_scenario,
    scenario_names,
)
from smide.lib.errors import ConfigError, UnknownScenarioError

ALL = [
    'relay-scalar',
    'relay-linear-ex2',
    'switching-ex3',
    'nonunique-ex5',
    'two-kind-ex7',
    'delay-ide-4.1',
    'delay-ide-4.1-feasible',
    'heat-paper',
    'heat-paper-plateau',
    'heat-ide-reduced',
]


def failures(run):
    return [f'{c.name}: {c.value} vs {c.threshold} {c.detail}' for c in run.report.failures()]


def test_registry():
    assert scenario_names() == ALL
    with pytest.raises(UnknownScenarioError, match='unknown scenario'):
        get_scenario('relay-quadratic')


def test_relay_scalar_passes_and_writes_artifacts(tmp_path):
    run = run_scenario('relay-scalar', output_dir=tmp_path)
    assert run.report.passed, failures(run)
    for name in ('trajectory.csv', 'report.txt', 'report.json', RUN_CONFIG):
        assert (tmp_path / name).exists()
    # no plant to design
    assert not (tmp_path / 'design.json').exists()
    assert check_directory(tmp_path).passed


def test_stored_runs_are_re_evaluated(tmp_path):
    run_scenario('relay-scalar', ['control.rho=0.4'], output_dir=tmp_path)
    report = check_directory(tmp_path)
    assert not report.passed
    assert report.failures()[0].name == 'gain dominates the perturbation'


def test_check_needs_a_run_directory(tmp_path):
    with pytest.raises(ConfigError, match=RUN_CONFIG):
        check_directory(tmp_path)
    run_scenario('relay-scalar', output_dir=tmp_path / 'bare', emit=('design',))
    with pytest.raises(ConfigError, match='main trajectory'):
        check_directory(tmp_path / 'bare')


def test_bad_overrides_and_emit_flags():
    with pytest.raises(ConfigError):
        run_scenario('relay-scalar', ['control.gain=2'])
    with pytest.raises(ConfigError):
        run_scenario('relay-scalar', emit=('plots',))


def test_design_needs_a_plant():
    with pytest.raises(ConfigError, match='declares no plant'):
        design_scenario('relay-scalar')
    result = design_scenario('delay-ide-4.1')
    assert not result.feasible
    assert result.rho == 4.0


def test_scenario_config_file(tmp_path):
    path = tmp_path / 'run.toml'
    path.write_text('scenario = "relay-scalar"\n\n[control]\nrho = 2.0\n')
    name, params = load_scenario_config(path)
    assert name == 'relay-scalar'
    assert params.control.rho == 2.0
    assert params.simulation.h == 1e-3
    run = run_scenario(name, params=params)
    assert run.params.control.rho == 2.0

    nameless = tmp_path / 'nameless.toml'
    nameless.write_text('[control]\nrho = 2.0\n')
    with pytest.raises(ConfigError, match='scenario'):
        load_scenario_config(nameless)


def test_run_many_reports_aborted_scenarios(tmp_path):
    # explicit Euler on 60 modes is unstable at h = 1e-3
    reports = run_many(['heat-paper'], tmp_path, overrides=['run.scheme=euler'])
    assert reports['heat-paper'].failures()[0].name == 'scenario completed'


def test_run_many_writes_one_directory_per_scenario(tmp_path):
    reports = run_many(['relay-scalar'], tmp_path)
    assert reports['relay-scalar'].passed
    assert (tmp_path / 'relay-scalar' / 'report.txt').exists()


@pytest.mark.slow
@pytest.mark.parametrize('name', ALL)
def test_reference_runs_pass(name, tmp_path):
    run = run_scenario(name, output_dir=tmp_path)
    assert run.report.passed, failures(run)
    assert check_directory(tmp_path).passed


@pytest.mark.slow
def test_delay_reaching_and_memoryless_comparison():
    run = run_scenario('delay-ide-4.1', ['indicator.enabled=false'])
    assert set(run.trajectories) == {'trajectory', 'memoryless'}
    assert any('reaching time' in note for note in run.report.notes)


def test_reruns_are_bit_identical(tmp_path):
    first = run_scenario('relay-scalar', output_dir=tmp_path / 'first')
    second = run_scenario('relay-scalar', output_dir=tmp_path / 'second')
    for name, traj in first.trajectories.items():
        assert np.array_equal(traj.states, second.trajectories[name].states)
    csv = 'trajectory.csv'
    assert (tmp_path / 'first' / csv).read_bytes() == (tmp_path / 'second' / csv).read_bytes()


def test_heat_paper_records_the_constants_it_misses():
    run = run_scenario('heat-paper')
    flagged = [note for note in run.report.notes if note.startswith('flagged: ')]
    assert sorted(note.split(' ')[1] for note in flagged) == ['CB', 'norm_beta']
    names = [check.name for check in run.report.checks]
    assert not any('relative to' in name for name in names)
    assert not any('gain bound' in name for name in names)
    assert any(note.startswith('distributed design needs rho') for note in run.report.notes)


def test_plateau_variant_checks_the_reference_constants():
    run = run_scenario('heat-paper-plateau')
    names = [check.name for check in run.report.checks]
    assert sum('relative to' in name for name in names) == 3
    assert not any(note.startswith('flagged: ') for note in run.report.notes)


@pytest.mark.slow
def test_heat_reduction_is_compared_under_one_input():
    run = run_scenario('heat-ide-reduced')
    assert set(run.trajectories) == {'trajectory', 'modal', 'replay'}
    replay = [check for check in run.report.checks if check.name == 'reduced IDE vs modal output under one input']
    assert len(replay) == 1 and replay[0].passed
    assert replay[0].threshold < 1e-2
