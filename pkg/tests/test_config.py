import logging

import pytest
from pydantic import Field

from smide.lib.config import Settings, get_settings
from smide.lib.errors import ConfigError
from smide.lib.kernels import TruncatedKernel
from smide.lib.log import TqdmLoggingHandler, configure_logging
from smide.lib.schema import (
    PlantConfig,
    Section,
    SimulationSection,
    apply_overrides,
    load_config,
    parse_override,
    read_toml,
)

PLANT_TOML = """
[plant]
A = [[-2.0, 4.0, 2.0], [0.0, -3.0, 1.0], [-1.0, 2.0, 1.0]]
B = [[0.0], [0.0], [1.0]]
C = [[1.0, 0.0, -2.0]]

[kernel]
kind = "constant"
matrix = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
delay = 1.0

[signals.gamma]
kind = "cosine"
amplitude = [0.5]
omega = 2.0

[simulation]
h = 0.001
horizon = 3.0
x0 = [1.0, 1.0, -1.1]
"""


class Params(Section):
    simulation: SimulationSection = Field(default_factory=lambda: SimulationSection(h=0.01, horizon=1.0, x0=[1.0]))
    rho: float = 4.0


def test_parse_override_reads_toml_values():
    assert parse_override('simulation.h=1e-4') == (['simulation', 'h'], 1e-4)
    assert parse_override('simulation.x0=[1, 2]') == (['simulation', 'x0'], [1, 2])
    assert parse_override('scheme=euler') == (['scheme'], 'euler')
    with pytest.raises(ConfigError):
        parse_override('simulation.h')


def test_apply_overrides():
    params = apply_overrides(Params(), ['simulation.h=0.005', 'rho=6'])
    assert params.simulation.h == 0.005
    assert params.rho == 6.0
    assert apply_overrides(params, []) is params


def test_unknown_or_invalid_overrides_are_rejected():
    with pytest.raises(ConfigError, match='unknown config key'):
        apply_overrides(Params(), ['simulation.step=0.1'])
    with pytest.raises(ConfigError, match='unknown config key'):
        apply_overrides(Params(), ['rho.value=1'])
    with pytest.raises(ConfigError, match='invalid override'):
        apply_overrides(Params(), ['rho=fast'])


def test_plant_config_from_toml(tmp_path):
    path = tmp_path / 'plant.toml'
    path.write_text(PLANT_TOML)
    config = load_config(path, PlantConfig)
    plant = config.build_plant()
    assert isinstance(plant.kernel, TruncatedKernel)
    assert plant.gamma_bar == pytest.approx(0.5)
    # B_tilde defaults to B
    assert (plant.B_tilde == plant.B).all()
    assert config.design.delta == 0.1


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError, match='does not exist'):
        read_toml(tmp_path / 'missing.toml')
    broken = tmp_path / 'broken.toml'
    broken.write_text('[plant\nA = 1')
    with pytest.raises(ConfigError, match='not valid TOML'):
        read_toml(broken)
    extra = tmp_path / 'extra.toml'
    extra.write_text(PLANT_TOML + '\n[extra]\nkey = 1\n')
    with pytest.raises(ConfigError):
        load_config(extra, PlantConfig)


def test_singular_plant_is_a_config_error(tmp_path):
    path = tmp_path / 'plant.toml'
    path.write_text(PLANT_TOML.replace('C = [[1.0, 0.0, -2.0]]', 'C = [[1.0, 0.0, 0.0]]'))
    with pytest.raises(ConfigError, match='invalid plant'):
        load_config(path, PlantConfig).build_plant()


def test_settings_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv('SMIDE_OUTPUT_ROOT', str(tmp_path))
    monkeypatch.setenv('SMIDE_LOG_LEVEL', 'debug')
    settings = get_settings()
    assert settings.output_root == tmp_path
    assert settings.log_level == 'DEBUG'
    assert get_settings() is settings


def test_settings_reject_unknown_levels():
    with pytest.raises(ValueError):
        Settings(log_level='loud')


def test_configure_logging_replaces_handlers(tmp_path):
    log_file = tmp_path / 'logs' / 'smide.log'
    configure_logging('DEBUG', log_file)
    configure_logging('WARNING', log_file)
    logger = logging.getLogger('smide')
    assert logger.level == logging.WARNING
    assert len(logger.handlers) == 2
    assert isinstance(logger.handlers[0], TqdmLoggingHandler)
    logging.getLogger('smide.test').warning('written to the file')
    for handler in logger.handlers:
        handler.flush()
    assert 'written to the file' in log_file.read_text()
    configure_logging('INFO')
