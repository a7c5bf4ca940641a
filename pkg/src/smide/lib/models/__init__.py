"""Data records shared across the library: trajectories, run settings, designs, reports."""

from smide.lib.models.plant import DesignResult, LinearIdePlant
from smide.lib.models.report import Check, CheckReport
from smide.lib.models.simulation import HistoryMode, SimConfig
from smide.lib.models.trajectory import Trajectory

__all__ = [
    'Check',
    'CheckReport',
    'DesignResult',
    'HistoryMode',
    'LinearIdePlant',
    'SimConfig',
    'Trajectory',
]
