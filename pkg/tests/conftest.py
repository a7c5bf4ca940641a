import numpy as np
import pytest

from smide.lib.config import reset_settings
from smide.lib.kernels import ConstantKernel, TruncatedKernel
from smide.lib.models import LinearIdePlant
from smide.lib.signals import CosineSignal

# Three-state plant with a unit window of distributed input memory.
DELAY_A = np.array([[-2.0, 4.0, 2.0], [0.0, -3.0, 1.0], [-1.0, 2.0, 1.0]])
DELAY_B = np.array([[0.0], [0.0], [1.0]])
DELAY_C = np.array([[1.0, 0.0, -2.0]])
DELAY_X0 = [1.0, 1.0, -1.1]


def delay_plant(scale: float = 1.0) -> LinearIdePlant:
    kernel = TruncatedKernel(inner=ConstantKernel(matrix=np.eye(3)), delay=1.0)
    if scale != 1.0:
        kernel = kernel.scaled(scale)
    gamma = CosineSignal(amplitude=[0.5], omega=2.0)
    return LinearIdePlant(
        A=DELAY_A,
        B=DELAY_B,
        B_tilde=DELAY_B,
        C=DELAY_C,
        kernel=kernel,
        gamma_bar=gamma.sup_bound(),
        gamma=gamma,
    )


@pytest.fixture
def plant():
    return delay_plant()


@pytest.fixture
def feasible_plant():
    return delay_plant(0.5)


@pytest.fixture(autouse=True)
def clean_settings(monkeypatch):
    """Each test sees settings built from its own environment."""
    for key in ('SMIDE_OUTPUT_ROOT', 'SMIDE_LOG_LEVEL', 'SMIDE_LOG_FILE'):
        monkeypatch.delenv(key, raising=False)
    reset_settings()
    yield
    reset_settings()
