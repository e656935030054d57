import pytest
import os
import sys

import numpy as np

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from click.testing import CliRunner

from closure import EquationOfState, PhaseParams


MINIMAL_CONFIG = """\
[eos]
kind = two_fluid
gamma_plus = 2
gamma_minus = 2

[grid]
nx = 64

[ic.patch.1]
r = 1
q = 2

[solver]
t_end = 0.05
"""


@pytest.fixture
def runner():
    """Create a CLI test runner."""
    return CliRunner()


@pytest.fixture
def equal_gammas():
    """gamma_+ = gamma_- = 2, where the closure collapses to Z = R + Q."""
    return PhaseParams(2.0, 2.0)


@pytest.fixture
def unequal_gammas():
    return PhaseParams(3.0, 1.5)


@pytest.fixture
def two_fluid_eos():
    return EquationOfState.two_fluid_law(2.0, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def write_config(tmp_path):
    """Write a scenario file into tmp_path and return its path."""
    def _write(text=MINIMAL_CONFIG, name='scenario.ini'):
        path = tmp_path / name
        path.write_text(text, encoding='utf-8')
        return path
    return _write
