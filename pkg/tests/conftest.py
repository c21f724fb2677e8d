import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from finitequench import ChainSpec, build_hamiltonian_parts  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]

# Same examples on every run.
settings.register_profile("repeatable", derandomize=True)
settings.load_profile("repeatable")


@pytest.fixture(scope="session")
def parts2():
    return build_hamiltonian_parts(ChainSpec(n_sites=2))


@pytest.fixture(scope="session")
def parts3():
    return build_hamiltonian_parts(ChainSpec(n_sites=3))


@pytest.fixture(scope="session")
def example_config_path():
    return ROOT / "configs" / "defect_chain.toml"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
