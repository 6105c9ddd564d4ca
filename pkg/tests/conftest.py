import pytest

from latticequench.model import LatticeModel, ModelConfig


@pytest.fixture(scope="session")
def model():
    """N=4, S=3, v0=9, g=1 with three bands (nine orbitals)."""
    return LatticeModel(ModelConfig())


@pytest.fixture(scope="session")
def free_model():
    return LatticeModel(ModelConfig(g=0.0))


@pytest.fixture(scope="session")
def small_model():
    # two bosons keep property tests cheap
    return LatticeModel(ModelConfig(n_particles=2, n_bands=2, n_grid=150))
