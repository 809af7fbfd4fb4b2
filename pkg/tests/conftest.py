import numpy as np
import pytest

from cavmix import model


def species(n=100, mass=0.5, pump=10.0, u0=0.0, temp=100.0):
    return model.SpeciesParams(n_particles=n, mass=mass, pump_coupling=pump,
                               light_shift=u0, init_temperature=temp)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
