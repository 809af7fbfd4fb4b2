import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavmix import model
from cavmix.model import (
    CavityParams,
    ConfigError,
    SimConfig,
    SimState,
    SpeciesParams,
    UnitSystem,
    default_timestep,
    force,
    hamiltonian,
    potential,
)
from conftest import species


def test_reference_units():
    units = UnitSystem()
    assert units.hbar == 1.0
    assert units.wavenumber == 1.0
    # the reference species has unit recoil frequency by construction
    assert units.recoil_frequency(units.reference_mass) == 1.0
    s = species(mass=0.5)
    assert s.recoil_frequency == 1.0
    # omega_R,s * m_s = hbar k^2 / 2 for every species
    for m in (0.5, 5.0, 20.0, 100.0):
        sp = species(mass=m)
        assert sp.recoil_frequency * sp.mass == pytest.approx(0.5)


def test_thermal_velocity():
    s = species(mass=2.0, temp=9.0)
    assert s.thermal_velocity == pytest.approx(np.sqrt(2.0 * 9.0 / 2.0))


@pytest.mark.parametrize("kwargs", [
    dict(n=0), dict(mass=0.0), dict(mass=-1.0), dict(temp=0.0),
    dict(temp=-5.0), dict(pump=-1.0),
])
def test_species_invariants(kwargs):
    with pytest.raises(ConfigError):
        species(**kwargs)


def test_cavity_invariants():
    with pytest.raises(ConfigError):
        CavityParams(kappa=0.0, detuning=-1.0)
    with pytest.raises(ConfigError):
        CavityParams(kappa=-2.0, detuning=-1.0)
    with pytest.raises(ConfigError):
        CavityParams(kappa=1.0, detuning=-1.0, wavenumber=2.0)
    CavityParams(kappa=1.0, detuning=0.0)  # any detuning sign is legal


def _sim_config(**over):
    kwargs = dict(
        species=(species(),), cavity=CavityParams(kappa=10.0, detuning=-10.0),
        dt=1e-3, total_time=1.0,
    )
    kwargs.update(over)
    return SimConfig(**kwargs)


def test_sim_config_invariants():
    with pytest.raises(ConfigError):
        _sim_config(species=())
    with pytest.raises(ConfigError, match="unit system"):
        _sim_config(species=(species(mass=1.0),))
    with pytest.raises(ConfigError):
        _sim_config(dt=0.0)
    with pytest.raises(ConfigError):
        _sim_config(total_time=-1.0)
    with pytest.raises(ConfigError):
        _sim_config(record_stride=0)
    with pytest.raises(ConfigError):
        _sim_config(perturbation=1.5)
    with pytest.raises(ConfigError):
        _sim_config(perturbation=-0.1)
    cfg = _sim_config(perturbation=0.99)
    assert cfg.with_seed(7).seed == 7


def test_state_validation():
    s = species(n=4)
    good = SimState(positions=[np.zeros(4)], momenta=[np.zeros(4)],
                    alpha=0j, time=0.0)
    good.validate((s,))
    bad_len = SimState(positions=[np.zeros(3)], momenta=[np.zeros(4)],
                       alpha=0j, time=0.0)
    with pytest.raises(ConfigError):
        bad_len.validate((s,))
    unwrapped = SimState(positions=[np.full(4, 7.0)], momenta=[np.zeros(4)],
                         alpha=0j, time=0.0)
    with pytest.raises(ConfigError):
        unwrapped.validate((s,))
    copied = good.copy()
    copied.positions[0][0] = 1.0
    assert good.positions[0][0] == 0.0


@settings(max_examples=200, deadline=None)
@given(
    kx=st.floats(0.0, 2.0 * np.pi - 1e-9),
    re=st.floats(-50.0, 50.0),
    im=st.floats(-50.0, 50.0),
    eta=st.floats(0.0, 100.0),
    u0=st.floats(-1.0, 0.0),
)
def test_force_is_potential_gradient(kx, re, im, eta, u0):
    s = species(pump=eta, u0=u0)
    alpha = complex(re, im)
    h = 1e-6
    num = -(potential(kx + h, alpha, s) - potential(kx - h, alpha, s)) / (2 * h)
    scale = 1.0 + abs(eta * re) + abs(u0) * abs(alpha) ** 2
    assert force(kx, alpha, s) == pytest.approx(num, abs=1e-5 * scale)


def test_potential_values():
    s = species(pump=3.0, u0=-0.5)
    alpha = 2.0 - 1.0j
    kx = np.pi / 2.0
    # sin = 1: Phi = eta*2*Re(alpha) + U0*|alpha|^2
    assert potential(kx, alpha, s) == pytest.approx(3.0 * 4.0 - 0.5 * 5.0)
    assert hamiltonian(kx, 2.0, alpha, s) == pytest.approx(
        4.0 / (2 * s.mass) + potential(kx, alpha, s))
    # pure imaginary field exerts no pump force
    assert potential(0.7, 1.0j, species(pump=3.0)) == 0.0


def test_default_timestep_resolves_all_scales():
    sp = (species(n=300, pump=40.0, temp=1000.0),
          species(n=200, mass=20.0, pump=50.0, temp=1000.0))
    cav = CavityParams(kappa=100.0, detuning=-100.0)
    dt = default_timestep(sp, cav)
    assert dt * cav.kappa <= 0.1 + 1e-12
    alpha_max = sum(s.n_particles * s.pump_coupling for s in sp) / np.hypot(
        cav.kappa, cav.detuning)
    for s in sp:
        omega0 = np.sqrt(4.0 * s.pump_coupling * s.recoil_frequency * alpha_max)
        assert dt * omega0 <= 0.05 + 1e-12
        assert dt * s.thermal_velocity <= 0.05 + 1e-12
