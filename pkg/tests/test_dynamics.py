import numpy as np
import pytest

from cavmix import dynamics, model
from cavmix.dynamics import (
    IntegrationDiverged,
    Recorder,
    ensemble_run,
    realisation_seed,
    run,
    sample_initial,
    step,
    total_energy,
)
from cavmix.model import TWO_PI, CavityParams, SimConfig, SimState
from conftest import species


def make_config(**over):
    kwargs = dict(
        species=(species(n=40, pump=30.0, u0=-0.01, temp=500.0),
                 species(n=25, mass=5.0, pump=40.0, u0=-0.02, temp=800.0)),
        cavity=CavityParams(kappa=100.0, detuning=-100.0),
        dt=1e-4, total_time=0.05, record_stride=50, noise=True, seed=3,
    )
    kwargs.update(over)
    return SimConfig(**kwargs)


# ----------------------------------------------------------------------
# initial conditions


def test_sample_initial_moments():
    cfg = make_config(species=(species(n=200_000, pump=1.0, temp=400.0),),
                      perturbation=0.0)
    st = sample_initial(cfg, 11)
    st.validate(cfg.species)
    assert st.alpha == 0j
    p = st.momenta[0]
    # Maxwellian: <p^2> = m k_B T
    assert np.mean(p**2) == pytest.approx(0.5 * 400.0, rel=0.02)
    assert abs(np.mean(np.sin(st.positions[0]))) < 0.01


def test_sample_initial_perturbation():
    cfg = make_config(species=(species(n=400_000, pump=1.0),),
                      perturbation=0.8)
    st = sample_initial(cfg, 2)
    # density 1 + eps*sin(kx) gives <sin kx> = eps/2
    assert np.mean(np.sin(st.positions[0])) == pytest.approx(0.4, abs=0.01)


def test_realisation_seeds_are_stable_and_distinct():
    a = realisation_seed(7, 0).generate_state(4)
    b = realisation_seed(7, 0).generate_state(4)
    c = realisation_seed(7, 1).generate_state(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


# ----------------------------------------------------------------------
# trajectory kernel vs the plain-numpy reference


def test_kernel_matches_reference_stepper():
    cfg = make_config(noise=False)
    ts = run(cfg, 7)
    st = sample_initial(cfg, 7)
    rng = np.random.default_rng(0)  # unused with noise off
    for _ in range(int(round(cfg.total_time / cfg.dt))):
        st = step(st, cfg.dt, cfg, rng)
    for i in range(2):
        np.testing.assert_allclose(ts.final_state.positions[i],
                                   st.positions[i], atol=1e-12)
        np.testing.assert_allclose(ts.final_state.momenta[i],
                                   st.momenta[i], atol=5e-12)
    assert ts.final_state.alpha == pytest.approx(st.alpha, abs=1e-12)


def test_deterministic_given_seed():
    cfg = make_config(noise=True)
    a = run(cfg, 99)
    b = run(cfg, 99)
    np.testing.assert_array_equal(a.photon, b.photon)
    np.testing.assert_array_equal(a.final_state.momenta[0],
                                  b.final_state.momenta[0])


def test_positions_stay_wrapped():
    cfg = make_config(total_time=0.2)
    ts = run(cfg, 5)
    ts.final_state.validate(cfg.species)


def test_recorder_times_and_snapshots():
    cfg = make_config(total_time=0.01, record_stride=10)
    rec = Recorder(stride=10, snapshot_times=(0.004, 0.008))
    ts = run(cfg, 1, rec)
    n_steps = int(round(cfg.total_time / cfg.dt))
    expect = np.arange(0, n_steps + 1, 10) * cfg.dt
    np.testing.assert_allclose(ts.times, expect, atol=1e-12)
    assert len(ts.snapshots) == 2
    assert ts.snapshots[0].time == pytest.approx(0.004, abs=cfg.dt)
    assert ts.snapshots[1].time == pytest.approx(0.008, abs=cfg.dt)
    for snap in ts.snapshots:
        snap.validate(cfg.species)


def test_zero_duration_run():
    cfg = make_config(total_time=0.0)
    ts = run(cfg, 4)
    assert len(ts.times) == 1
    assert ts.photon[0] == 0.0


# ----------------------------------------------------------------------
# exact field sub-dynamics


def test_field_decay_is_exact_at_any_dt():
    # free cavity: alpha(t) = exp((-kappa + i*Delta)t) * alpha(0), exactly
    cav = CavityParams(kappa=3.0, detuning=7.0)
    cfg = make_config(species=(species(n=1, pump=0.0, u0=0.0),), cavity=cav,
                      noise=False, dt=0.25, total_time=1.0)
    st = SimState(positions=[np.array([1.0])], momenta=[np.array([0.0])],
                  alpha=2.0 - 1.0j, time=0.0)
    rng = np.random.default_rng(0)
    for _ in range(4):
        st = step(st, cfg.dt, cfg, rng)
    exact = (2.0 - 1.0j) * np.exp((-3.0 + 7.0j) * 1.0)
    assert st.alpha == pytest.approx(exact, abs=1e-14)


def test_empty_cavity_noise_floor_small():
    cav = CavityParams(kappa=40.0, detuning=25.0)
    cfg = make_config(species=(species(n=1, pump=0.0, u0=0.0),), cavity=cav,
                      noise=True, dt=2e-3, total_time=150.0, record_stride=5)
    ts = run(cfg, 21)
    ph = ts.photon[200:]
    n_eff = ph.size * (cfg.dt * 5) * 2.0 * cav.kappa  # ~independent samples
    se = ph.std() / np.sqrt(n_eff)
    assert ph.mean() == pytest.approx(0.5, abs=4.0 * max(se, 1e-3))


# ----------------------------------------------------------------------
# integrator order and symmetry


def energy_drift(dt: float) -> float:
    # nearly closed system: kappa -> 0, noise off
    cav = CavityParams(kappa=1e-12, detuning=-30.0)
    cfg = make_config(
        species=(species(n=16, pump=5.0, u0=-0.05, temp=50.0),),
        cavity=cav, noise=False, dt=dt, total_time=2.0, record_stride=10**9,
    )
    st = sample_initial(cfg, 13)
    st.alpha = 0.8 - 0.6j
    e0 = total_energy(st, cfg)
    rng = np.random.default_rng(0)
    for _ in range(int(round(cfg.total_time / dt))):
        st = step(st, dt, cfg, rng)
    return abs(total_energy(st, cfg) - e0)


def test_energy_drift_is_second_order():
    d1 = energy_drift(4e-4)
    d2 = energy_drift(2e-4)
    assert d1 / d2 == pytest.approx(4.0, rel=0.25)


def test_mirror_symmetry_preserved():
    # (kx, p) -> (pi - kx, -p) maps solutions to solutions; a mirror-paired
    # initial condition keeps total momentum exactly zero with noise off.
    cfg = make_config(noise=False, total_time=0.0)
    st = sample_initial(cfg, 17)
    for x, p in zip(st.positions, st.momenta):
        half = x.size // 2
        x[half:2 * half] = np.mod(np.pi - x[:half], TWO_PI)
        p[half:2 * half] = -p[:half]
        if x.size % 2:
            x[-1], p[-1] = np.pi / 2.0, 0.0
    rng = np.random.default_rng(0)
    for _ in range(400):
        st = step(st, 1e-4, cfg, rng)
    for x, p in zip(st.positions, st.momenta):
        half = x.size // 2
        np.testing.assert_allclose(
            np.sin(x[half:2 * half]), np.sin(x[:half]), atol=1e-9)
        np.testing.assert_allclose(p[half:2 * half], -p[:half], atol=1e-9)


def test_divergence_raises_with_time():
    cfg = make_config(
        species=(species(n=10, pump=1e7, temp=1.0),),
        dt=0.05, total_time=10.0, noise=False,
    )
    with pytest.raises(IntegrationDiverged) as err:
        run(cfg, 3)
    assert 0.0 < err.value.time <= 10.0


def test_frozen_field_keeps_alpha():
    cfg = make_config(field_frozen=True, noise=False, total_time=0.01)
    st = sample_initial(cfg, 9)
    st.alpha = 1.5 + 0.5j
    rng = np.random.default_rng(0)
    for _ in range(100):
        st = step(st, cfg.dt, cfg, rng)
    assert st.alpha == 1.5 + 0.5j


# ----------------------------------------------------------------------
# ensembles


def test_ensemble_single_realisation_matches_run():
    cfg = make_config()
    stats = ensemble_run(cfg, 1, 55)
    ts = run(cfg, realisation_seed(55, 0))
    np.testing.assert_array_equal(stats.mean["photon"], ts.photon)
    np.testing.assert_array_equal(stats.stderr["photon"],
                                  np.zeros_like(ts.photon))


def test_ensemble_reduction_shapes_and_determinism():
    cfg = make_config(total_time=0.02)
    a = ensemble_run(cfg, 3, 8)
    b = ensemble_run(cfg, 3, 8)
    assert a.mean["kinetic_temperature"].shape == (2, len(a.times))
    np.testing.assert_array_equal(a.mean["order_parameter"],
                                  b.mean["order_parameter"])
    assert a.pooled_momenta[0].size == 3 * 40
    assert a.pooled_momenta[1].size == 3 * 25
    np.testing.assert_array_equal(a.pooled_momenta[1], b.pooled_momenta[1])
    assert len(a.final_histograms) == 2


def test_ensemble_rejects_bad_count():
    with pytest.raises(model.ConfigError):
        ensemble_run(make_config(), 0, 1)
