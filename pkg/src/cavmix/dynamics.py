"""Stochastic integration of the coupled particle/field equations.

One trajectory advances all particles and the complex mode amplitude with
a symmetric splitting scheme,

    half kick -> half drift -> exact field step -> half drift -> half kick,

where the field substep solves the Ornstein-Uhlenbeck equation exactly
over ``dt`` with the particle sums frozen at the half-drift positions.
Freezing the sums at the spatial midpoint keeps the overall scheme
second order (energy drift per unit time scales as dt^2 for a lossless
cavity), which a field update at the end-of-step positions does not.

The quantum noise entering the field equation as ``-sqrt(kappa)*xi`` with
``<xi(t) xi*(t')> = delta(t-t')`` and ``<xi xi> = 0`` is realised per step
as two independent real Gaussians, each of variance half the exact
complex OU increment variance ``kappa*(1 - exp(2*Re(L)*dt))/(-2*Re(L))``.
The resulting empty-cavity stationary photon number is 1/2.

The inner loop is compiled with numba and avoids per-step trigonometry:
``sin(kx)`` and ``cos(kx)`` are carried along and advanced by small-angle
rotations (truncated Taylor series, below 1e-14 relative error for phase
advances under 0.15 rad per half step), with periodic exact
resynchronisation from the wrapped positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .model import (
    HBAR,
    TWO_PI,
    CavityParams,
    ConfigError,
    SimConfig,
    SimState,
    SpeciesParams,
    force,
    potential,
)

#: Fixed noise-draw chunk length; part of the determinism contract.
CHUNK = 16384

#: Exact (sin, cos) resynchronisation interval in steps.
RESYNC = 4096

#: Divergence guard on any single momentum, in hbar*k.
MOMENTUM_GUARD = 1.0e6

ALL_CHANNELS = (
    "order_parameter",
    "kinetic_temperature",
    "bunching",
    "photon",
    "re_alpha",
    "im_alpha",
)


class IntegrationDiverged(RuntimeError):
    """The integrator produced a non-finite or unphysically large state."""

    def __init__(self, time: float, message: str | None = None):
        self.time = time
        super().__init__(message or f"integration diverged at t={time:g}")


@dataclass(frozen=True)
class Recorder:
    """Sampling plan for one trajectory."""

    stride: int = 1
    channels: tuple[str, ...] = ALL_CHANNELS
    snapshot_times: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.stride < 1:
            raise ConfigError(f"recorder stride must be >= 1, got {self.stride}")
        if not self.channels:
            raise ConfigError("recorder channel list must not be empty")
        unknown = set(self.channels) - set(ALL_CHANNELS)
        if unknown:
            raise ConfigError(f"unknown recorder channels: {sorted(unknown)}")


@dataclass
class TimeSeries:
    """Recorded observables of a single trajectory."""

    times: np.ndarray
    re_alpha: np.ndarray
    im_alpha: np.ndarray
    photon: np.ndarray
    order_parameter: np.ndarray      # shape (S, n_rec)
    kinetic_temperature: np.ndarray  # shape (S, n_rec)
    bunching: np.ndarray             # shape (S, n_rec)
    final_state: SimState
    snapshots: list[SimState]
    config: SimConfig
    seed: int | None

    def channel(self, name: str) -> np.ndarray:
        if name not in ALL_CHANNELS:
            raise KeyError(name)
        return getattr(self, name)


@dataclass
class EnsembleStats:
    """Per-channel mean and standard error over independent realisations."""

    times: np.ndarray
    mean: dict[str, np.ndarray]
    stderr: dict[str, np.ndarray]
    pooled_momenta: list[np.ndarray]
    final_histograms: list
    n_realisations: int
    base_seed: int
    config: SimConfig


def realisation_seed(base_seed: int, index: int) -> np.random.SeedSequence:
    """Deterministic per-realisation seed.

    Realisation ``i`` of an ensemble uses
    ``SeedSequence(base_seed, spawn_key=(i,))``; this mapping is stable
    across versions and independent of execution order.
    """
    return np.random.SeedSequence(base_seed, spawn_key=(index,))


# ----------------------------------------------------------------------
# initial conditions


def sample_initial(config: SimConfig, seed) -> SimState:
    """Uniform (optionally perturbed) positions and Maxwellian momenta.

    Positions are drawn from a density proportional to
    ``1 + perturbation*sin(kx)`` by rejection sampling; momenta are
    i.i.d. Gaussian with variance ``m_s * k_B T_s``. The field starts in
    vacuum, ``alpha = 0``. Deterministic for a given seed.
    """
    rng = np.random.default_rng(seed)
    return _sample_initial_rng(config, rng)


def _sample_initial_rng(config: SimConfig, rng: np.random.Generator) -> SimState:
    eps = config.perturbation
    positions = []
    momenta = []
    for s in config.species:
        n = s.n_particles
        if eps == 0.0:
            x = rng.uniform(0.0, TWO_PI, n)
        else:
            x = np.empty(n)
            got = 0
            while got < n:
                cand = rng.uniform(0.0, TWO_PI, 2 * (n - got))
                accept = rng.uniform(0.0, 1.0 + eps, cand.size) < (
                    1.0 + eps * np.sin(cand)
                )
                take = cand[accept][: n - got]
                x[got : got + take.size] = take
                got += take.size
        sigma_p = np.sqrt(s.mass * s.init_temperature)
        p = rng.normal(0.0, sigma_p, n)
        positions.append(x)
        momenta.append(p)
    return SimState(positions=positions, momenta=momenta, alpha=0.0 + 0.0j, time=0.0)


# ----------------------------------------------------------------------
# compiled kernel


@njit(cache=True, fastmath=True)
def _advance(x, p, sn, cs, mass, eta, u0, alpha, kappa, delta_c, dt,
             n_steps, step0, noise, sigma, decay, freeze_field, stride,
             offsets, rec_re, rec_im, rec_photon, rec_theta, rec_temp,
             rec_bunch, rec_start, photon_guard):
    """Advance ``n_steps`` steps in place; returns (status, step, alpha).

    status 0: completed; 1: diverged at the reported absolute step.
    ``noise`` has shape (n_steps, 2); ``sigma`` is the per-quadrature
    OU noise standard deviation (0 disables noise).
    """
    n = x.size
    n_species = offsets.size - 1
    half = 0.5 * dt
    rec_count = 0
    for istep in range(n_steps):
        ar2 = 2.0 * alpha.real
        aa = alpha.real * alpha.real + alpha.imag * alpha.imag

        # half kick at the current field
        for j in range(n):
            f = -eta[j] * ar2 * cs[j] - u0[j] * aa * 2.0 * sn[j] * cs[j]
            p[j] += f * half

        # first half drift; accumulate field source sums at mid positions
        se = 0.0
        su = 0.0
        for j in range(n):
            th = p[j] / mass[j] * half
            if th > 0.15 or th < -0.15:
                st = np.sin(th)
                ct = np.cos(th)
            else:
                t2 = th * th
                ct = 1.0 - t2 * (0.5 - t2 * (1.0 / 24.0 - t2 / 720.0))
                st = th * (1.0 - t2 * (1.0 / 6.0 - t2 * (1.0 / 120.0 - t2 / 5040.0)))
            s_new = sn[j] * ct + cs[j] * st
            c_new = cs[j] * ct - sn[j] * st
            r2 = s_new * s_new + c_new * c_new
            fix = 1.5 - 0.5 * r2
            sn[j] = s_new * fix
            cs[j] = c_new * fix
            xj = x[j] + th
            if xj >= TWO_PI:
                xj -= TWO_PI
            elif xj < 0.0:
                xj += TWO_PI
            x[j] = xj
            se += eta[j] * sn[j]
            su += u0[j] * sn[j] * sn[j]

        # exact OU field step with frozen sums
        if not freeze_field:
            lam_im = delta_c - su
            ph = lam_im * dt
            e_field = decay * complex(np.cos(ph), np.sin(ph))
            lam = complex(-kappa, lam_im)
            b = complex(0.0, -se)
            if abs(lam) * dt < 1.0e-8:
                g = dt * (1.0 + 0.5 * lam * dt)
            else:
                g = (e_field - 1.0) / lam
            alpha = e_field * alpha + g * b
            if sigma > 0.0:
                alpha += complex(sigma * noise[istep, 0], sigma * noise[istep, 1])

        # second half drift (momenta unchanged by the field step)
        for j in range(n):
            th = p[j] / mass[j] * half
            if th > 0.15 or th < -0.15:
                st = np.sin(th)
                ct = np.cos(th)
            else:
                t2 = th * th
                ct = 1.0 - t2 * (0.5 - t2 * (1.0 / 24.0 - t2 / 720.0))
                st = th * (1.0 - t2 * (1.0 / 6.0 - t2 * (1.0 / 120.0 - t2 / 5040.0)))
            s_new = sn[j] * ct + cs[j] * st
            c_new = cs[j] * ct - sn[j] * st
            r2 = s_new * s_new + c_new * c_new
            fix = 1.5 - 0.5 * r2
            sn[j] = s_new * fix
            cs[j] = c_new * fix
            xj = x[j] + th
            if xj >= TWO_PI:
                xj -= TWO_PI
            elif xj < 0.0:
                xj += TWO_PI
            x[j] = xj

        # half kick at the new field
        ar2 = 2.0 * alpha.real
        aa = alpha.real * alpha.real + alpha.imag * alpha.imag
        for j in range(n):
            f = -eta[j] * ar2 * cs[j] - u0[j] * aa * 2.0 * sn[j] * cs[j]
            p[j] += f * half

        abs_step = step0 + istep + 1

        if abs_step % RESYNC == 0:
            for j in range(n):
                sn[j] = np.sin(x[j])
                cs[j] = np.cos(x[j])

        if abs_step % stride == 0:
            photon = alpha.real * alpha.real + alpha.imag * alpha.imag
            idx = rec_start + rec_count
            rec_re[idx] = alpha.real
            rec_im[idx] = alpha.imag
            rec_photon[idx] = photon
            ok = photon <= photon_guard and np.isfinite(photon)
            for si in range(n_species):
                lo = offsets[si]
                hi = offsets[si + 1]
                ssum = 0.0
                s2sum = 0.0
                p2sum = 0.0
                pmax = 0.0
                for j in range(lo, hi):
                    ssum += sn[j]
                    s2sum += sn[j] * sn[j]
                    p2sum += p[j] * p[j]
                    if abs(p[j]) > pmax:
                        pmax = abs(p[j])
                cnt = hi - lo
                rec_theta[si, idx] = abs(ssum / cnt)
                rec_bunch[si, idx] = s2sum / cnt
                rec_temp[si, idx] = p2sum / cnt / mass[lo]
                if pmax > MOMENTUM_GUARD or not np.isfinite(p2sum):
                    ok = False
            rec_count += 1
            if not ok:
                return 1, abs_step, alpha
    return 0, step0 + n_steps, alpha


# ----------------------------------------------------------------------
# flattened trajectory driver


class _Flat:
    """Flattened per-particle views of a multi-species state."""

    def __init__(self, config: SimConfig, state: SimState):
        species = config.species
        counts = [s.n_particles for s in species]
        self.offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.x = np.concatenate(state.positions).astype(np.float64)
        self.p = np.concatenate(state.momenta).astype(np.float64)
        self.sn = np.sin(self.x)
        self.cs = np.cos(self.x)
        self.mass = np.concatenate(
            [np.full(s.n_particles, s.mass) for s in species]
        )
        self.eta = np.concatenate(
            [np.full(s.n_particles, s.pump_coupling) for s in species]
        )
        self.u0 = np.concatenate(
            [np.full(s.n_particles, s.light_shift) for s in species]
        )
        self.alpha = complex(state.alpha)

    def to_state(self, config: SimConfig, time: float) -> SimState:
        off = self.offsets
        return SimState(
            positions=[self.x[off[i] : off[i + 1]].copy() for i in range(len(off) - 1)],
            momenta=[self.p[off[i] : off[i + 1]].copy() for i in range(len(off) - 1)],
            alpha=self.alpha,
            time=time,
        )


def _photon_guard(config: SimConfig) -> float:
    total = sum(s.n_particles * s.pump_coupling for s in config.species)
    return max(1.0e4 * (total / config.cavity.kappa) ** 2, 1.0e4)


def run(config: SimConfig, seed, recorder: Recorder | None = None) -> TimeSeries:
    """Integrate one trajectory and record observables every stride steps.

    Deterministic for a given (config, seed). Raises
    :class:`IntegrationDiverged` with the offending time if the state
    blows up.
    """
    if recorder is None:
        recorder = Recorder(stride=config.record_stride)
    rng = np.random.default_rng(seed)
    state0 = _sample_initial_rng(config, rng)
    flat = _Flat(config, state0)
    cav = config.cavity
    dt = config.dt
    n_total = int(round(config.total_time / dt))
    stride = recorder.stride
    n_rec = n_total // stride + 1

    n_species = len(config.species)
    rec_re = np.zeros(n_rec)
    rec_im = np.zeros(n_rec)
    rec_photon = np.zeros(n_rec)
    rec_theta = np.zeros((n_species, n_rec))
    rec_temp = np.zeros((n_species, n_rec))
    rec_bunch = np.zeros((n_species, n_rec))

    # sample at t = 0
    _record_state(flat, 0, rec_re, rec_im, rec_photon, rec_theta, rec_temp, rec_bunch)

    sigma = _noise_sigma(cav.kappa, dt) if config.noise else 0.0
    decay = np.exp(-cav.kappa * dt)

    snap_steps = sorted(
        {min(max(int(round(t / dt)), 0), n_total) for t in recorder.snapshot_times}
    )
    snapshots: list[SimState] = []

    step_idx = 0
    rec_done = 1
    boundaries = snap_steps + [n_total]
    for boundary in boundaries:
        while step_idx < boundary:
            n_chunk = min(CHUNK, boundary - step_idx)
            if sigma > 0.0:
                noise = rng.standard_normal((n_chunk, 2))
            else:
                noise = np.zeros((1, 2))
            status, abs_step, flat.alpha = _advance(
                flat.x, flat.p, flat.sn, flat.cs, flat.mass, flat.eta, flat.u0,
                flat.alpha, cav.kappa, cav.detuning, dt, n_chunk, step_idx,
                noise, sigma, decay, config.field_frozen, stride, flat.offsets,
                rec_re, rec_im, rec_photon, rec_theta, rec_temp, rec_bunch,
                rec_done, _photon_guard(config),
            )
            if status != 0:
                raise IntegrationDiverged(abs_step * dt)
            rec_done += (step_idx + n_chunk) // stride - step_idx // stride
            step_idx += n_chunk
        if boundary in snap_steps:
            snapshots.append(flat.to_state(config, boundary * dt))

    times = np.arange(n_rec) * (stride * dt)
    final_state = flat.to_state(config, n_total * dt)
    return TimeSeries(
        times=times,
        re_alpha=rec_re,
        im_alpha=rec_im,
        photon=rec_photon,
        order_parameter=rec_theta,
        kinetic_temperature=rec_temp,
        bunching=rec_bunch,
        final_state=final_state,
        snapshots=snapshots,
        config=config,
        seed=seed if isinstance(seed, int) else None,
    )


def _record_state(flat, idx, rec_re, rec_im, rec_photon, rec_theta, rec_temp, rec_bunch):
    rec_re[idx] = flat.alpha.real
    rec_im[idx] = flat.alpha.imag
    rec_photon[idx] = abs(flat.alpha) ** 2
    off = flat.offsets
    for si in range(len(off) - 1):
        lo, hi = off[si], off[si + 1]
        rec_theta[si, idx] = abs(np.mean(flat.sn[lo:hi]))
        rec_bunch[si, idx] = np.mean(flat.sn[lo:hi] ** 2)
        rec_temp[si, idx] = np.mean(flat.p[lo:hi] ** 2) / flat.mass[lo]


def _noise_sigma(kappa: float, dt: float) -> float:
    """Per-quadrature std of the exact OU noise increment over dt."""
    # total complex variance kappa*(1-exp(2*Re(L)*dt))/(-2*Re(L)), Re(L)=-kappa
    total = 0.5 * (1.0 - np.exp(-2.0 * kappa * dt))
    return np.sqrt(0.5 * total)


# ----------------------------------------------------------------------
# reference single step (plain numpy, used directly and as an oracle)


def step(state: SimState, dt: float, config: SimConfig,
         rng: np.random.Generator) -> SimState:
    """Advance one Strang step and return the new state.

    Matches the compiled trajectory kernel to rounding accuracy; this
    version uses exact trigonometry and plain numpy throughout.
    """
    if not dt > 0:
        raise ConfigError(f"dt must be > 0, got {dt}")
    cav = config.cavity
    species = config.species
    new = state.copy()
    alpha = complex(new.alpha)

    for s, x, p in zip(species, new.positions, new.momenta):
        p += force(x, alpha, s) * (0.5 * dt)
    for s, x, p in zip(species, new.positions, new.momenta):
        x += p / s.mass * (0.5 * dt)
        np.mod(x, TWO_PI, out=x)

    if not config.field_frozen:
        se = sum(
            s.pump_coupling * np.sum(np.sin(x))
            for s, x in zip(species, new.positions)
        )
        su = sum(
            s.light_shift * np.sum(np.sin(x) ** 2)
            for s, x in zip(species, new.positions)
        )
        lam = complex(-cav.kappa, cav.detuning - su)
        b = -1j * se
        e_field = np.exp(lam * dt)
        if abs(lam) * dt < 1e-8:
            g = dt * (1.0 + 0.5 * lam * dt)
        else:
            g = (e_field - 1.0) / lam
        alpha = e_field * alpha + g * b
        if config.noise:
            sigma = _noise_sigma(cav.kappa, dt)
            draws = rng.standard_normal(2)
            alpha += sigma * complex(draws[0], draws[1])

    for s, x, p in zip(species, new.positions, new.momenta):
        x += p / s.mass * (0.5 * dt)
        np.mod(x, TWO_PI, out=x)
    for s, x, p in zip(species, new.positions, new.momenta):
        p += force(x, alpha, s) * (0.5 * dt)

    new.alpha = alpha
    new.time = state.time + dt

    photon = abs(alpha) ** 2
    if not np.isfinite(photon) or photon > _photon_guard(config):
        raise IntegrationDiverged(new.time)
    for p in new.momenta:
        if not np.all(np.isfinite(p)) or np.max(np.abs(p)) > MOMENTUM_GUARD:
            raise IntegrationDiverged(new.time)
    return new


def total_energy(state: SimState, config: SimConfig) -> float:
    """Conserved energy of the noiseless kappa->0 limit.

    Sum of all single-particle Hamiltonians plus the field term
    -hbar*Delta_c*|alpha|^2.
    """
    e = -HBAR * config.cavity.detuning * abs(state.alpha) ** 2
    for s, x, p in zip(config.species, state.positions, state.momenta):
        e += np.sum(p**2 / (2.0 * s.mass) + potential(x, state.alpha, s))
    return float(e)


# ----------------------------------------------------------------------
# ensembles


def ensemble_run(config: SimConfig, n_realisations: int, base_seed: int,
                 recorder: Recorder | None = None, n_jobs: int = 1) -> EnsembleStats:
    """Average independent trajectories with deterministically derived seeds.

    Realisation ``i`` uses :func:`realisation_seed`. The reduction is
    performed in fixed realisation order so results do not depend on
    scheduling. The first failing trajectory aborts the ensemble with its
    seed index attached.
    """
    if n_realisations < 1:
        raise ConfigError(f"n_realisations must be >= 1, got {n_realisations}")
    if recorder is None:
        recorder = Recorder(stride=config.record_stride)

    seeds = [realisation_seed(base_seed, i) for i in range(n_realisations)]

    def one(i: int) -> TimeSeries:
        try:
            return run(config, seeds[i], recorder)
        except IntegrationDiverged as exc:
            raise IntegrationDiverged(
                exc.time, f"realisation {i} (base seed {base_seed}) "
                f"diverged at t={exc.time:g}"
            ) from exc

    if n_jobs == 1:
        results = [one(i) for i in range(n_realisations)]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(
            delayed(one)(i) for i in range(n_realisations)
        )

    from . import observables

    channels = ("photon", "re_alpha", "im_alpha", "order_parameter",
                "kinetic_temperature", "bunching")
    mean = {}
    stderr = {}
    for name in channels:
        stack = np.stack([ts.channel(name) for ts in results])
        mean[name] = stack.mean(axis=0)
        if n_realisations > 1:
            stderr[name] = stack.std(axis=0, ddof=1) / np.sqrt(n_realisations)
        else:
            stderr[name] = np.zeros_like(mean[name])

    pooled = [
        np.concatenate([ts.final_state.momenta[si] for ts in results])
        for si in range(len(config.species))
    ]
    hists = [observables.histogram(po) for po in pooled]

    return EnsembleStats(
        times=results[0].times,
        mean=mean,
        stderr=stderr,
        pooled_momenta=pooled,
        final_histograms=hists,
        n_realisations=n_realisations,
        base_seed=base_seed,
        config=config,
    )
