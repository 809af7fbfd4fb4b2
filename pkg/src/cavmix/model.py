"""Unit conventions, domain types and single-particle energetics.

All quantities are expressed in natural cavity-recoil units:

* reduced Planck constant ``hbar = 1``,
* mode wavenumber ``k = 1``,
* recoil frequency of the reference species (species 1) equal to 1,
  which fixes the reference mass to ``m_1 = 1/2``.

Times are measured in inverse recoil frequencies, rates in recoil
frequencies, momenta in photon momenta ``hbar*k``, positions in ``1/k``
and energies in ``hbar`` times the recoil frequency.

Positions are stored as a wrapped phase ``kx`` in ``[0, 2*pi)``: every
coupling in the model enters through ``sin(kx)`` or ``sin^2(kx)``, so an
unbounded coordinate would only lose precision at large excursions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

HBAR = 1.0
WAVENUMBER = 1.0
TWO_PI = 2.0 * np.pi

#: Mass of the unit-defining reference species, hbar*k^2/(2*m_1) = 1.
REFERENCE_MASS = 0.5


class ConfigError(ValueError):
    """A physical parameter violates a model invariant."""


@dataclass(frozen=True)
class UnitSystem:
    """Marker for the natural unit convention used throughout the package."""

    hbar: float = HBAR
    wavenumber: float = WAVENUMBER
    reference_mass: float = REFERENCE_MASS

    def recoil_frequency(self, mass: float) -> float:
        """Recoil frequency hbar*k^2/(2*m) of a particle of the given mass."""
        return self.hbar * self.wavenumber**2 / (2.0 * mass)


UNITS = UnitSystem()


@dataclass(frozen=True)
class SpeciesParams:
    """Physical constants of one particle species.

    Attributes
    ----------
    n_particles : int
        Ensemble size N_s, at least 1.
    mass : float
        Particle mass in units of the reference mass times (m_s/m_1).
    pump_coupling : float
        Effective pump amplitude eta_s (rate, >= 0).
    light_shift : float
        Light shift per photon U0_s (rate, typically <= 0).
    init_temperature : float
        Initial temperature k_B*T_s (energy, > 0).
    """

    n_particles: int
    mass: float
    pump_coupling: float
    light_shift: float
    init_temperature: float

    def __post_init__(self) -> None:
        if self.n_particles < 1:
            raise ConfigError(f"n_particles must be >= 1, got {self.n_particles}")
        if not self.mass > 0:
            raise ConfigError(f"mass must be > 0, got {self.mass}")
        if not self.init_temperature > 0:
            raise ConfigError(
                f"init_temperature must be > 0, got {self.init_temperature}"
            )
        if self.pump_coupling < 0:
            raise ConfigError(
                f"pump_coupling must be >= 0, got {self.pump_coupling}"
            )

    @property
    def recoil_frequency(self) -> float:
        """omega_R,s = hbar*k^2/(2*m_s); satisfies omega_R,s * m_s = 1/2."""
        return HBAR * WAVENUMBER**2 / (2.0 * self.mass)

    @property
    def thermal_velocity(self) -> float:
        """v_s with k_B*T_s = m_s*v_s^2/2."""
        return np.sqrt(2.0 * self.init_temperature / self.mass)


@dataclass(frozen=True)
class CavityParams:
    """Cavity decay rate, pump-cavity detuning and mode wavenumber."""

    kappa: float
    detuning: float
    wavenumber: float = WAVENUMBER

    def __post_init__(self) -> None:
        if not self.kappa > 0:
            raise ConfigError(f"kappa must be > 0, got {self.kappa}")
        if self.wavenumber != WAVENUMBER:
            raise ConfigError("the mode wavenumber is fixed to 1 in these units")


@dataclass
class SimState:
    """All phase-space coordinates plus the field amplitude at one instant.

    Positions are stored as phases ``kx`` in ``[0, 2*pi)``; momenta in
    units of ``hbar*k``. One array per species.
    """

    positions: list[np.ndarray]
    momenta: list[np.ndarray]
    alpha: complex
    time: float

    def copy(self) -> "SimState":
        return SimState(
            positions=[x.copy() for x in self.positions],
            momenta=[p.copy() for p in self.momenta],
            alpha=self.alpha,
            time=self.time,
        )

    def validate(self, species: tuple[SpeciesParams, ...]) -> None:
        if len(self.positions) != len(species) or len(self.momenta) != len(species):
            raise ConfigError("state species count does not match configuration")
        for s, x, p in zip(species, self.positions, self.momenta):
            if x.shape != (s.n_particles,) or p.shape != (s.n_particles,):
                raise ConfigError(
                    f"array lengths do not match N_s={s.n_particles}"
                )
            if np.any(x < 0.0) or np.any(x >= TWO_PI):
                raise ConfigError("positions must be wrapped to [0, 2*pi)")


@dataclass(frozen=True)
class SimConfig:
    """Full description of one stochastic simulation run.

    ``perturbation`` seeds the initial positions with a density modulation
    proportional to ``1 + perturbation*sin(kx)``. ``field_frozen`` disables
    the field update entirely (particles move in the static potential of
    the initial ``alpha``); it exists for integrator verification only.
    """

    species: tuple[SpeciesParams, ...]
    cavity: CavityParams
    dt: float
    total_time: float
    record_stride: int = 1
    noise: bool = True
    seed: int | None = None
    perturbation: float = 0.0
    field_frozen: bool = False

    def __post_init__(self) -> None:
        if not self.species:
            raise ConfigError("at least one species is required")
        if abs(self.species[0].mass - REFERENCE_MASS) > 1e-12:
            raise ConfigError(
                "species 1 defines the unit system and must have mass "
                f"{REFERENCE_MASS} (one half); got {self.species[0].mass}"
            )
        if not self.dt > 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.total_time < 0:
            raise ConfigError(f"total_time must be >= 0, got {self.total_time}")
        if self.record_stride < 1:
            raise ConfigError(f"record_stride must be >= 1, got {self.record_stride}")
        if not (0.0 <= self.perturbation < 1.0):
            raise ConfigError(
                f"perturbation must lie in [0, 1), got {self.perturbation}"
            )

    def with_seed(self, seed: int | None) -> "SimConfig":
        return replace(self, seed=seed)


def potential(kx, alpha: complex, s: SpeciesParams):
    """Optical potential hbar*eta*(a+a*)sin(kx) + hbar*U0*|a|^2*sin^2(kx)."""
    sin_kx = np.sin(kx)
    two_re = 2.0 * np.real(alpha)
    return HBAR * (
        s.pump_coupling * two_re * sin_kx
        + s.light_shift * np.abs(alpha) ** 2 * sin_kx**2
    )


def force(kx, alpha: complex, s: SpeciesParams):
    """Negative spatial derivative of :func:`potential`."""
    two_re = 2.0 * np.real(alpha)
    return -HBAR * WAVENUMBER * (
        s.pump_coupling * two_re * np.cos(kx)
        + s.light_shift * np.abs(alpha) ** 2 * np.sin(2.0 * kx)
    )


def hamiltonian(kx, p, alpha: complex, s: SpeciesParams):
    """Single-particle energy p^2/(2m) + potential."""
    return np.asarray(p) ** 2 / (2.0 * s.mass) + potential(kx, alpha, s)


def default_timestep(species: tuple[SpeciesParams, ...], cavity: CavityParams) -> float:
    """Conservative default integration step.

    Resolves the cavity decay (kappa*dt <= 0.1), the fastest conceivable
    trap frequency at the perfect-order field amplitude and the thermal
    phase advance per step (both <= 0.05).
    """
    alpha_max = sum(s.n_particles * s.pump_coupling for s in species) / np.hypot(
        cavity.kappa, cavity.detuning
    )
    rates = [10.0 * cavity.kappa]
    for s in species:
        omega0_sq = 4.0 * s.pump_coupling * s.recoil_frequency * alpha_max
        rates.append(20.0 * np.sqrt(omega0_sq))
        rates.append(20.0 * WAVENUMBER * s.thermal_velocity)
    return 1.0 / max(max(rates), 1e-12)
