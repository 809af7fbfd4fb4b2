"""Stochastic dynamics and kinetic theory of multispecies atoms in a cavity.

Semiclassical simulation of polarisable particles coupled to a single
lossy cavity mode, together with the analytic kinetic-theory results for
the selforganisation threshold, instability growth rates, stationary
momentum distributions, and interspecies energy flows.

Units: hbar = k_B = 1, unit cavity-mode wavenumber, and the recoil
frequency of the first species equal to 1 (its mass is then 1/2).
"""

from .config import ConfigParseError, ExperimentConfig, SweepSpec, parse_config
from .dynamics import (
    EnsembleStats,
    IntegrationDiverged,
    Recorder,
    TimeSeries,
    ensemble_run,
    realisation_seed,
    run,
    sample_initial,
    step,
    total_energy,
)
from .kinetics import (
    AdiabaticPrediction,
    EquilibriumPrediction,
    HeatFlow,
    OutOfRegimeError,
    StabilityReport,
    action,
    adiabatic_equilibrium,
    adiabatic_map,
    adiabatic_momentum,
    critical_pump_scale,
    effective_detuning,
    friction_diffusion_uniform,
    growth_rate_full,
    growth_rate_hot,
    heat_flow,
    maxwellian_density,
    organised_equilibrium,
    qgaussian_equilibrium,
    stability_margin,
    temp_star,
)
from .model import (
    HBAR,
    WAVENUMBER,
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
from .observables import (
    Histogram,
    QGaussianFit,
    bunching,
    fit_qgaussian,
    histogram,
    kinetic_temperature,
    ks_distance,
    order_parameter,
    photon_number,
    qgaussian_density,
    sample_qgaussian,
)

__version__ = "0.1.0"

__all__ = [
    "HBAR", "WAVENUMBER", "CavityParams", "ConfigError", "ConfigParseError",
    "EnsembleStats", "EquilibriumPrediction", "ExperimentConfig", "HeatFlow",
    "Histogram", "IntegrationDiverged", "OutOfRegimeError",
    "AdiabaticPrediction", "QGaussianFit", "Recorder", "SimConfig",
    "SimState", "SpeciesParams", "StabilityReport", "SweepSpec", "TimeSeries",
    "UnitSystem", "action", "adiabatic_equilibrium", "adiabatic_map",
    "adiabatic_momentum", "bunching", "critical_pump_scale",
    "default_timestep", "effective_detuning", "ensemble_run",
    "fit_qgaussian", "force", "friction_diffusion_uniform",
    "growth_rate_full", "growth_rate_hot", "hamiltonian", "heat_flow",
    "histogram", "kinetic_temperature", "ks_distance", "maxwellian_density",
    "order_parameter", "organised_equilibrium", "parse_config",
    "photon_number", "potential", "qgaussian_density",
    "qgaussian_equilibrium", "realisation_seed", "run", "sample_initial",
    "sample_qgaussian", "stability_margin", "step", "temp_star",
    "total_energy",
]
