"""Closed-form and quadrature-based kinetic-theory results.

Covers the effective detuning, the selforganisation threshold and growth
rates of a uniform Maxwellian mixture, the homogeneous (q-Gaussian) and
organised (Maxwell-Boltzmann) equilibria, single-particle actions and the
adiabatic mapping onto the organised state, the uniform-limit momentum
drift/diffusion coefficients, and the interspecies heat flux of two
homogeneous ensembles.

Threshold integrals are evaluated for Maxwellian momentum distributions
only (their principal-value integral is exactly 1); the growth-rate
dispersion integral is done by adaptive quadrature and the rate itself by
bracketing bisection. Actions are evaluated in closed form through
complete elliptic integrals of the pendulum orbit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .model import HBAR, TWO_PI, WAVENUMBER, CavityParams, ConfigError, SpeciesParams

#: Number of grid points per period for Boltzmann averages (spectrally
#: accurate trapezoid rule for smooth periodic integrands).
BOLTZMANN_GRID = 4096

GROWTH_QUAD_ABSTOL = 1e-9
GROWTH_ROOT_RELTOL = 1e-8


class OutOfRegimeError(ConfigError):
    """Inputs fall outside the validity regime of an analytic formula."""


@dataclass(frozen=True)
class StabilityReport:
    """Linear stability of the spatially uniform Maxwellian state."""

    delta: float
    threshold_lhs: float
    unstable: bool
    growth_rate: float | None
    species_shares: tuple[float, ...]
    in_regime: bool

    def __post_init__(self) -> None:
        if self.unstable and not (self.growth_rate is None or self.growth_rate > 0):
            raise ConfigError("growth rate must be positive when unstable")


@dataclass(frozen=True)
class EquilibriumPrediction:
    """Analytic prediction of a joint stationary state.

    ``branch`` is ``"homogeneous"`` (q-Gaussian momentum distributions,
    zero field) or ``"organised"`` (Boltzmann distributions in the
    selfconsistent potential). Uncertainty products are in units of hbar.
    """

    branch: str
    q: tuple[float, ...] | None
    temp_star: float
    kinetic_temperatures: tuple[float, ...]
    trap_frequencies: tuple[float, ...]
    alpha0: complex
    order_parameters: tuple[float, ...]
    uncertainty_products: tuple[float, ...]
    energies: tuple[float, ...]
    exists: tuple[bool, ...]
    converged: bool = True
    collapsed: bool = False
    residual: float = 0.0
    iterations: int = 0


@dataclass(frozen=True)
class HeatFlow:
    """Interspecies energy flow per particle for homogeneous ensembles."""

    q_2to1: float
    q_1to2: float


def effective_detuning(cavity: CavityParams,
                       species: tuple[SpeciesParams, ...]) -> float:
    """delta = Delta_c - (1/2) * sum_s N_s * U0_s."""
    return cavity.detuning - 0.5 * sum(
        s.n_particles * s.light_shift for s in species
    )


def _threshold_terms(cavity: CavityParams,
                     species: tuple[SpeciesParams, ...]) -> tuple[float, list[float]]:
    delta = effective_detuning(cavity, species)
    pref = HBAR * abs(delta) / (cavity.kappa**2 + delta**2)
    terms = [
        s.n_particles * s.pump_coupling**2 / s.init_temperature * pref
        for s in species
    ]
    return delta, terms


def stability_margin(cavity: CavityParams,
                     species: tuple[SpeciesParams, ...]) -> StabilityReport:
    """Threshold condition for Maxwellian initial distributions.

    The margin is the left side of the instability condition divided by
    its right side; the uniform state is unstable exactly when the margin
    exceeds 1 (for negative effective detuning). For non-negative
    effective detuning the report is flagged out-of-regime.
    """
    delta, terms = _threshold_terms(cavity, species)
    total = sum(terms)
    shares = tuple(t / total if total > 0 else 0.0 for t in terms)
    if delta >= 0:
        return StabilityReport(delta=delta, threshold_lhs=total, unstable=False,
                               growth_rate=None, species_shares=shares,
                               in_regime=False)
    unstable = total > 1.0
    rate = growth_rate_full(cavity, species) if unstable else None
    return StabilityReport(delta=delta, threshold_lhs=total, unstable=unstable,
                           growth_rate=rate, species_shares=shares, in_regime=True)


def critical_pump_scale(cavity: CavityParams,
                        species: tuple[SpeciesParams, ...]) -> float:
    """Factor zeta scaling every eta_s so the mixture sits exactly at threshold."""
    delta, terms = _threshold_terms(cavity, species)
    if delta >= 0:
        raise OutOfRegimeError("critical pump scale requires negative "
                               "effective detuning")
    total = sum(terms)
    if total == 0.0:
        raise ConfigError("critical pump scale is undefined when all pump "
                          "couplings vanish")
    return 1.0 / np.sqrt(total)


def growth_rate_hot(cavity: CavityParams,
                    species: tuple[SpeciesParams, ...]) -> float | None:
    """Hot-regime field growth rate; None when the uniform state is stable.

    Valid when (k*min_s v_s)^2 >> kappa^2 + delta^2.
    """
    delta = effective_detuning(cavity, species)
    if delta >= 0:
        raise OutOfRegimeError("growth rate requires negative effective detuning")
    radicand = sum(
        HBAR * abs(delta) * s.n_particles * s.pump_coupling**2 / s.init_temperature
        for s in species
    ) - delta**2
    if radicand < 0:
        return None
    gamma = -cavity.kappa + np.sqrt(radicand)
    return gamma if gamma > 0 else None


def _dispersion_integral(a: float) -> float:
    """integral of u*G'(u)/(a^2+u^2) du for Maxwellian G(u)=exp(-u^2)/sqrt(pi)."""
    if a == 0.0:
        return -2.0

    def integrand(u):
        return -2.0 * u * u * np.exp(-u * u) / (np.sqrt(np.pi) * (a * a + u * u))

    val, _ = integrate.quad(integrand, 0.0, np.inf,
                            epsabs=0.5 * GROWTH_QUAD_ABSTOL, epsrel=1e-12,
                            limit=200)
    return 2.0 * val


def growth_rate_residual(gamma: float, cavity: CavityParams,
                         species: tuple[SpeciesParams, ...]) -> float:
    """(gamma+kappa)^2 + delta^2 minus the dispersion sum at that gamma."""
    delta = effective_detuning(cavity, species)
    rhs = 0.0
    for s in species:
        a = gamma / (WAVENUMBER * s.thermal_velocity)
        rhs += (s.n_particles * s.pump_coupling**2 * HBAR * delta
                / (2.0 * s.init_temperature)) * _dispersion_integral(a)
    return (gamma + cavity.kappa) ** 2 + delta**2 - rhs


def growth_rate_full(cavity: CavityParams,
                     species: tuple[SpeciesParams, ...]) -> float | None:
    """Exponential growth rate of the Maxwellian uniform state, or None.

    Solves the full dispersion balance by bisection on the bracket
    (0, gamma_hot]; the residual of any returned root is below 1e-6
    relative.
    """
    report_delta, terms = _threshold_terms(cavity, species)
    if report_delta >= 0:
        raise OutOfRegimeError("growth rate requires negative effective detuning")
    if sum(terms) <= 1.0:
        return None
    hot = growth_rate_hot(cavity, species)
    # margin > 1 guarantees the hot radicand exceeds kappa^2
    hi = hot
    lo = 1e-12 * (cavity.kappa + abs(report_delta))
    r_lo = growth_rate_residual(lo, cavity, species)
    r_hi = growth_rate_residual(hi, cavity, species)
    if r_lo > 0:
        return None
    if r_hi < 0:
        # the residual is monotone; expand defensively
        while r_hi < 0:
            hi *= 2.0
            r_hi = growth_rate_residual(hi, cavity, species)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if growth_rate_residual(mid, cavity, species) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= GROWTH_ROOT_RELTOL * hi:
            break
    return 0.5 * (lo + hi)


# ----------------------------------------------------------------------
# equilibria


def temp_star(kappa: float, delta: float) -> float:
    """k_B T_* = hbar*(kappa^2+delta^2)/(4|delta|), minimal at delta=-kappa."""
    if delta >= 0:
        raise OutOfRegimeError("T_* requires negative effective detuning")
    return HBAR * (kappa**2 + delta**2) / (4.0 * abs(delta))


def qgaussian_equilibrium(cavity: CavityParams,
                          species: tuple[SpeciesParams, ...]) -> EquilibriumPrediction:
    """Homogeneous below-threshold equilibrium: q-Gaussian momenta, no field.

    q_s = 1 + omega_R,s/|delta| and the scale temperature is T_*. The
    per-species existence condition 2*delta < -omega_R,s is reported in
    ``exists``. Kinetic temperatures <p^2>/m follow from the q-Gaussian
    second moment, 2*T_*/(5-3*q_s) (divergent for q_s >= 5/3).
    """
    delta = effective_detuning(cavity, species)
    if delta >= 0:
        raise OutOfRegimeError("homogeneous equilibria require negative "
                               "effective detuning")
    tstar = temp_star(cavity.kappa, delta)
    q = tuple(1.0 + s.recoil_frequency / abs(delta) for s in species)
    exists = tuple(2.0 * delta < -s.recoil_frequency for s in species)
    t_kin = tuple(
        2.0 * tstar / (5.0 - 3.0 * qs) if qs < 5.0 / 3.0 else np.inf for qs in q
    )
    n = len(species)
    return EquilibriumPrediction(
        branch="homogeneous", q=q, temp_star=tstar,
        kinetic_temperatures=t_kin, trap_frequencies=(0.0,) * n,
        alpha0=0.0 + 0.0j, order_parameters=(0.0,) * n,
        uncertainty_products=(np.inf,) * n, energies=tuple(0.5 * t for t in t_kin),
        exists=exists,
    )


def _boltzmann_averages(alpha: complex, temp: float, s: SpeciesParams):
    """(<sin kx>, <sin^2 kx>) under the Boltzmann weight of the full potential."""
    x = np.arange(BOLTZMANN_GRID) * (TWO_PI / BOLTZMANN_GRID)
    sin_x = np.sin(x)
    phi = (2.0 * s.pump_coupling * alpha.real * sin_x
           + s.light_shift * abs(alpha) ** 2 * sin_x**2)
    w = np.exp(-(phi - phi.min()) / temp)
    norm = w.sum()
    return float((w * sin_x).sum() / norm), float((w * sin_x**2).sum() / norm)


def organised_equilibrium(cavity: CavityParams,
                          species: tuple[SpeciesParams, ...],
                          tol: float = 1e-10,
                          max_iter: int = 10000) -> EquilibriumPrediction:
    """Selfconsistent organised equilibrium (above-threshold branch).

    Iterates the steady-state field equation with Boltzmann order
    parameters at the predicted kinetic temperatures (damped fixed point,
    damping 0.5). The reported solution has Re(alpha0) <= 0, i.e.
    particles trapped at the sin(kx) = +1 wells; the mirrored branch is
    physically equivalent. ``collapsed`` flags convergence to alpha = 0,
    meaning the configuration is effectively below threshold.
    """
    kappa = cavity.kappa
    n = len(species)

    # start from a strongly ordered guess on the Re(alpha) <= 0 branch
    delta_eff = effective_detuning(cavity, species)
    if delta_eff >= 0:
        raise OutOfRegimeError("organised equilibria require negative "
                               "effective detuning")
    source = sum(s.n_particles * s.pump_coupling for s in species) * 0.5
    alpha = -1j * source / (kappa - 1j * delta_eff)

    ms = [0.5] * n
    mb = [0.5] * n
    residual = np.inf
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        tstar = temp_star(kappa, delta_eff)
        omega0_sq = [
            4.0 * s.pump_coupling * s.recoil_frequency * abs(alpha.real)
            for s in species
        ]
        t_kin = [tstar + HBAR * w2 / abs(delta_eff) for w2 in omega0_sq]
        for i, s in enumerate(species):
            ms[i], mb[i] = _boltzmann_averages(alpha, t_kin[i], s)
        delta_eff = cavity.detuning - sum(
            s.n_particles * s.light_shift * mb[i] for i, s in enumerate(species)
        )
        if delta_eff >= 0:
            raise OutOfRegimeError("bunching shift drove the effective "
                                   "detuning non-negative")
        target = -1j * sum(
            s.n_particles * s.pump_coupling * ms[i] for i, s in enumerate(species)
        ) / (kappa - 1j * delta_eff)
        residual = abs(target - alpha)
        alpha = alpha + 0.5 * (target - alpha)
        if residual < tol * max(1.0, abs(alpha)):
            converged = True
            break

    collapsed = abs(alpha) < 1e-6 * max(1.0, source / kappa)
    if alpha.real > 0:
        # mirrored branch: shift kx -> kx + pi
        alpha = -alpha
        ms = [-m for m in ms]

    tstar = temp_star(kappa, delta_eff)
    omega0 = tuple(
        float(np.sqrt(4.0 * s.pump_coupling * s.recoil_frequency
                      * abs(alpha.real)))
        for s in species
    )
    t_kin = tuple(tstar + HBAR * w0**2 / abs(delta_eff) for w0 in omega0)
    uncert = tuple(
        t / (HBAR * w0) if w0 > 0 else np.inf for t, w0 in zip(t_kin, omega0)
    )
    energies = tuple(
        u * HBAR * w0 if np.isfinite(u) else np.inf
        for u, w0 in zip(uncert, omega0)
    )
    return EquilibriumPrediction(
        branch="organised", q=None, temp_star=tstar,
        kinetic_temperatures=t_kin, trap_frequencies=omega0,
        alpha0=complex(alpha), order_parameters=tuple(abs(m) for m in ms),
        uncertainty_products=uncert, energies=energies,
        exists=(True,) * n, converged=converged, collapsed=collapsed,
        residual=float(residual), iterations=iterations,
    )


# ----------------------------------------------------------------------
# actions and the adiabatic map


def trap_amplitude(alpha: complex, s: SpeciesParams) -> float:
    """Weak-coupling potential amplitude A = 2*hbar*eta_s*|Re alpha|."""
    return 2.0 * HBAR * s.pump_coupling * abs(complex(alpha).real)


def action(energy, alpha: complex, s: SpeciesParams):
    """Single-particle action of the weak-coupling potential A*sin(kx).

    Closed orbits (H < A) use the full libration loop; open orbits one
    spatial period. Evaluated in closed form via complete elliptic
    integrals; reduces to |p|/k for vanishing field. Energies below the
    potential minimum -A raise a ValueError.
    """
    amp = trap_amplitude(alpha, s)
    energy = np.asarray(energy, dtype=float)
    scalar = energy.ndim == 0
    energy = np.atleast_1d(energy)
    if np.any(energy < -amp - 1e-12 * max(amp, 1.0)):
        raise ValueError("energy below the potential minimum -A")
    m = s.mass
    if amp == 0.0:
        out = np.sqrt(2.0 * m * np.maximum(energy, 0.0)) / WAVENUMBER
        return float(out[0]) if scalar else out

    out = np.empty_like(energy)
    ksq = np.clip((energy + amp) / (2.0 * amp), 0.0, None)
    trapped = ksq < 1.0
    # libration: I = (8/pi) sqrt(m A) [E(k) - (1-k^2) K(k)]
    kt = np.clip(ksq[trapped], 0.0, 1.0)
    out[trapped] = (8.0 / np.pi) * np.sqrt(m * amp) * (
        special.ellipe(kt) - (1.0 - kt) * special.ellipkm1(1.0 - kt)
    )
    # rotation: I = (2/pi) sqrt(2 m (H+A)) E(1/k)
    kr = ksq[~trapped]
    out[~trapped] = (2.0 / np.pi) * np.sqrt(
        2.0 * m * (energy[~trapped] + amp)
    ) * special.ellipe(1.0 / kr)
    out /= WAVENUMBER
    return float(out[0]) if scalar else out


def adiabatic_momentum(x, p, alpha: complex, s: SpeciesParams):
    """Mapped momentum J(x, p): k*I for open orbits, k*I/2 for trapped ones.

    Continuous across the separatrix and equal to |p| for zero field.
    """
    amp = trap_amplitude(alpha, s)
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    energy = p**2 / (2.0 * s.mass) + 2.0 * HBAR * s.pump_coupling \
        * complex(alpha).real * np.sin(x)
    act = action(energy, alpha, s)
    trapped = energy < amp
    return np.where(trapped, 0.5 * act, act) * WAVENUMBER


@dataclass
class AdiabaticPrediction:
    """Selforganised state predicted by adiabatic action invariance."""

    f0: object
    alpha_final: complex
    species: SpeciesParams

    def phase_space_density(self, x, p):
        """f_so(x, p) = f0(J(x, p)); assumes an even initial f0."""
        return np.asarray(self.f0(
            adiabatic_momentum(x, p, self.alpha_final, self.species)
        ))

    def momentum_marginal(self, p_grid, n_x: int = 512):
        """Numerically x-averaged momentum density on the given grid."""
        p_grid = np.asarray(p_grid, dtype=float)
        x = (np.arange(n_x) + 0.5) * (TWO_PI / n_x)
        dens = self.phase_space_density(x[:, None], p_grid[None, :])
        return dens.mean(axis=0)

    def order_parameter(self, p_max: float, n_x: int = 512, n_p: int = 801):
        """|<sin kx>| of the mapped state on a phase-space grid."""
        x = (np.arange(n_x) + 0.5) * (TWO_PI / n_x)
        p = np.linspace(-p_max, p_max, n_p)
        dens = self.phase_space_density(x[:, None], p[None, :])
        total = dens.sum()
        if total == 0:
            return 0.0
        return float(abs((dens * np.sin(x)[:, None]).sum() / total))


def adiabatic_map(f0, alpha_final: complex, s: SpeciesParams) -> AdiabaticPrediction:
    """Map an even initial momentum distribution onto the organised state.

    ``f0`` is a callable momentum density (symmetric in p; odd components
    are unsupported). For ``alpha_final = 0`` the map is the identity.
    """
    return AdiabaticPrediction(f0=f0, alpha_final=complex(alpha_final), species=s)


def maxwellian_density(temperature: float, mass: float):
    """Normalised Maxwellian momentum density at the given temperature."""
    sigma_sq = mass * temperature

    def f0(p):
        p = np.asarray(p, dtype=float)
        return np.exp(-(p**2) / (2.0 * sigma_sq)) / np.sqrt(2.0 * np.pi * sigma_sq)

    return f0


@dataclass(frozen=True)
class AdiabaticEquilibrium:
    """Selfconsistent field and order parameters of the mapped state."""

    alpha0: complex
    order_parameters: tuple[float, ...]
    predictions: tuple[AdiabaticPrediction, ...]
    converged: bool
    residual: float
    iterations: int


def _signed_sin(pred: AdiabaticPrediction, p_max: float,
                n_x: int = 256, n_p: int = 401) -> float:
    x = (np.arange(n_x) + 0.5) * (TWO_PI / n_x)
    p = np.linspace(-p_max, p_max, n_p)
    dens = pred.phase_space_density(x[:, None], p[None, :])
    total = dens.sum()
    if total == 0:
        return 0.0
    return float((dens * np.sin(x)[:, None]).sum() / total)


def adiabatic_equilibrium(cavity: CavityParams,
                          species: tuple[SpeciesParams, ...],
                          f0s=None, tol: float = 1e-8,
                          max_iter: int = 500) -> AdiabaticEquilibrium:
    """Selfconsistent organised state under adiabatic action invariance.

    The initial momentum densities ``f0s`` default to Maxwellians at the
    species' initial temperatures. Applies in the weak-coupling regime
    (light shifts enter only through the uniform bunching shift of the
    detuning); the returned field sits on the Re(alpha0) <= 0 branch.
    """
    if f0s is None:
        f0s = [maxwellian_density(s.init_temperature, s.mass) for s in species]
    delta = effective_detuning(cavity, species)
    if delta >= 0:
        raise OutOfRegimeError("adiabatic equilibria require negative "
                               "effective detuning")
    kappa = cavity.kappa
    denom = kappa - 1j * delta
    source = 0.5 * sum(s.n_particles * s.pump_coupling for s in species)
    alpha = -1j * source / denom

    residual = np.inf
    converged = False
    iterations = 0
    preds: tuple[AdiabaticPrediction, ...] = ()
    sines = [0.0] * len(species)
    for iterations in range(1, max_iter + 1):
        preds = tuple(adiabatic_map(f0, alpha, s) for f0, s in zip(f0s, species))
        for i, s in enumerate(species):
            p_th = np.sqrt(s.mass * s.init_temperature)
            p_sep = 2.0 * np.sqrt(s.mass * max(trap_amplitude(alpha, s), 0.0))
            sines[i] = _signed_sin(preds[i], 6.0 * p_th + 2.0 * p_sep)
        target = -1j * sum(
            s.n_particles * s.pump_coupling * sines[i]
            for i, s in enumerate(species)
        ) / denom
        residual = abs(target - alpha)
        alpha = alpha + 0.5 * (target - alpha)
        if residual < tol * max(1.0, abs(alpha)):
            converged = True
            break

    if alpha.real > 0:
        alpha = -alpha
        sines = [-m for m in sines]
    preds = tuple(adiabatic_map(f0, alpha, s) for f0, s in zip(f0s, species))
    return AdiabaticEquilibrium(
        alpha0=complex(alpha), order_parameters=tuple(abs(m) for m in sines),
        predictions=preds, converged=converged, residual=float(residual),
        iterations=iterations,
    )


# ----------------------------------------------------------------------
# uniform-limit transport coefficients and heat flow


def friction_diffusion_uniform(p: float, cavity: CavityParams,
                               s: SpeciesParams) -> tuple[float, float]:
    """Momentum drift and diffusion coefficients of the uniform limit.

    On free orbits only the n = +-1 harmonics survive with
    |g_{+-1}|^2 = 1/4 and orbital frequency omega = k*p/m. Returns the
    coefficients (A, B) of the action-space Fokker-Planck operator
    d/dI (A f + B df/dI), scaled to momentum through I = p/k. The
    weak-coupling dispersion denominator |D(i n omega)|^2 =
    |(i n omega + kappa)^2 + delta^2|^2 is used, with delta the bare
    pump-cavity detuning.
    """
    kappa = cavity.kappa
    delta = cavity.detuning
    eta = s.pump_coupling
    omega = WAVENUMBER * p / s.mass
    den = (kappa**2 + delta**2 - omega**2) ** 2 + 4.0 * kappa**2 * omega**2
    drift = -2.0 * HBAR * delta * eta**2 * kappa * omega / den
    diffusion = (HBAR**2 * eta**2 * kappa
                 * (kappa**2 + delta**2 + omega**2) / (2.0 * den))
    return drift, diffusion


def heat_flow(cavity: CavityParams, s1: SpeciesParams,
              s2: SpeciesParams) -> HeatFlow:
    """Interspecies energy flow per particle for two homogeneous ensembles.

    Uses the species' ``init_temperature`` fields as the instantaneous
    kinetic temperatures. Preconditions (species one cold,
    2*k_B*T_1/(hbar*kappa) << kappa/omega_rec, and the mixture far from
    instability) are warned about, not enforced. The conjugate flux obeys
    Q_21 = -(N_1 m_1)/(N_2 m_2) * Q_12.
    """
    delta = effective_detuning(cavity, (s1, s2))
    t1 = s1.init_temperature
    t2 = s2.init_temperature
    if 2.0 * t1 / (HBAR * cavity.kappa) > 0.1 * cavity.kappa:
        warnings.warn("heat_flow precondition violated: species one is not "
                      "cold on the cavity scale", stacklevel=2)
    if delta < 0:
        margin = stability_margin(cavity, (s1, s2)).threshold_lhs
        if margin >= 1.0:
            warnings.warn("heat_flow precondition violated: mixture is not "
                          "far from the instability threshold", stacklevel=2)
    q21 = (s1.n_particles * s2.pump_coupling**2 * s1.pump_coupling**2
           * 4.0 * np.sqrt(np.pi) * HBAR * delta**2
           / (cavity.kappa**2 + delta**2) ** 2
           * np.sqrt(HBAR * s1.recoil_frequency / t1)
           * (1.0 - t2 / t1)
           * (1.0 + s1.mass * t2 / (s2.mass * t1)) ** -1.5)
    q12 = -(s2.n_particles * s2.mass) / (s1.n_particles * s1.mass) * q21
    return HeatFlow(q_2to1=float(q21), q_1to2=float(q12))
