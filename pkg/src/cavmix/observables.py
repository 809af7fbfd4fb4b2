"""Measured quantities: order parameters, temperatures, histograms, fits.

The q-Gaussian density used for fitting is

    f(p) = sqrt(beta)/C_q * [1 + (q-1)*beta*p^2]^(-1/(q-1)),
    beta = 1/(2*m*k_B*T),

with the normalisation constant C_q of the q >= 1 branch; it reduces to
the Maxwellian as q -> 1. Fits are performed on the histogram density
(not its logarithm) with weights proportional to sqrt(counts), so the
sparse heavy tails are weighted by their actual statistical precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .model import ConfigError, SimState, SpeciesParams

DEFAULT_BINS = 64
DEFAULT_HALF_WIDTH_SIGMAS = 5.0


@dataclass
class Histogram:
    """Uniform-bin histogram with optional density normalisation."""

    edges: np.ndarray
    counts: np.ndarray
    total_weight: float
    normalized: bool = False

    def __post_init__(self) -> None:
        if np.any(self.counts < 0):
            raise ConfigError("histogram counts must be non-negative")
        widths = np.diff(self.edges)
        if not np.allclose(widths, widths[0]):
            raise ConfigError("histogram bins must be uniform")

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def bin_width(self) -> float:
        return float(self.edges[1] - self.edges[0])

    def density(self) -> np.ndarray:
        """Counts normalised to unit integral."""
        if self.total_weight == 0:
            return np.zeros_like(self.counts, dtype=float)
        return self.counts / (self.total_weight * self.bin_width)

    def cdf(self) -> np.ndarray:
        """Empirical CDF evaluated at the right bin edges."""
        if self.total_weight == 0:
            return np.zeros_like(self.counts, dtype=float)
        return np.cumsum(self.counts) / self.total_weight


def histogram(samples: np.ndarray, bins: int = DEFAULT_BINS,
              half_width: float | None = None) -> Histogram:
    """Histogram of samples over +-half_width (default 5 sample sigmas)."""
    samples = np.asarray(samples, dtype=float)
    if half_width is None:
        scale = np.sqrt(np.mean(samples**2)) if samples.size else 1.0
        half_width = DEFAULT_HALF_WIDTH_SIGMAS * max(scale, 1e-300)
    counts, edges = np.histogram(samples, bins=bins, range=(-half_width, half_width))
    return Histogram(edges=edges, counts=counts.astype(float),
                     total_weight=float(samples.size))


@dataclass
class QGaussianFit:
    """Least-squares q-Gaussian fit result."""

    q: float
    temperature: float
    residual: float
    q_halfwidth: float
    temperature_halfwidth: float


def order_parameter(state: SimState, species_index: int) -> float:
    """|mean of sin(kx)| over the particles of one species."""
    return float(abs(np.mean(np.sin(state.positions[species_index]))))


def kinetic_temperature(state: SimState, species_index: int,
                        s: SpeciesParams) -> float:
    """k_B T_kin = <p^2>/m for one species."""
    p = state.momenta[species_index]
    return float(np.mean(p**2) / s.mass)


def photon_number(state: SimState) -> float:
    """|alpha|^2."""
    return float(abs(state.alpha) ** 2)


def bunching(state: SimState, species_index: int) -> float:
    """<sin^2(kx)> over the particles of one species."""
    return float(np.mean(np.sin(state.positions[species_index]) ** 2))


# ----------------------------------------------------------------------
# q-Gaussian density and fitting


def _cq(q: float) -> float:
    """Normalisation of the q >= 1 branch, integral of e_q(-u^2) du."""
    if q < 1.0 + 1e-12:
        return np.sqrt(np.pi)
    if q >= 3.0:
        raise ConfigError("q-Gaussian is not normalisable for q >= 3")
    # log-gamma form stays finite for q arbitrarily close to 1
    lg = special.gammaln
    return (np.sqrt(np.pi) / np.sqrt(q - 1.0)
            * np.exp(lg((3.0 - q) / (2.0 * (q - 1.0))) - lg(1.0 / (q - 1.0))))


def qgaussian_density(p, q: float, temperature: float, mass: float):
    """Normalised momentum density exp_q(-p^2/(2*m*k_B*T))/norm."""
    p = np.asarray(p, dtype=float)
    beta = 1.0 / (2.0 * mass * temperature)
    if q < 1.0 + 1e-12:
        return np.sqrt(beta / np.pi) * np.exp(-beta * p**2)
    base = 1.0 + (q - 1.0) * beta * p**2
    return np.sqrt(beta) / _cq(q) * base ** (-1.0 / (q - 1.0))


def sample_qgaussian(n: int, q: float, temperature: float, mass: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Exact sampler for the q >= 1 branch via the Student-t mapping."""
    if q < 1.0 + 1e-12:
        return rng.normal(0.0, np.sqrt(mass * temperature), n)
    if q >= 3.0:
        raise ConfigError("q-Gaussian is not normalisable for q >= 3")
    dof = (3.0 - q) / (q - 1.0)
    scale = np.sqrt(2.0 * mass * temperature / (3.0 - q))
    return scale * rng.standard_t(dof, n)


def fit_qgaussian(hist: Histogram, mass: float) -> QGaussianFit:
    """Weighted least-squares fit of (q, T) to a histogram density.

    Requires at least 20 nonzero bins. The fit is constrained to the
    q >= 1 branch; non-convergence raises with the best iterate attached.
    """
    nonzero = hist.counts > 0
    if np.count_nonzero(nonzero) < 20:
        raise ConfigError(
            f"q-Gaussian fit needs >= 20 nonzero bins, got {np.count_nonzero(nonzero)}"
        )
    centers = hist.centers[nonzero]
    dens = hist.density()[nonzero]
    weights = np.sqrt(hist.counts[nonzero])
    weights /= weights.max()

    t0 = max(np.sum(hist.density() * hist.centers**2) * hist.bin_width / mass, 1e-12)

    def resid(params):
        q, temp = params
        return weights * (qgaussian_density(centers, q, temp, mass) - dens)

    sol = optimize.least_squares(
        resid, x0=(1.1, t0), bounds=((1.0, 1e-12), (2.99, np.inf)), xtol=1e-12,
    )
    if not sol.success:
        raise RuntimeError(
            f"q-Gaussian fit did not converge (best iterate q={sol.x[0]:.4g}, "
            f"T={sol.x[1]:.4g}, cost={sol.cost:.3g})"
        )
    q_hat, t_hat = sol.x
    residual = float(np.sqrt(2.0 * sol.cost / max(sol.fun.size - 2, 1)))

    # 1-sigma half-widths from the Gauss-Newton covariance
    try:
        jtj = sol.jac.T @ sol.jac
        cov = np.linalg.inv(jtj) * (2.0 * sol.cost / max(sol.fun.size - 2, 1))
        q_hw, t_hw = np.sqrt(np.maximum(np.diag(cov), 0.0))
    except np.linalg.LinAlgError:
        q_hw = t_hw = np.inf
    return QGaussianFit(q=float(q_hat), temperature=float(t_hat),
                        residual=residual, q_halfwidth=float(q_hw),
                        temperature_halfwidth=float(t_hw))


# ----------------------------------------------------------------------
# distribution distance


def ks_distance(hist_a: Histogram, hist_b: Histogram) -> float:
    """Sup-norm distance between the empirical CDFs of two histograms.

    The histograms are compared on the union of their bin edges; outside
    a histogram's support its CDF is 0 (left) or 1 (right).
    """
    grid = np.union1d(hist_a.edges, hist_b.edges)

    def cdf_on(hist: Histogram, xs: np.ndarray) -> np.ndarray:
        inner = np.concatenate([[0.0], hist.cdf()])
        return np.interp(xs, hist.edges, inner, left=0.0, right=1.0)

    return float(np.max(np.abs(cdf_on(hist_a, grid) - cdf_on(hist_b, grid))))
