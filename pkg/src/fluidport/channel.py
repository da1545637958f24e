"""Spatially correlated alpha-mu channel generation for a linear fluid antenna.

The antenna exposes N candidate positions (ports) inside an aperture of W
wavelengths.  Ports share the aperture, so their small-scale fading is
correlated; we use the Jakes-type correlation of a uniform linear layout,

    rho(n, k) = J0(2 * pi * |n - k| * W / (N - 1)),

with J0 the zeroth-order Bessel function of the first kind.  Envelopes follow
the alpha-mu model built from 2*mu squared correlated Gaussians,

    R^alpha = sigma2 * sum_{i=1..2mu} z_i^2,   sigma2 = rhat^alpha / (2*mu),

which keeps the spatial correlation at the Gaussian level and restricts mu to
integers.  The complex gain takes its phase from the first in-phase/quadrature
pair, g = R * exp(j * atan2(z2, z1)).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import j0

from ._validation import check_finite_array, check_int, check_positive, rng_from

__all__ = [
    "FadingParams",
    "AntennaConfig",
    "CorrelationFactor",
    "ChannelRealization",
    "unit_power_rhat",
    "amu_moment",
    "build_correlation_matrix",
    "factorize_correlation",
    "envelope_from_gaussians",
    "generate_realization",
    "generate_gain_batch",
]

# Reconstruction tolerance for the factor L against (matrix + jitter * I).
_FACTOR_TOL = 1e-8
_JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4)


def unit_power_rhat(alpha, mu):
    """rhat making E[R^2] = 1, i.e. rhat^2 = mu^(2/alpha) * G(mu) / G(mu + 2/alpha)."""
    return float(np.sqrt(mu ** (2.0 / alpha) * gamma_fn(mu) / gamma_fn(mu + 2.0 / alpha)))


def amu_moment(alpha, mu, rhat, k):
    """Analytic k-th envelope moment E[R^k] of the alpha-mu model."""
    return float(rhat**k * gamma_fn(mu + k / alpha) / (mu ** (k / alpha) * gamma_fn(mu)))


@dataclass(frozen=True)
class FadingParams:
    """alpha-mu fading parameters.

    ``rhat`` is the alpha-root mean value (E[R^alpha] = rhat^alpha).  When left
    unset it is chosen so that E[R^2] = 1, which makes the average SNR of the
    system well-defined as signal_power / noise_power.
    """

    alpha: float
    mu: int
    rhat: float = None

    def __post_init__(self):
        check_positive("alpha", self.alpha)
        check_int("mu", self.mu, minimum=1)
        if self.rhat is None:
            object.__setattr__(self, "rhat", unit_power_rhat(self.alpha, self.mu))
        check_positive("rhat", self.rhat)


@dataclass(frozen=True)
class AntennaConfig:
    """Linear fluid antenna: ``n_ports`` positions over ``aperture`` wavelengths."""

    n_ports: int
    aperture: float

    def __post_init__(self):
        check_int("n_ports", self.n_ports, minimum=2)
        check_positive("aperture", self.aperture)


@dataclass(frozen=True)
class CorrelationFactor:
    """Factor L of a port-correlation matrix with L @ L.T ~= matrix."""

    matrix: np.ndarray
    factor: np.ndarray
    jitter_applied: float
    method: str = "cholesky"

    @property
    def n_ports(self):
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ChannelRealization:
    """Complex port gains for one coherence interval.

    ``gains[u, n]`` is the gain between BS antenna u and port n of the served
    user; row 0 is the desired link, rows 1..U-1 act as interference.
    """

    gains: np.ndarray
    seed: int = field(default=0)

    def __post_init__(self):
        check_finite_array("gains", self.gains)
        if self.gains.ndim != 2:
            raise ValueError(f"gains must be 2-D (U, N), got shape {self.gains.shape}")


def build_correlation_matrix(antenna):
    """Jakes-type port correlation, entry (n, k) = J0(2*pi*|n-k|*W/(N-1))."""
    n = check_int("n_ports", antenna.n_ports, minimum=2)
    w = check_positive("aperture", antenna.aperture)
    lags = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    return j0(2.0 * np.pi * lags * w / (n - 1))


def factorize_correlation(matrix, method="cholesky"):
    """Factor a symmetric unit-diagonal correlation matrix as L @ L.T.

    ``method="cholesky"`` adds the smallest diagonal jitter from
    ``{0, 1e-12, 1e-10, ..., 1e-4}`` that makes the Cholesky factorization
    succeed; ``method="eig"`` instead clips negative eigenvalues at zero.
    Either way the reconstruction error against (matrix + jitter * I) stays
    below 1e-8.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"correlation matrix must be square, got shape {matrix.shape}")
    if np.max(np.abs(matrix - matrix.T)) > 1e-9:
        raise ValueError("correlation matrix is asymmetric beyond 1e-9")
    if np.max(np.abs(np.diag(matrix) - 1.0)) > 1e-9:
        raise ValueError("correlation matrix must have a unit diagonal")

    if method == "cholesky":
        eye = np.eye(matrix.shape[0])
        for jitter in _JITTER_LADDER:
            try:
                factor = np.linalg.cholesky(matrix + jitter * eye)
            except np.linalg.LinAlgError:
                continue
            return _checked_factor(matrix, factor, jitter, "cholesky")
        raise np.linalg.LinAlgError(
            f"Cholesky factorization failed at jitter {_JITTER_LADDER[-1]:g}"
        )
    if method == "eig":
        eigval, eigvec = np.linalg.eigh(matrix)
        factor = eigvec * np.sqrt(np.clip(eigval, 0.0, None))
        return _checked_factor(matrix, factor, 0.0, "eig")
    raise ValueError(f"unknown factorization method {method!r}")


def _checked_factor(matrix, factor, jitter, method):
    target = matrix + jitter * np.eye(matrix.shape[0])
    err = np.max(np.abs(factor @ factor.T - target))
    if err > _FACTOR_TOL:
        raise np.linalg.LinAlgError(
            f"factor reconstruction error {err:.3e} exceeds {_FACTOR_TOL:g}"
        )
    return CorrelationFactor(matrix, factor, jitter, method)


def envelope_from_gaussians(z, params):
    """Map 2*mu rows of standard Gaussians to alpha-mu envelopes and phases.

    ``z`` has shape (2*mu, N); each column may carry spatial correlation.
    Returns (envelope, phase) arrays of length N with

        envelope = (sigma2 * sum_i z_i^2) ** (1/alpha),  sigma2 = rhat^alpha/(2 mu)
        phase    = atan2(z[1], z[0])
    """
    z = check_finite_array("z", np.asarray(z, dtype=float))
    if z.ndim != 2 or z.shape[0] != 2 * params.mu:
        raise ValueError(f"z must have 2*mu = {2 * params.mu} rows, got shape {z.shape}")
    sigma2 = params.rhat**params.alpha / (2.0 * params.mu)
    envelope = (sigma2 * np.sum(z**2, axis=0)) ** (1.0 / params.alpha)
    phase = np.arctan2(z[1], z[0])
    return envelope, phase


def _correlated_gaussians(factor, rng, n_layers):
    """Draw ``n_layers`` rows of port-correlated standard Gaussians."""
    raw = rng.standard_normal((n_layers, factor.n_ports))
    return raw @ factor.factor.T


def generate_realization(system, antenna, params, factor, rng_seed):
    """One channel realization: U independent rows of correlated alpha-mu gains."""
    if factor.n_ports != antenna.n_ports:
        raise ValueError(
            f"factor built for {factor.n_ports} ports, antenna has {antenna.n_ports}"
        )
    rng = rng_from(rng_seed)
    gains = np.empty((system.n_users, antenna.n_ports), dtype=complex)
    for u in range(system.n_users):
        z = _correlated_gaussians(factor, rng, 2 * params.mu)
        envelope, phase = envelope_from_gaussians(z, params)
        gains[u] = envelope * np.exp(1j * phase)
    return ChannelRealization(gains=gains, seed=int(rng_seed))


def generate_gain_batch(system, antenna, params, factor, rng, batch):
    """Vectorized draw of (batch, U, N) complex gains for a Monte Carlo chunk.

    Rows are mutually independent realizations with the same per-row
    statistics as ``generate_realization``.
    """
    if factor.n_ports != antenna.n_ports:
        raise ValueError(
            f"factor built for {factor.n_ports} ports, antenna has {antenna.n_ports}"
        )
    mu, alpha = params.mu, params.alpha
    raw = rng.standard_normal((batch, system.n_users, 2 * mu, antenna.n_ports))
    z = raw @ factor.factor.T
    sigma2 = params.rhat**alpha / (2.0 * mu)
    envelope = (sigma2 * np.sum(z**2, axis=2)) ** (1.0 / alpha)
    phase = np.arctan2(z[:, :, 1, :], z[:, :, 0, :])
    return envelope * np.exp(1j * phase)
