"""Simulation of cointegration systems with abrupt variance breaks.

The simulated system is

    y_t  = g(x_t, theta) + u_t
    u_t  = rho * u_{t-1} + zeta_u,t + mu_t          u_0 = 0
    mu_t = mu_{t-1} + rho_mu * zeta_mu,t            mu_0 = 0
    x_t  = x_{t-1} + zeta_x,t                       x_0 = 0

where (zeta_u, zeta_x, zeta_mu)_t is jointly Gaussian with a time-varying
covariance matrix built from per-component variance paths.  The null of
cointegration corresponds to ``rho_mu_sq == 0``; any positive value adds a
random-walk component to the error term.

Each variance path is constant up to a break date floor(tau * T) and
constant afterwards.  The correlation between zeta_u and zeta_x is held
fixed at ``lam`` through the breaks by scaling the covariance with the
current standard deviations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .exceptions import NotPositiveDefinite
from .models import ModelSpec, as_theta, eval_model

# Guards floor(tau * T) against binary representation error, e.g.
# 0.3 * 10 == 2.9999999999999996.
_FLOOR_EPS = 1e-9


@dataclass(frozen=True)
class BreakSpec:
    """One abrupt variance break: pre_value before floor(tau*T), post_value after.

    ``tau = 0`` means the indicator fires from the first observation, i.e. a
    constant path at ``post_value``; to keep that case unambiguous we require
    ``pre_value == post_value`` whenever ``tau == 0``.
    """

    tau: float
    pre_value: float
    post_value: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")
        for name in ("pre_value", "post_value"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if self.tau == 0.0 and self.pre_value != self.post_value:
            raise ValueError("tau == 0 encodes 'no break': pre_value must equal post_value")

    @classmethod
    def constant(cls, value: float = 1.0) -> "BreakSpec":
        return cls(0.0, value, value)


def variance_path(spec: BreakSpec, T: int) -> np.ndarray:
    """Length-T variance path; entry t (1-based) breaks at t >= floor(tau*T)."""
    if T < 1:
        raise ValueError("T must be >= 1")
    t = np.arange(1, T + 1)
    k = math.floor(spec.tau * T + _FLOOR_EPS)
    return np.where(t >= k, spec.post_value, spec.pre_value).astype(float)


@dataclass(frozen=True)
class DgpConfig:
    """Full description of one simulated system.

    Parameters
    ----------
    T : int
        Sample length.
    model : ModelSpec
        Mean function of y_t.
    theta : array_like
        True parameter vector of the mean function.
    rho : float
        AR(1) coefficient of the error term, |rho| < 1.
    rho_mu_sq : float
        Squared loading of the random-walk error component (0 under the
        null of cointegration).
    lam : float
        Time-constant correlation between zeta_u and zeta_x, |lam| < 1.
    u_break, x_break, mu_break : BreakSpec
        Variance paths of the three innovation components.
    """

    T: int
    model: ModelSpec
    theta: tuple
    rho: float = 0.0
    rho_mu_sq: float = 0.0
    lam: float = 0.0
    u_break: BreakSpec = BreakSpec.constant()
    x_break: BreakSpec = BreakSpec.constant()
    mu_break: BreakSpec = BreakSpec.constant()

    def __post_init__(self) -> None:
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not abs(self.rho) < 1.0:
            raise ValueError(f"|rho| must be < 1, got {self.rho}")
        if self.rho_mu_sq < 0.0:
            raise ValueError(f"rho_mu_sq must be >= 0, got {self.rho_mu_sq}")
        if not abs(self.lam) < 1.0:
            raise NotPositiveDefinite(
                f"|lam| must be < 1 for a positive definite covariance, got {self.lam}"
            )
        as_theta(self.model, self.theta)
        object.__setattr__(self, "theta", tuple(float(v) for v in np.ravel(self.theta)))


@dataclass(frozen=True)
class SimulatedSample:
    """One simulated draw; regenerable bit-exactly from (config, seed)."""

    y: np.ndarray
    x: np.ndarray
    u: np.ndarray
    seed: int


def covariance_at(config: DgpConfig, t: int) -> np.ndarray:
    """3x3 innovation covariance at time t (1-based).

    The (u, x) covariance is ``lam * sigma_u,t * sigma_x,t`` so that the
    innovation correlation stays at ``lam`` through variance breaks; the
    random-walk component is uncorrelated with both.
    """
    if not 1 <= t <= config.T:
        raise ValueError(f"t must lie in [1, {config.T}], got {t}")
    if not abs(config.lam) < 1.0:
        raise NotPositiveDefinite("|lam| >= 1")
    su2 = variance_path(config.u_break, config.T)[t - 1]
    sx2 = variance_path(config.x_break, config.T)[t - 1]
    sm2 = variance_path(config.mu_break, config.T)[t - 1]
    sux = config.lam * math.sqrt(su2) * math.sqrt(sx2)
    return np.array(
        [
            [su2, sux, 0.0],
            [sux, sx2, 0.0],
            [0.0, 0.0, sm2],
        ]
    )


def innovation_cholesky(config: DgpConfig, t: int) -> np.ndarray:
    """Lower-triangular Cholesky factor of ``covariance_at(config, t)``.

    Closed form under the block structure; ``simulate_system`` applies the
    same factor row-wise in vectorized form.
    """
    cov = covariance_at(config, t)
    su = math.sqrt(cov[0, 0])
    sx = math.sqrt(cov[1, 1])
    sm = math.sqrt(cov[2, 2])
    lam = config.lam
    return np.array(
        [
            [su, 0.0, 0.0],
            [lam * sx, math.sqrt(1.0 - lam * lam) * sx, 0.0],
            [0.0, 0.0, sm],
        ]
    )


def simulate_system(config: DgpConfig, seed: int) -> SimulatedSample:
    """Draw one sample of (y, x) plus the latent error u.

    The innovations are ``zeta_t = L_t zeta*_t`` with ``zeta*_t`` i.i.d.
    standard trivariate normal and ``L_t`` the lower-triangular Cholesky
    factor of the covariance at time t.  Given the block structure the
    factor has the closed form used below, which lets the whole path be
    generated without a per-period matrix factorization.
    """
    T = config.T
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((T, 3))

    su = np.sqrt(variance_path(config.u_break, T))
    sx = np.sqrt(variance_path(config.x_break, T))
    sm = np.sqrt(variance_path(config.mu_break, T))
    lam = config.lam

    zeta_u = su * z[:, 0]
    zeta_x = lam * sx * z[:, 0] + math.sqrt(1.0 - lam * lam) * sx * z[:, 1]
    zeta_mu = sm * z[:, 2]

    mu = math.sqrt(config.rho_mu_sq) * np.cumsum(zeta_mu)
    if config.rho == 0.0:
        u = zeta_u + mu
    else:
        u = lfilter([1.0], [1.0, -config.rho], zeta_u + mu)
    x = np.cumsum(zeta_x)
    tidx = np.arange(1, T + 1)
    y = eval_model(config.model, x, tidx, config.theta) + u
    return SimulatedSample(y=y, x=x, u=u, seed=seed)
