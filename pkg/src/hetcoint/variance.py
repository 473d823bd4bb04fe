"""Variance estimators for the test-statistic denominator.

Two estimators are available: the parametric residual variance (mean of
squared residuals, appropriate when the errors are serially uncorrelated)
and the Bartlett-kernel long-run variance with the bandwidth rule
floor(4 * (T/100)^(1/4)) of Kwiatkowski, Phillips, Schmidt and Shin (1992).
Residuals come from a fitted regression, so neither estimator re-centers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import DegenerateVariance

# Relative floor applied to the long-run variance so the statistic
# denominator never collapses on pathological samples.
_LRV_FLOOR = 1e-12


class LrvKind(str, Enum):
    PARAMETRIC = "parametric"
    BARTLETT = "bartlett"


@dataclass(frozen=True)
class LrvConfig:
    """Long-run variance choice: estimator kind and bandwidth.

    ``bandwidth=None`` selects the automatic rule; it is ignored for the
    parametric estimator.
    """

    kind: LrvKind = LrvKind.PARAMETRIC
    bandwidth: int | None = None

    @classmethod
    def parametric(cls) -> "LrvConfig":
        return cls(LrvKind.PARAMETRIC)

    @classmethod
    def bartlett(cls, bandwidth: int | None = None) -> "LrvConfig":
        return cls(LrvKind.BARTLETT, bandwidth)


def parametric_variance(residuals: np.ndarray) -> float:
    """Mean of squared residuals, T^-1 sum(u_t^2).

    Raises
    ------
    DegenerateVariance
        If all residuals are identically zero.
    """
    u = np.asarray(residuals, dtype=float).ravel()
    if u.size < 1:
        raise ValueError("need at least one residual")
    v = float(u @ u) / u.size
    if v == 0.0:
        raise DegenerateVariance("all residuals are zero")
    return v


def auto_bandwidth(T: int) -> int:
    """Spectral window floor(4 * (T/100)^0.25) (KPSS 1992)."""
    if T < 1:
        raise ValueError("T must be >= 1")
    return int(math.floor(4.0 * (T / 100.0) ** 0.25))


def bartlett_weights(l: int) -> np.ndarray:
    """Kernel weights w(s, l) = 1 - s/(l+1) for s = 1..l."""
    s = np.arange(1, l + 1)
    return 1.0 - s / (l + 1.0)


def long_run_variance(residuals: np.ndarray, l: int) -> float:
    """Bartlett-kernel long-run variance with lag truncation l.

    omega^2 = T^-1 sum u_t^2
              + 2 T^-1 sum_{s=1..l} w(s,l) sum_{t=s+1..T} u_t u_{t-s}

    ``l = 0`` reduces exactly to ``parametric_variance``.  The Bartlett
    weights make the estimate nonnegative by construction (Newey-West);
    a small relative floor guards against exact cancellation.
    """
    u = np.asarray(residuals, dtype=float).ravel()
    T = u.size
    if not 0 <= l < T:
        raise ValueError(f"need 0 <= l < T, got l={l}, T={T}")
    var0 = parametric_variance(u)
    if l == 0:
        return var0
    w = bartlett_weights(l)
    acov = np.array([u[s:] @ u[:-s] for s in range(1, l + 1)]) / T
    out = var0 + 2.0 * float(w @ acov)
    return max(out, _LRV_FLOOR * var0)


def lrv_value(residuals: np.ndarray, config: LrvConfig) -> float:
    """Evaluate the configured estimator, resolving the automatic bandwidth.

    The bandwidth is clamped to T-1 so short samples (subresidual blocks)
    stay valid.
    """
    u = np.asarray(residuals, dtype=float).ravel()
    if config.kind is LrvKind.PARAMETRIC:
        return parametric_variance(u)
    l = config.bandwidth if config.bandwidth is not None else auto_bandwidth(u.size)
    return long_run_variance(u, min(l, u.size - 1))


def lrv_columns(residual_matrix: np.ndarray, config: LrvConfig) -> np.ndarray:
    """Column-wise ``lrv_value`` for a T x B residual matrix.

    Vectorized over columns; used by the bootstrap where B refits share one
    configuration.  Columns that are identically zero raise
    ``DegenerateVariance`` just like the scalar version.
    """
    U = np.asarray(residual_matrix, dtype=float)
    T = U.shape[0]
    var0 = np.einsum("tb,tb->b", U, U) / T
    if np.any(var0 == 0.0):
        raise DegenerateVariance("a bootstrap residual column is identically zero")
    if config.kind is LrvKind.PARAMETRIC:
        return var0
    l = config.bandwidth if config.bandwidth is not None else auto_bandwidth(T)
    l = min(l, T - 1)
    if l == 0:
        return var0
    w = bartlett_weights(l)
    out = var0.copy()
    for s in range(1, l + 1):
        out += 2.0 * w[s - 1] * np.einsum("tb,tb->b", U[s:], U[:-s]) / T
    return np.maximum(out, _LRV_FLOOR * var0)
