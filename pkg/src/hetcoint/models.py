"""Cointegrating regression families g(x, theta) and their derivatives.

Supported mean functions for the regression y_t = g(x_t, theta) + u_t:

* ``linear``             g(x) = theta_1 * x
* ``polynomial``         g(x) = theta_1 * x + ... + theta_d * x^d
* ``smooth_transition``  g(x) = theta_1 * x + theta_2 * logistic(x - theta_3)
* ``custom``             caller-supplied value and Jacobian callbacks

Each family can be combined with deterministic terms (intercept and/or a
linear time trend).  The parameter layout is fixed: deterministic
coefficients come first (intercept, then trend), followed by the family
parameters in the order above.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

from .exceptions import DimensionMismatch, UnsupportedModel

# Signature of custom callbacks: (x, t, theta_family) -> array.  ``t`` is the
# 1-based time index (only meaningful when the model carries a trend).
CustomFn = Callable[[np.ndarray, Optional[np.ndarray], np.ndarray], np.ndarray]


class Family(str, Enum):
    """Regression family of the mean function."""

    LINEAR = "linear"
    POLYNOMIAL = "polynomial"
    SMOOTH_TRANSITION = "smooth_transition"
    CUSTOM = "custom"


@dataclass(frozen=True)
class ModelSpec:
    """Immutable description of a cointegrating regression family.

    Parameters
    ----------
    family : Family
        Mean-function family.
    degree : int, optional
        Polynomial degree; required for (and only for) ``Family.POLYNOMIAL``.
    intercept, trend : bool
        Deterministic terms.  Their coefficients occupy the leading
        positions of the parameter vector (intercept first).
    value_fn, jacobian_fn : callable, optional
        For ``Family.CUSTOM``: evaluate the family part of the mean function
        and its parameter Jacobian.  Both receive (x, t, theta_family).
    n_custom_params : int, optional
        Number of family parameters of a custom model.
    """

    family: Family = Family.LINEAR
    degree: int | None = None
    intercept: bool = False
    trend: bool = False
    value_fn: CustomFn | None = field(default=None, repr=False, compare=False)
    jacobian_fn: CustomFn | None = field(default=None, repr=False, compare=False)
    n_custom_params: int | None = None
    linear_in_params: bool | None = None

    def __post_init__(self) -> None:
        if self.family is Family.POLYNOMIAL:
            if self.degree is None or self.degree < 1:
                raise ValueError("polynomial family requires degree >= 1")
        elif self.degree is not None:
            raise ValueError("degree is only meaningful for the polynomial family")
        if self.family is Family.CUSTOM:
            if self.value_fn is None or self.jacobian_fn is None:
                raise ValueError("custom family requires value_fn and jacobian_fn")
            if self.n_custom_params is None or self.n_custom_params < 1:
                raise ValueError("custom family requires n_custom_params >= 1")

    @property
    def n_family_params(self) -> int:
        if self.family is Family.LINEAR:
            return 1
        if self.family is Family.POLYNOMIAL:
            return int(self.degree)  # type: ignore[arg-type]
        if self.family is Family.SMOOTH_TRANSITION:
            return 3
        return int(self.n_custom_params)  # type: ignore[arg-type]

    @property
    def n_deterministic(self) -> int:
        return int(self.intercept) + int(self.trend)

    @property
    def n_params(self) -> int:
        """Total parameter count, deterministic coefficients included."""
        return self.n_deterministic + self.n_family_params

    @property
    def is_linear_in_params(self) -> bool:
        """True when the mean function is linear in theta (OLS applies)."""
        if self.family in (Family.LINEAR, Family.POLYNOMIAL):
            return True
        if self.family is Family.CUSTOM and self.linear_in_params:
            return True
        return False


def linear_model(intercept: bool = False, trend: bool = False) -> ModelSpec:
    return ModelSpec(family=Family.LINEAR, intercept=intercept, trend=trend)


def polynomial_model(degree: int, intercept: bool = False, trend: bool = False) -> ModelSpec:
    return ModelSpec(family=Family.POLYNOMIAL, degree=degree, intercept=intercept, trend=trend)


def smooth_transition_model(intercept: bool = False, trend: bool = False) -> ModelSpec:
    return ModelSpec(family=Family.SMOOTH_TRANSITION, intercept=intercept, trend=trend)


def as_theta(spec: ModelSpec, theta) -> np.ndarray:
    """Validate and coerce a parameter vector for ``spec``.

    Raises
    ------
    DimensionMismatch
        If the length differs from ``spec.n_params``.
    ValueError
        If any entry is not finite.
    """
    arr = np.asarray(theta, dtype=float).ravel()
    if arr.size != spec.n_params:
        raise DimensionMismatch(
            f"theta has length {arr.size}, model needs {spec.n_params}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError("theta entries must be finite")
    return arr


def _time_index(spec: ModelSpec, x: np.ndarray, t) -> np.ndarray | None:
    if not spec.trend:
        return None
    if t is None:
        raise ValueError("model has a trend term; the time index t is required")
    tt = np.asarray(t, dtype=float)
    if tt.shape not in ((), x.shape):
        raise DimensionMismatch("time index and regressor lengths differ")
    return tt


def eval_model(spec: ModelSpec, x, t=None, theta=None) -> np.ndarray | float:
    """Evaluate g(x, theta) plus any deterministic terms.

    ``x`` may be a scalar or a vector; ``t`` is the 1-based time index and is
    only consulted when the spec carries a trend.  Scalar input yields a
    scalar output.
    """
    th = as_theta(spec, theta)
    xv = np.asarray(x, dtype=float)
    scalar = xv.ndim == 0
    xv = np.atleast_1d(xv)
    tt = _time_index(spec, xv, t)

    pos = 0
    out = np.zeros_like(xv)
    if spec.intercept:
        out += th[pos]
        pos += 1
    if spec.trend:
        out += th[pos] * (tt if tt is not None else 0.0)
        pos += 1
    fam = th[pos:]

    if spec.family is Family.LINEAR:
        out += fam[0] * xv
    elif spec.family is Family.POLYNOMIAL:
        out += np.polyval(np.append(fam[::-1], 0.0), xv)
    elif spec.family is Family.SMOOTH_TRANSITION:
        out += fam[0] * xv + fam[1] * expit(xv - fam[2])
    else:
        out += spec.value_fn(xv, tt, fam)  # type: ignore[misc]
    return float(out[0]) if scalar else out


def model_jacobian(spec: ModelSpec, x, t=None, theta=None) -> np.ndarray:
    """Evaluate the parameter Jacobian dg/dtheta.

    Returns an array of shape (len(x), n_params) for vector input and
    (n_params,) for scalar input.  Column order follows the parameter
    layout (deterministics first).
    """
    th = as_theta(spec, theta)
    xv = np.asarray(x, dtype=float)
    scalar = xv.ndim == 0
    xv = np.atleast_1d(xv)
    tt = _time_index(spec, xv, t)

    cols = []
    pos = 0
    if spec.intercept:
        cols.append(np.ones_like(xv))
        pos += 1
    if spec.trend:
        cols.append(np.asarray(tt, dtype=float) * np.ones_like(xv))
        pos += 1
    fam = th[pos:]

    if spec.family is Family.LINEAR:
        cols.append(xv)
    elif spec.family is Family.POLYNOMIAL:
        for j in range(1, int(spec.degree) + 1):  # type: ignore[arg-type]
            cols.append(xv**j)
    elif spec.family is Family.SMOOTH_TRANSITION:
        lg = expit(xv - fam[2])
        cols.append(xv)
        cols.append(lg)
        cols.append(-fam[1] * lg * (1.0 - lg))
    else:
        jac = np.atleast_2d(spec.jacobian_fn(xv, tt, fam))  # type: ignore[misc]
        if jac.shape != (xv.size, fam.size):
            raise DimensionMismatch(
                f"custom jacobian has shape {jac.shape}, expected {(xv.size, fam.size)}"
            )
        cols.extend(jac.T)

    out = np.column_stack(cols)
    return out[0] if scalar else out


def design_matrix(spec: ModelSpec, x, t=None) -> np.ndarray:
    """Regressor matrix for families that are linear in theta.

    For those families the Jacobian does not depend on theta, so the model
    is exactly ``design_matrix(spec, x, t) @ theta``.

    Raises
    ------
    UnsupportedModel
        If the family is not linear in its parameters.
    """
    if not spec.is_linear_in_params:
        raise UnsupportedModel(f"{spec.family.value} is not linear in theta")
    return np.atleast_2d(model_jacobian(spec, x, t, np.zeros(spec.n_params)))
