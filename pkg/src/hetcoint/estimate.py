"""Fitting the cointegrating regression.

Families that are linear in the parameter vector are fitted by OLS on the
model's design matrix; the general case is handled by a Levenberg-Marquardt
nonlinear least squares routine.  The leads-and-lags (dynamic) regression
of Saikkonen (1991) augments the model with leads and lags of the
first-differenced regressor to absorb endogeneity.

Nonconvergence of the NLS iteration is not an error: it is reported
through ``FitResult.converged`` so simulation harnesses can exclude such
replications.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    InsufficientSample,
    NumericalFailure,
    RankDeficient,
    UnsupportedModel,
)
from .models import ModelSpec, as_theta, design_matrix, eval_model, model_jacobian


@dataclass(frozen=True)
class FitResult:
    """Outcome of a least-squares fit.

    ``residuals[t] = y_t - fitted_t`` on the estimation sample, which for
    leads-and-lags fits is the trimmed sample.  ``final_ssr`` equals the sum
    of squared residuals at ``theta_hat``.
    """

    theta_hat: np.ndarray
    residuals: np.ndarray
    converged: bool
    iterations: int
    final_ssr: float


@dataclass(frozen=True)
class NlsOptions:
    """Levenberg-Marquardt controls.

    The damping factor starts at ``damping_init`` and is divided (multiplied)
    by ``damping_factor`` after an accepted (rejected) step.  Iteration stops
    once the relative SSR decrease falls below ``ssr_rtol`` or the parameter
    step is shorter than ``step_tol``; ``max_iter`` trial steps without
    triggering either marks the fit as nonconverged.
    """

    damping_init: float = 1e-3
    damping_factor: float = 10.0
    ssr_rtol: float = 1e-10
    step_tol: float = 1e-10
    max_iter: int = 200


def fit_ols(regressors: np.ndarray, y: np.ndarray) -> FitResult:
    """Ordinary least squares via a rank-revealing factorization.

    Raises
    ------
    RankDeficient
        If the regressor matrix has collinear columns.
    """
    X = np.asarray(regressors, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    yv = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != yv.size:
        raise ValueError("regressor and response lengths differ")
    if X.shape[0] <= X.shape[1]:
        raise InsufficientSample(
            f"need more observations ({X.shape[0]}) than regressors ({X.shape[1]})"
        )
    theta, _, rank, _ = np.linalg.lstsq(X, yv, rcond=None)
    if rank < X.shape[1]:
        raise RankDeficient(f"regressor matrix has rank {rank} < {X.shape[1]}")
    resid = yv - X @ theta
    return FitResult(
        theta_hat=theta,
        residuals=resid,
        converged=True,
        iterations=1,
        final_ssr=float(resid @ resid),
    )


def _levenberg_marquardt(value, jacobian, y, theta0, opts: NlsOptions) -> FitResult:
    """Minimize sum((y - value(theta))^2) starting from theta0.

    ``value`` and ``jacobian`` are closures over the data; the damping term
    uses Marquardt scaling (lam * diag(J'J)) so the step stays well defined
    when Jacobian columns have very different magnitudes.
    """
    theta = np.asarray(theta0, dtype=float).copy()
    r = y - value(theta)
    if not np.all(np.isfinite(r)):
        raise NumericalFailure("residuals not finite at the starting value")
    ssr = float(r @ r)
    lam = opts.damping_init
    converged = False
    need_jacobian = True
    A = g = None
    it = 0

    for it in range(1, opts.max_iter + 1):
        if need_jacobian:
            J = jacobian(theta)
            if not np.all(np.isfinite(J)):
                raise NumericalFailure("Jacobian not finite")
            A = J.T @ J
            g = J.T @ r
            need_jacobian = False
        D = np.diag(A).copy()
        floor = max(D.max(), 1.0) * 1e-14
        D[D < floor] = floor
        try:
            step = np.linalg.solve(A + lam * np.diag(D), g)
        except np.linalg.LinAlgError:
            lam *= opts.damping_factor
            continue
        if not np.all(np.isfinite(step)):
            lam *= opts.damping_factor
            continue
        step_norm = float(np.linalg.norm(step))
        cand = theta + step
        rc = y - value(cand)
        if not np.all(np.isfinite(rc)):
            lam *= opts.damping_factor
            continue
        ssr_c = float(rc @ rc)
        if ssr_c <= ssr:
            rel = (ssr - ssr_c) / max(ssr, 1e-300)
            theta, r, ssr = cand, rc, ssr_c
            lam = max(lam / opts.damping_factor, 1e-15)
            need_jacobian = True
            if rel < opts.ssr_rtol or step_norm < opts.step_tol:
                converged = True
                break
        else:
            lam *= opts.damping_factor
            if step_norm < opts.step_tol:
                # The damped step is already negligible: no direction improves.
                converged = True
                break

    return FitResult(
        theta_hat=theta,
        residuals=r,
        converged=converged,
        iterations=it,
        final_ssr=ssr,
    )


def fit_nls(
    spec: ModelSpec,
    x: np.ndarray,
    y: np.ndarray,
    theta_init,
    t=None,
    opts: NlsOptions | None = None,
) -> FitResult:
    """Nonlinear least squares for ``y = g(x, theta) + u`` via Levenberg-Marquardt.

    For families linear in theta the iteration collapses onto the OLS
    solution.  Nonconvergence is reported, not raised.
    """
    opts = opts or NlsOptions()
    xv = np.asarray(x, dtype=float).ravel()
    yv = np.asarray(y, dtype=float).ravel()
    if xv.size != yv.size:
        raise ValueError("x and y lengths differ")
    theta0 = as_theta(spec, theta_init)
    return _levenberg_marquardt(
        lambda th: eval_model(spec, xv, t, th),
        lambda th: model_jacobian(spec, xv, t, th),
        yv,
        theta0,
        opts,
    )


def nls_initial_values(spec: ModelSpec, x: np.ndarray, y: np.ndarray, t=None) -> np.ndarray:
    """Starting values for the NLS iteration.

    Families linear in theta use the OLS solution.  The smooth transition
    family profiles the location parameter over a 20-point grid between the
    5th and 95th percentile of x, solving the conditionally linear
    subproblem by OLS at each grid point and returning the grid minimizer.
    """
    xv = np.asarray(x, dtype=float).ravel()
    yv = np.asarray(y, dtype=float).ravel()
    if spec.is_linear_in_params:
        return fit_ols(design_matrix(spec, xv, t), yv).theta_hat
    if spec.family.value != "smooth_transition":
        raise UnsupportedModel("no initial-value rule for custom models; supply theta_init")

    from scipy.special import expit

    lo, hi = np.percentile(xv, [5.0, 95.0])
    grid = np.linspace(lo, hi, 20)
    det_cols = []
    if spec.intercept:
        det_cols.append(np.ones_like(xv))
    if spec.trend:
        if t is None:
            raise ValueError("model has a trend term; the time index t is required")
        det_cols.append(np.asarray(t, dtype=float))

    # One design per grid point, differing only in the logistic column;
    # solved jointly through batched normal equations.
    L = expit(xv[None, :] - grid[:, None])                      # (G, T)
    base = np.column_stack(det_cols + [xv])                     # (T, p-1)
    G = np.broadcast_to(base, (grid.size,) + base.shape)
    X = np.concatenate([G, L[:, :, None]], axis=2)              # (G, T, p)
    A = np.einsum("gti,gtj->gij", X, X)
    b = np.einsum("gti,t->gi", X, yv)
    try:
        coefs = np.linalg.solve(A, b[:, :, None])[:, :, 0]
    except np.linalg.LinAlgError as exc:
        raise RankDeficient("conditionally linear subproblem is rank deficient") from exc
    fitted = np.einsum("gtp,gp->gt", X, coefs)
    ssr = np.sum((yv[None, :] - fitted) ** 2, axis=1)
    j = int(np.argmin(ssr))
    return np.append(coefs[j], grid[j])


def leads_lags_columns(x: np.ndarray, K: int) -> np.ndarray:
    """Matrix of lagged/led first differences of x on the trimmed sample.

    Column j (j = -K..K, left to right) holds dx_{t-j} for the trimmed time
    range t = K+2, ..., T-K; the trimmed length is T - 2K - 1.
    """
    xv = np.asarray(x, dtype=float).ravel()
    T = xv.size
    n = T - 2 * K - 1
    if n < 1:
        raise InsufficientSample(f"T={T} too short for K={K} leads and lags")
    d = np.diff(xv)
    return np.column_stack([d[K - j : K - j + n] for j in range(-K, K + 1)])


def leads_lags_trim(T: int, K: int) -> slice:
    """0-based row slice of the trimmed sample t = K+2, ..., T-K."""
    return slice(K + 1, T - K)


def fit_leads_lags(
    spec: ModelSpec,
    x: np.ndarray,
    y: np.ndarray,
    K: int,
    t=None,
    theta_init=None,
    opts: NlsOptions | None = None,
) -> FitResult:
    """Dynamic regression with 2K+1 leads and lags of dx as extra regressors.

    The parameter vector extends the model's layout with the projection
    coefficients pi_{-K}, ..., pi_{K} appended at the end.  Residuals are
    returned on the trimmed sample t = K+2, ..., T-K.

    Raises
    ------
    InsufficientSample
        If trimming leaves no more observations than parameters.
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    xv = np.asarray(x, dtype=float).ravel()
    yv = np.asarray(y, dtype=float).ravel()
    T = xv.size
    DX = leads_lags_columns(xv, K)
    sl = leads_lags_trim(T, K)
    x_trim = xv[sl]
    y_trim = yv[sl]
    t_trim = np.arange(1, T + 1)[sl] if spec.trend else None
    n_total = spec.n_params + 2 * K + 1
    if y_trim.size <= n_total:
        raise InsufficientSample(
            f"trimmed sample of {y_trim.size} cannot identify {n_total} parameters"
        )

    if spec.is_linear_in_params:
        X = np.column_stack([design_matrix(spec, x_trim, t_trim), DX])
        return fit_ols(X, y_trim)

    opts = opts or NlsOptions()
    if theta_init is None:
        theta_init = nls_initial_values(spec, x_trim, y_trim, t_trim)
    theta0 = np.concatenate([as_theta(spec, theta_init), np.zeros(2 * K + 1)])
    p = spec.n_params

    def value(th):
        return eval_model(spec, x_trim, t_trim, th[:p]) + DX @ th[p:]

    def jacobian(th):
        return np.column_stack([model_jacobian(spec, x_trim, t_trim, th[:p]), DX])

    return _levenberg_marquardt(value, jacobian, y_trim, theta0, opts)


def fit_model(
    spec: ModelSpec,
    x: np.ndarray,
    y: np.ndarray,
    estimator: str = "auto",
    K: int = 1,
    t=None,
    theta_init=None,
    opts: NlsOptions | None = None,
) -> FitResult:
    """Dispatch to the appropriate fitting routine.

    ``estimator`` is one of ``auto`` (OLS when the family is linear in
    theta, NLS otherwise), ``ols``, ``nls`` or ``leads_lags``.
    """
    if estimator == "leads_lags":
        return fit_leads_lags(spec, x, y, K, t=t, theta_init=theta_init, opts=opts)
    if estimator == "ols" or (estimator == "auto" and spec.is_linear_in_params):
        return fit_ols(design_matrix(spec, x, t), y)
    if estimator in ("nls", "auto"):
        if theta_init is None:
            theta_init = nls_initial_values(spec, x, y, t)
        return fit_nls(spec, x, y, theta_init, t=t, opts=opts)
    raise ValueError(f"unknown estimator {estimator!r}")
