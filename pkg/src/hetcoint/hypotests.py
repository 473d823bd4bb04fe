"""Residual-based cointegration and stationarity tests.

The building block is a KPSS-type statistic: the scaled sum of squared
partial sums of regression residuals,

    eta = (T^2 * omega^2)^{-1} * sum_t (sum_{j<=t} u_j)^2,

small under stationary errors and diverging under a unit root.  Three ways
of calibrating it are provided:

* ``fixed_regressor_bootstrap`` - the heteroskedasticity-robust wild
  bootstrap in the style of Hansen (2000): regressors are held fixed and
  the regressand is rebuilt as residuals times i.i.d. standard normal
  multipliers, which preserves the variance profile of the errors.
* ``bonferroni_subresidual_test`` - the statistic evaluated on blocks of
  residuals, aggregated over a partition of the sample via Bonferroni,
  with p-values from the homoskedastic limit law of int_0^1 W(s)^2 ds and
  the block length picked by the minimum volatility rule of Romano and
  Wolf (2001).
* ``shin_critical_value_test`` - comparison against the tabulated 5%
  critical value of Shin (1994), valid only for the linear single-regressor
  model under homoskedasticity; retained as a non-robust comparator.

``stationarity_bootstrap_test`` applies the same bootstrap to a raw series
(after removing deterministics), giving a heteroskedasticity-robust KPSS
analogue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfc

from .estimate import (
    FitResult,
    NlsOptions,
    fit_model,
    fit_nls,
    fit_ols,
    leads_lags_columns,
    leads_lags_trim,
    nls_initial_values,
)
from .exceptions import (
    AllBootstrapFitsFailed,
    BlockOutOfRange,
    DegenerateVariance,
    GridTooSmall,
    NonConvergence,
    RankDeficient,
    UnsupportedModel,
)
from .models import Family, ModelSpec, design_matrix, eval_model, model_jacobian
from .streams import substream
from .variance import LrvConfig, lrv_columns, lrv_value

# 5% critical value of the residual-based cointegration statistic for one
# stochastic regressor and no deterministic terms, from Shin (1994), "A
# Residual-Based Test of the Null of Cointegration Against the Alternative
# of No Cointegration", Econometric Theory 10, Table 1 (standard case,
# m = 1).  Cross-checked here by simulation: the 95% quantile of the
# statistic under a homoskedastic cointegrated null is 1.20 +- 0.01 for
# T in {100, 1000}.  Only valid under homoskedastic errors; stored for use
# as a non-robust comparator.
SHIN_CV_5PCT_SINGLE_REGRESSOR = 1.199

# Maximum redraw attempts for a nonconvergent bootstrap refit before the
# draw is dropped from the bootstrap sample.
_MAX_REFIT_ATTEMPTS = 10

# Stopping tolerances for bootstrap refits.  A rebuilt regressand is pure
# noise, where the transition parameters are weakly identified and the
# default 1e-10 stops let the iteration crawl through flat SSR valleys to
# the iteration cap.  At 1e-7 the crawl stops within a few steps of the
# elbow, the bootstrap statistic distribution is unchanged to <0.1% at the
# relevant quantiles, and spurious nonconvergence disappears.  Overridable
# through ``nls_opts``.
_REFIT_NLS_OPTS = NlsOptions(ssr_rtol=1e-7, step_tol=1e-8)


class TestMethod(str, Enum):
    BOOTSTRAP = "bootstrap"
    SUBRESIDUAL = "subresidual"
    SHIN_CRITICAL_VALUE = "shin_critical_value"


@dataclass(frozen=True)
class TestOutcome:
    """Result of one cointegration/stationarity test."""

    statistic: float
    p_value: float
    method: TestMethod
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.statistic >= 0.0:
            raise ValueError(f"statistic must be nonnegative, got {self.statistic}")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value must lie in [0, 1], got {self.p_value}")


def eta_statistic(residuals: np.ndarray, lrv: float) -> float:
    """KPSS-type statistic (T^2 * lrv)^{-1} sum of squared partial sums."""
    if not lrv > 0.0:
        raise DegenerateVariance(f"long-run variance must be positive, got {lrv}")
    u = np.asarray(residuals, dtype=float).ravel()
    if u.size < 1:
        raise ValueError("need at least one residual")
    s = np.cumsum(u)
    return float(s @ s) / (u.size**2 * lrv)


def _eta_columns(residual_matrix: np.ndarray, lrv: np.ndarray) -> np.ndarray:
    """Column-wise eta statistic for a T x B residual matrix."""
    s = np.cumsum(residual_matrix, axis=0)
    num = np.einsum("tb,tb->b", s, s)
    return num / (residual_matrix.shape[0] ** 2 * lrv)


# ---------------------------------------------------------------------------
# Distribution of int_0^1 W(s)^2 ds
# ---------------------------------------------------------------------------

_CW_TRUNCATION = 10


def _cw_coefficients(n_max: int) -> np.ndarray:
    # a_n = Gamma(n + 1/2) / (n! Gamma(1/2)) = binom(2n, n) / 4^n
    a = np.empty(n_max + 1)
    a[0] = 1.0
    for n in range(1, n_max + 1):
        a[n] = a[n - 1] * (2 * n - 1) / (2 * n)
    return a


_CW_COEF = _cw_coefficients(_CW_TRUNCATION)
_CW_SIGNS = (-1.0) ** np.arange(_CW_TRUNCATION + 1)


def cw_cdf(z):
    """Distribution function of int_0^1 W(s)^2 ds, W a standard Brownian motion.

    Expanding the Laplace transform E exp(-s V) = cosh(sqrt(2s))^{-1/2}
    into a binomial series and inverting termwise gives the alternating
    series

        F(z) = sqrt(2) * sum_n (-1)^n a_n * erfc((4n+1) / (2*sqrt(2z))),

    with a_n = binom(2n, n)/4^n.  The series is truncated at n = 10, which
    is accurate to well below 1e-6 on the quantile range of interest; the
    result is clipped into [0, 1] (for very large z the truncated
    alternating tail would otherwise overshoot by a few 1e-4).  F(0) = 0.

    Accepts scalars or arrays.
    """
    zv = np.asarray(z, dtype=float)
    if np.any(zv < 0.0):
        raise ValueError("z must be nonnegative")
    scalar = zv.ndim == 0
    zv = np.atleast_1d(zv)
    out = np.zeros_like(zv)
    pos = zv > 0.0
    if np.any(pos):
        args = (4.0 * np.arange(_CW_TRUNCATION + 1) + 1.0)[:, None] / (
            2.0 * np.sqrt(2.0 * zv[pos])[None, :]
        )
        series = np.sqrt(2.0) * ((_CW_SIGNS * _CW_COEF) @ erfc(args))
        out[pos] = np.clip(series, 0.0, 1.0)
    return float(out[0]) if scalar else out


def cw_quantile(p: float) -> float:
    """Inverse of ``cw_cdf`` by bracketing and root finding."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    hi = 5.0
    while cw_cdf(hi) < p:
        hi *= 2.0
        if hi > 1e8:
            raise RuntimeError("failed to bracket the quantile")
    return float(brentq(lambda z: cw_cdf(z) - p, 1e-12, hi, xtol=1e-12))


# ---------------------------------------------------------------------------
# Subresidual (block) tests
# ---------------------------------------------------------------------------


def subresidual_statistic(
    residuals: np.ndarray, start: int, block_len: int, lrv_cfg: LrvConfig
) -> float:
    """KPSS-type statistic on the residual block u_start, ..., u_{start+len-1}.

    ``start`` is 1-based (time-series convention t = 1..T); partial sums
    restart at the block head and the variance is estimated from the block
    only, so an automatic bandwidth resolves against the block length.
    """
    u = np.asarray(residuals, dtype=float).ravel()
    T = u.size
    if block_len < 2 or block_len > T:
        raise BlockOutOfRange(f"block length {block_len} outside [2, {T}]")
    if not 1 <= start <= T - block_len + 1:
        raise BlockOutOfRange(
            f"start {start} outside [1, {T - block_len + 1}] for block length {block_len}"
        )
    block = u[start - 1 : start - 1 + block_len]
    return eta_statistic(block, lrv_value(block, lrv_cfg))


def block_starts(T: int, block_len: int) -> list[int]:
    """1-based starting points of the ceil(T / len) consecutive blocks.

    Blocks are non-overlapping except the last, which is right-anchored at
    T - len + 1 so the partition always covers the full sample.
    """
    M = math.ceil(T / block_len)
    return [1 + m * block_len for m in range(M - 1)] + [T - block_len + 1]


def max_subresidual_statistic(
    residuals: np.ndarray, block_len: int, lrv_cfg: LrvConfig
) -> tuple[float, int]:
    """Maximum block statistic over the block partition; returns (stat, M)."""
    u = np.asarray(residuals, dtype=float).ravel()
    starts = block_starts(u.size, block_len)
    stat = max(subresidual_statistic(u, i, block_len, lrv_cfg) for i in starts)
    return stat, len(starts)


def default_block_grid(T: int) -> np.ndarray:
    """Eight block lengths evenly spaced between ceil(sqrt(T)) and floor(T/2)."""
    lo = math.ceil(math.sqrt(T))
    hi = T // 2
    grid = np.unique(np.round(np.linspace(lo, hi, 8)).astype(int))
    if grid.size < 3:
        raise GridTooSmall(f"T={T} admits only {grid.size} distinct block lengths")
    return grid


def min_volatility_block(
    residuals: np.ndarray, grid, lrv_cfg: LrvConfig = LrvConfig.parametric()
) -> int:
    """Pick the block length where the max-statistic is least grid-sensitive.

    For each candidate length the maximum block statistic is computed; the
    chosen length minimizes the standard deviation of those statistics over
    a centered window of three grid neighbors (clamped at the grid edges).
    Ties break toward the smaller length.
    """
    g = np.unique(np.asarray(grid, dtype=int))
    if g.size < 3:
        raise GridTooSmall(f"need at least 3 grid values, got {g.size}")
    u = np.asarray(residuals, dtype=float).ravel()
    if g[0] < 2 or g[-1] > u.size:
        raise BlockOutOfRange("grid values must lie in [2, T]")
    stats = np.array([max_subresidual_statistic(u, int(l), lrv_cfg)[0] for l in g])
    sds = np.array(
        [np.std(stats[max(0, j - 1) : j + 2]) for j in range(g.size)]
    )
    return int(g[int(np.argmin(sds))])


def bonferroni_subresidual_test(
    residuals: np.ndarray,
    alpha: float = 0.05,
    block: int | str = "auto",
    lrv_cfg: LrvConfig = LrvConfig.parametric(),
    grid=None,
) -> TestOutcome:
    """Bonferroni-aggregated subresidual test.

    The sample is split into M = ceil(T / block) consecutive blocks (last
    block right-anchored); the statistic is the maximum block statistic and
    the reported p-value is min(1, M * (1 - F(stat))) with F the
    homoskedastic limit distribution ``cw_cdf``.  Rejecting when p <= alpha
    is equivalent to comparing against the alpha/M critical value.

    ``block="auto"`` selects the block length by ``min_volatility_block``
    over ``grid`` (default: ``default_block_grid``).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    u = np.asarray(residuals, dtype=float).ravel()
    if block == "auto":
        g = default_block_grid(u.size) if grid is None else grid
        block_len = min_volatility_block(u, g, lrv_cfg)
    else:
        block_len = int(block)
    stat, M = max_subresidual_statistic(u, block_len, lrv_cfg)
    p = min(1.0, M * (1.0 - cw_cdf(stat)))
    return TestOutcome(
        statistic=stat,
        p_value=p,
        method=TestMethod.SUBRESIDUAL,
        meta={"block": block_len, "M": M, "alpha": alpha},
    )


# ---------------------------------------------------------------------------
# Heteroskedastic fixed regressor bootstrap
# ---------------------------------------------------------------------------


class _LinearRefitter:
    """Refits least squares on a fixed design for many regressands at once."""

    linear = True

    def __init__(self, X: np.ndarray):
        self.X = X
        q, r = np.linalg.qr(X)
        d = np.abs(np.diag(r))
        if d.min() <= d.max() * 1e-12:
            raise RankDeficient("fixed design is rank deficient")
        self.q = q

    def residuals_many(self, Y: np.ndarray) -> np.ndarray:
        return Y - self.q @ (self.q.T @ Y)


class _NlsRefitter:
    """Refits the nonlinear model, optionally with a fixed linear block.

    For the smooth transition family the grid-search initializer is
    precomputed: the candidate designs depend only on the regressor, so the
    batched normal equations are factored once and each refit only forms
    the right-hand sides.  The subsequent Levenberg-Marquardt polish uses
    lean closures equivalent to ``eval_model``/``model_jacobian``.
    """

    linear = False

    def __init__(self, spec: ModelSpec, x, t, extra: np.ndarray | None, opts: NlsOptions):
        from scipy.special import expit

        self.spec = spec
        self.x = x
        self.t = t
        self.extra = extra
        self.opts = opts
        self.fast = spec.family is Family.SMOOTH_TRANSITION
        if not self.fast:
            return
        det_cols = []
        if spec.intercept:
            det_cols.append(np.ones_like(x))
        if spec.trend:
            det_cols.append(np.asarray(t, dtype=float))
        lo, hi = np.percentile(x, [5.0, 95.0])
        grid = np.linspace(lo, hi, 20)
        base = np.column_stack(det_cols + [x])
        L = expit(x[None, :] - grid[:, None])
        Xg = np.concatenate(
            [np.broadcast_to(base, (grid.size,) + base.shape), L[:, :, None]], axis=2
        )
        self._grid = grid
        self._Xg = Xg
        self._Ainv = np.linalg.inv(np.einsum("gti,gtj->gij", Xg, Xg))
        self._det = np.column_stack(det_cols) if det_cols else None
        self._n_det = len(det_cols)

    def _grid_init(self, y: np.ndarray) -> np.ndarray:
        b = np.einsum("gtp,t->gp", self._Xg, y)
        coefs = (self._Ainv @ b[:, :, None])[:, :, 0]
        # SSR_g = y'y - coefs_g'b_g at the subproblem optimum; y'y is common.
        j = int(np.argmin(-np.einsum("gp,gp->g", coefs, b)))
        return np.append(coefs[j], self._grid[j])

    def _st_closures(self):
        from scipy.special import expit

        x = self.x
        D = self._det
        E = self.extra
        d = self._n_det

        def value(th):
            out = th[d] * x + th[d + 1] * expit(x - th[d + 2])
            if D is not None:
                out = out + D @ th[:d]
            if E is not None:
                out = out + E @ th[d + 3 :]
            return out

        def jacobian(th):
            lg = expit(x - th[d + 2])
            cols = [x, lg, -th[d + 1] * lg * (1.0 - lg)]
            blocks = [c[:, None] for c in cols]
            if D is not None:
                blocks.insert(0, D)
            if E is not None:
                blocks.append(E)
            return np.concatenate(blocks, axis=1)

        return value, jacobian

    def fit_residuals(self, y: np.ndarray) -> tuple[np.ndarray, bool]:
        from .estimate import _levenberg_marquardt

        n_extra = 0 if self.extra is None else self.extra.shape[1]
        if self.fast:
            theta0 = self._grid_init(y)
            value, jacobian = self._st_closures()
        else:
            theta0 = np.asarray(nls_initial_values(self.spec, self.x, y, self.t))
            p = self.spec.n_params

            def value(th):
                out = eval_model(self.spec, self.x, self.t, th[:p])
                return out if self.extra is None else out + self.extra @ th[p:]

            def jacobian(th):
                J = model_jacobian(self.spec, self.x, self.t, th[:p])
                return J if self.extra is None else np.column_stack([J, self.extra])

        if n_extra:
            theta0 = np.concatenate([theta0, np.zeros(n_extra)])
        fit = _levenberg_marquardt(value, jacobian, y, theta0, self.opts)
        return fit.residuals, fit.converged


def _make_refitter(spec: ModelSpec, x: np.ndarray, estimator: str, K: int, opts: NlsOptions):
    """Build the refitting strategy used inside the bootstrap loop."""
    T = len(x)
    tidx = np.arange(1, T + 1) if spec.trend else None
    if estimator == "leads_lags":
        DX = leads_lags_columns(x, K)
        sl = leads_lags_trim(T, K)
        x_trim = x[sl]
        t_trim = tidx[sl] if tidx is not None else None
        if spec.is_linear_in_params:
            X = np.column_stack([design_matrix(spec, x_trim, t_trim), DX])
            return _LinearRefitter(X)
        return _NlsRefitter(spec, x_trim, t_trim, DX, opts)
    if estimator == "ols" or (estimator in ("auto", "nls") and spec.is_linear_in_params):
        return _LinearRefitter(design_matrix(spec, x, tidx))
    if estimator in ("auto", "nls"):
        return _NlsRefitter(spec, x, tidx, None, opts)
    raise ValueError(f"unknown estimator {estimator!r}")


def fixed_regressor_bootstrap(
    spec: ModelSpec,
    x: np.ndarray,
    y: np.ndarray,
    B: int,
    lrv_cfg: LrvConfig,
    seed: int,
    estimator: str = "auto",
    K: int = 1,
    fit: FitResult | None = None,
    nls_opts: NlsOptions | None = None,
) -> TestOutcome:
    """Heteroskedastic fixed regressor bootstrap p-value for the eta statistic.

    Steps: (1) fit the regression and compute the statistic from its
    residuals; (2) for each b = 1..B rebuild the regressand as
    ``y_b = residuals * z`` with z i.i.d. standard normal from stream
    (seed, b); (3) refit the same model on the fixed regressors and compute
    the bootstrap statistic with the same long-run variance configuration;
    (4) report p = #{stat_b >= stat} / B_effective.

    Multiplying the residuals by independent noise preserves their variance
    profile, so the bootstrap law mimics the null distribution under
    arbitrary deterministic heteroskedasticity.

    Nonconvergent bootstrap refits are redrawn (continuing stream (seed, b))
    up to 10 times, then dropped from the effective bootstrap count.  A
    nonconverged original fit raises ``NonConvergence``; pass a precomputed
    ``fit`` to skip step 1.

    Raises
    ------
    AllBootstrapFitsFailed
        If no bootstrap refit converges.
    NonConvergence
        If the original regression did not converge.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if fit is None:
        fit = fit_model(spec, x, y, estimator=estimator, K=K,
                        t=np.arange(1, x.size + 1) if spec.trend else None)
    if not fit.converged:
        raise NonConvergence("original regression did not converge")
    u_hat = fit.residuals
    T_eff = u_hat.size
    stat = eta_statistic(u_hat, lrv_value(u_hat, lrv_cfg))

    refitter = _make_refitter(spec, x, estimator, K, nls_opts or _REFIT_NLS_OPTS)
    n_failed = 0
    if refitter.linear:
        Z = np.empty((T_eff, B))
        for b in range(1, B + 1):
            Z[:, b - 1] = substream(seed, b).standard_normal(T_eff)
        Ub = refitter.residuals_many(u_hat[:, None] * Z)
        boot_stats = _eta_columns(Ub, lrv_columns(Ub, lrv_cfg))
    else:
        collected = []
        for b in range(1, B + 1):
            gen = substream(seed, b)
            resid_b = None
            for _ in range(_MAX_REFIT_ATTEMPTS):
                yb = u_hat * gen.standard_normal(T_eff)
                resid, converged = refitter.fit_residuals(yb)
                if converged:
                    resid_b = resid
                    break
            if resid_b is None:
                n_failed += 1
                continue
            collected.append(eta_statistic(resid_b, lrv_value(resid_b, lrv_cfg)))
        if not collected:
            raise AllBootstrapFitsFailed(f"all {B} bootstrap refits failed to converge")
        boot_stats = np.asarray(collected)

    p = float(np.mean(boot_stats >= stat))
    return TestOutcome(
        statistic=stat,
        p_value=p,
        method=TestMethod.BOOTSTRAP,
        meta={
            "B": B,
            "B_effective": int(boot_stats.size),
            "n_nonconvergent": n_failed,
            "estimator": estimator,
        },
    )


def stationarity_bootstrap_test(
    series: np.ndarray,
    intercept: bool = True,
    trend: bool = False,
    B: int = 499,
    seed: int = 0,
    lrv_cfg: LrvConfig = LrvConfig.bartlett(),
) -> TestOutcome:
    """Bootstrap KPSS analogue for a single series (null: no unit root).

    The series is regressed on the requested deterministic terms (a constant
    and optionally a linear trend); the fixed regressor bootstrap machinery
    then runs on those residuals with the deterministic design held fixed.
    """
    s = np.asarray(series, dtype=float).ravel()
    if s.size < 10:
        raise ValueError("need at least 10 observations")
    cols = []
    if intercept:
        cols.append(np.ones(s.size))
    if trend:
        cols.append(np.arange(1.0, s.size + 1.0))
    if not cols:
        raise ValueError("at least one deterministic term is required")
    X = np.column_stack(cols)
    fit = fit_ols(X, s)
    u_hat = fit.residuals
    stat = eta_statistic(u_hat, lrv_value(u_hat, lrv_cfg))
    refitter = _LinearRefitter(X)
    Z = np.empty((s.size, B))
    for b in range(1, B + 1):
        Z[:, b - 1] = substream(seed, b).standard_normal(s.size)
    Ub = refitter.residuals_many(u_hat[:, None] * Z)
    boot_stats = _eta_columns(Ub, lrv_columns(Ub, lrv_cfg))
    p = float(np.mean(boot_stats >= stat))
    return TestOutcome(
        statistic=stat,
        p_value=p,
        method=TestMethod.BOOTSTRAP,
        meta={"B": B, "B_effective": B, "n_nonconvergent": 0,
              "deterministics": ("c" + ("t" if trend else "")) if intercept else "t"},
    )


def shin_critical_value_test(
    residuals: np.ndarray,
    lrv_cfg: LrvConfig,
    spec: ModelSpec | None = None,
) -> TestOutcome:
    """Compare the eta statistic against Shin's tabulated 5% critical value.

    Only defined for a linear regression on a single stochastic regressor
    without deterministic terms, and only the 5% level is stored.  Since no
    continuous p-value is available from a single tabulated point, the
    returned p-value is an indicator: 0.0 when the statistic exceeds the
    critical value, 1.0 otherwise.

    Raises
    ------
    UnsupportedModel
        If ``spec`` is given and is not the plain linear single-regressor
        model (with powers of the regressor in the model the tabulated
        values do not apply).
    """
    if spec is not None:
        plain_linear = spec.family is Family.LINEAR or (
            spec.family is Family.POLYNOMIAL and spec.degree == 1
        )
        if not plain_linear or spec.intercept or spec.trend:
            raise UnsupportedModel(
                "tabulated critical values apply only to the linear "
                "single-regressor model without deterministics"
            )
    u = np.asarray(residuals, dtype=float).ravel()
    stat = eta_statistic(u, lrv_value(u, lrv_cfg))
    reject = stat > SHIN_CV_5PCT_SINGLE_REGRESSOR
    return TestOutcome(
        statistic=stat,
        p_value=0.0 if reject else 1.0,
        method=TestMethod.SHIN_CRITICAL_VALUE,
        meta={"critical_value": SHIN_CV_5PCT_SINGLE_REGRESSOR, "level": 0.05},
    )
