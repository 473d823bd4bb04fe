"""Residual-based tests for nonlinear cointegration under variance breaks.

Library layout:

* :mod:`hetcoint.models`    - regression families g(x, theta) and Jacobians
* :mod:`hetcoint.dgp`       - simulation of heteroskedastic cointegration systems
* :mod:`hetcoint.estimate`  - OLS / Levenberg-Marquardt NLS / leads-and-lags fits
* :mod:`hetcoint.variance`  - parametric and Bartlett long-run variance
* :mod:`hetcoint.hypotests` - KPSS-type statistic, fixed regressor bootstrap,
  subresidual Bonferroni test, critical-value comparator
* :mod:`hetcoint.mc`        - Monte Carlo harness for rejection-rate tables
* :mod:`hetcoint.application` - data ingestion, variance profiles, the
  emissions-vs-income pipeline
* :mod:`hetcoint.cli`       - ``hetcoint`` command line
"""

from .dgp import BreakSpec, DgpConfig, SimulatedSample, covariance_at, simulate_system, variance_path
from .estimate import (
    FitResult,
    NlsOptions,
    fit_leads_lags,
    fit_model,
    fit_nls,
    fit_ols,
    nls_initial_values,
)
from .hypotests import (
    TestMethod,
    TestOutcome,
    bonferroni_subresidual_test,
    cw_cdf,
    cw_quantile,
    eta_statistic,
    fixed_regressor_bootstrap,
    min_volatility_block,
    shin_critical_value_test,
    stationarity_bootstrap_test,
    subresidual_statistic,
)
from .models import (
    Family,
    ModelSpec,
    design_matrix,
    eval_model,
    linear_model,
    model_jacobian,
    polynomial_model,
    smooth_transition_model,
)
from .variance import LrvConfig, LrvKind, auto_bandwidth, long_run_variance, parametric_variance

__version__ = "0.1.0"
