"""Data pipeline for the emissions-income (environmental Kuznets curve) study.

The regression of interest relates log per-capita GDP e_t to a cubic in log
per-capita CO2 emissions y_t with an intercept and linear trend,

    e_t = c + delta * t + th1 * y_t + th2 * y_t^2 + th3 * y_t^3 + u_t,

fitted both by plain least squares and by the leads-and-lags estimator.
Residual diagnostics use the empirical variance profile: the normalized
cumulative sum of squared residuals, which tracks the 45-degree line under
homoskedasticity and bends where the error variance shifts.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .estimate import fit_model
from .exceptions import DegenerateVariance, MissingColumn, ParseError
from .hypotests import (
    TestOutcome,
    bonferroni_subresidual_test,
    fixed_regressor_bootstrap,
    stationarity_bootstrap_test,
)
from .mc import TestConfig
from .models import ModelSpec, polynomial_model
from .streams import spawn_seed
from .variance import LrvConfig


@dataclass(frozen=True)
class DataFrameSlice:
    """One labelled collection of aligned annual series."""

    label: str
    year: np.ndarray
    series: dict

    def __post_init__(self) -> None:
        n = self.year.size
        for name, vals in self.series.items():
            if vals.size != n:
                raise ValueError(f"series {name!r} length {vals.size} != {n} years")
        if n > 1 and not np.all(np.diff(self.year) > 0):
            raise ValueError("years must be strictly increasing")


@dataclass(frozen=True)
class VarianceProfile:
    """Piecewise-linear normalized cumulative sum of squared residuals."""

    s: np.ndarray
    rho_hat: np.ndarray

    def __post_init__(self) -> None:
        if self.s.size != self.rho_hat.size:
            raise ValueError("grid and profile lengths differ")
        if self.rho_hat[0] != 0.0 or self.rho_hat[-1] != 1.0:
            raise ValueError("profile endpoints must be 0 and 1")
        if np.any(np.diff(self.rho_hat) < -1e-15):
            raise ValueError("profile must be nondecreasing")


def ingest_csv(
    path,
    value_columns,
    label_column: str | None = None,
    label: str | None = None,
    year_column: str = "year",
    log_transform: bool = False,
) -> DataFrameSlice:
    """Read aligned annual series from a CSV file.

    Rows with empty or unparseable values are dropped with a warning, as are
    rows with non-positive values when ``log_transform`` is requested.  When
    ``label_column`` is given the file may hold several labelled groups;
    pass ``label`` to select one (a single-label file needs no selection).

    Raises
    ------
    MissingColumn
        If a requested column is absent.
    ParseError
        If the file is empty, a year fails to parse, or the selected rows
        have non-increasing years.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError(f"{path}: empty file")
        needed = [year_column, *value_columns]
        if label_column:
            needed.append(label_column)
        for col in needed:
            if col not in reader.fieldnames:
                raise MissingColumn(f"{path}: column {col!r} not found")
        for lineno, row in enumerate(reader, start=2):
            rows.append((lineno, row))
    if not rows:
        raise ParseError(f"{path}: no data rows")

    if label_column:
        labels = sorted({row[label_column] for _, row in rows})
        if label is None:
            if len(labels) > 1:
                raise ParseError(
                    f"{path}: multiple labels {labels}; pass label= to select one"
                )
            label = labels[0]
        rows = [(ln, row) for ln, row in rows if row[label_column] == label]
        if not rows:
            raise ParseError(f"{path}: no rows with {label_column} == {label!r}")
    resolved_label = label if label is not None else str(path)

    years = []
    values: dict[str, list] = {c: [] for c in value_columns}
    n_dropped = 0
    for lineno, row in rows:
        try:
            year = int(row[year_column])
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{path}:{lineno}: bad year {row[year_column]!r}") from exc
        parsed = {}
        ok = True
        for col in value_columns:
            raw = (row[col] or "").strip()
            if not raw:
                ok = False
                break
            try:
                v = float(raw)
            except ValueError:
                ok = False
                break
            if log_transform:
                if v <= 0.0:
                    ok = False
                    break
                v = math.log(v)
            parsed[col] = v
        if not ok:
            n_dropped += 1
            continue
        years.append(year)
        for col in value_columns:
            values[col].append(parsed[col])
    if n_dropped:
        warnings.warn(f"{path}: dropped {n_dropped} rows with missing/invalid values")
    if not years:
        raise ParseError(f"{path}: no usable rows")
    return DataFrameSlice(
        label=resolved_label,
        year=np.asarray(years, dtype=int),
        series={c: np.asarray(values[c], dtype=float) for c in value_columns},
    )


def variance_profile(residuals: np.ndarray, grid_points: int = 512) -> VarianceProfile:
    """Empirical variance profile on an even grid over [0, 1].

    rho_hat(s) interpolates the normalized running sum of squared residuals
    between the sample points t/T, with rho_hat(0) = 0 and rho_hat(1) = 1.
    """
    u = np.asarray(residuals, dtype=float).ravel()
    total = float(u @ u)
    if total == 0.0:
        raise DegenerateVariance("all residuals are zero")
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    knots_s = np.arange(0, u.size + 1) / u.size
    knots_v = np.concatenate([[0.0], np.cumsum(u * u) / total])
    s = np.linspace(0.0, 1.0, grid_points)
    rho = np.interp(s, knots_s, knots_v)
    rho[0], rho[-1] = 0.0, 1.0
    return VarianceProfile(s=s, rho_hat=rho)


def emit_profile(profile: VarianceProfile, format: str = "csv") -> str:
    """Two data columns (s, rho_hat) plus the 45-degree reference column."""
    if format == "csv":
        lines = ["s,rho_hat,reference"]
        for s, r in zip(profile.s, profile.rho_hat):
            lines.append(f"{s!r},{r!r},{s!r}")
        return "\n".join(lines) + "\n"
    if format == "json":
        return (
            json.dumps(
                {
                    "s": profile.s.tolist(),
                    "rho_hat": profile.rho_hat.tolist(),
                    "reference": profile.s.tolist(),
                },
                indent=2,
            )
            + "\n"
        )
    raise ValueError(f"unknown format {format!r}")


def parse_profile(csv_text: str) -> VarianceProfile:
    """Inverse of ``emit_profile(..., 'csv')``."""
    lines = [ln for ln in csv_text.strip().splitlines() if ln]
    if not lines or lines[0] != "s,rho_hat,reference":
        raise ValueError("unrecognized profile header")
    s, rho = [], []
    for ln in lines[1:]:
        parts = ln.split(",")
        s.append(float(parts[0]))
        rho.append(float(parts[1]))
    return VarianceProfile(s=np.asarray(s), rho_hat=np.asarray(rho))


def ekc_model(swap_orientation: bool = False) -> ModelSpec:
    """Cubic-with-intercept-and-trend regression used by the pipeline."""
    del swap_orientation  # same model either way; orientation swaps the data
    return polynomial_model(3, intercept=True, trend=True)


def ekc_pipeline(
    e: np.ndarray,
    y: np.ndarray,
    test_cfg: TestConfig | None = None,
    seed: int = 0,
    label: str = "",
    swap_orientation: bool = False,
    profile_points: int = 512,
    univariate_trend: bool = True,
) -> dict:
    """Run the full battery of tests for one country.

    Regresses e on a cubic in y (with intercept and trend); with
    ``swap_orientation`` the roles are exchanged.  Reports bootstrap
    p-values from the plain and the leads-and-lags residuals, the
    subresidual Bonferroni p-value, bootstrap stationarity p-values for
    both series, and the empirical variance profile of the residuals.
    All tests use the Bartlett long-run variance with the automatic
    bandwidth unless the configuration says otherwise.
    """
    cfg = test_cfg or TestConfig(B=2000, lrv="bartlett")
    regressand = np.asarray(e, dtype=float).ravel()
    regressor = np.asarray(y, dtype=float).ravel()
    if swap_orientation:
        regressand, regressor = regressor, regressand
    if regressand.size != regressor.size:
        raise ValueError("series lengths differ")
    T = regressand.size
    lrv_cfg = LrvConfig.bartlett() if cfg.lrv in ("auto", "bartlett") else LrvConfig.parametric()
    spec = ekc_model()
    tidx = np.arange(1, T + 1)

    fit_plain = fit_model(spec, regressor, regressand, estimator="auto", t=tidx)
    boot_plain = fixed_regressor_bootstrap(
        spec, regressor, regressand, cfg.B, lrv_cfg, spawn_seed(seed, 0),
        estimator="auto", fit=fit_plain,
    )
    boot_ll = fixed_regressor_bootstrap(
        spec, regressor, regressand, cfg.B, lrv_cfg, spawn_seed(seed, 1),
        estimator="leads_lags", K=cfg.K,
    )
    subres = bonferroni_subresidual_test(
        fit_plain.residuals, alpha=cfg.alpha, block=cfg.block, lrv_cfg=lrv_cfg
    )
    stat_e = stationarity_bootstrap_test(
        np.asarray(e, dtype=float), trend=univariate_trend, B=cfg.B,
        seed=spawn_seed(seed, 2), lrv_cfg=lrv_cfg,
    )
    stat_y = stationarity_bootstrap_test(
        np.asarray(y, dtype=float), trend=univariate_trend, B=cfg.B,
        seed=spawn_seed(seed, 3), lrv_cfg=lrv_cfg,
    )
    profile = variance_profile(fit_plain.residuals, profile_points)

    return {
        "label": label,
        "n_obs": int(T),
        "swap_orientation": bool(swap_orientation),
        "theta": fit_plain.theta_hat.tolist(),
        "p_bootstrap": boot_plain.p_value,
        "p_bootstrap_leads_lags": boot_ll.p_value,
        "p_subresidual": subres.p_value,
        "subresidual_block": subres.meta["block"],
        "p_stationarity_e": stat_e.p_value,
        "p_stationarity_y": stat_y.p_value,
        "statistics": {
            "bootstrap": boot_plain.statistic,
            "bootstrap_leads_lags": boot_ll.statistic,
            "subresidual_max": subres.statistic,
        },
        "bootstrap_B": cfg.B,
        "seed": seed,
        "profile": {
            "s": profile.s.tolist(),
            "rho_hat": profile.rho_hat.tolist(),
        },
    }
