"""Monte Carlo harness for rejection-frequency tables.

A :class:`GridSpec` describes a cross product of sample sizes, break
configurations, endogeneity/autocorrelation settings, alternatives and
test methods.  :func:`run_grid` evaluates every cell, optionally across
worker processes and with per-cell checkpointing; results land in a
:class:`McTable` that serializes to CSV, JSON or a panel-style text table.

Reproducibility contract: the table produced by ``(GridSpec, master_seed)``
is byte-identical regardless of worker count, scheduling or resumption,
because every replication draws from a stream addressed only by
(master_seed, cell index, replication index).
"""

from __future__ import annotations

import dataclasses
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .dgp import BreakSpec, DgpConfig, simulate_system
from .estimate import fit_model
from .exceptions import AllBootstrapFitsFailed, HetcointError, NonConvergence
from .hypotests import (
    bonferroni_subresidual_test,
    fixed_regressor_bootstrap,
    shin_critical_value_test,
)
from .models import Family, ModelSpec, linear_model, polynomial_model, smooth_transition_model
from .streams import spawn_seed
from .variance import LrvConfig

# Simulated mean functions: name -> (estimated model, true parameters).
FAMILIES: dict[str, tuple[ModelSpec, tuple]] = {
    "linear": (linear_model(), (1.0,)),
    "quadratic": (polynomial_model(2), (1.0, 1.0)),
    "cubic": (polynomial_model(3), (1.0, 2.0, 1.0)),
    "cubic_intercept": (polynomial_model(3, intercept=True), (1.0, 1.0, 2.0, 1.0)),
    "cubic_trend": (
        polynomial_model(3, intercept=True, trend=True),
        (1.0, 1.0, 1.0, 2.0, 1.0),
    ),
    "smooth_transition": (smooth_transition_model(intercept=True), (0.0, 1.0, 1.0, 5.0)),
}

METHODS = ("bootstrap", "subresidual", "shin")


class CellKey(NamedTuple):
    T: int
    tau: float
    sigma1_sq: float
    lam: float
    rho: float
    rho_mu_sq: float
    method: str


@dataclass(frozen=True)
class CellOutcome:
    """Per-cell tally; ``n_effective + n_excluded`` equals the replication count."""

    rate: float
    n_reject: int
    n_effective: int
    n_excluded: int


@dataclass(frozen=True)
class McTable:
    cells: dict


@dataclass(frozen=True)
class TestConfig:
    """How each replication is tested (shared by harness and application)."""

    method: str = "bootstrap"
    B: int = 399
    alpha: float = 0.05
    lrv: str = "auto"
    estimator: str = "auto"
    K: int = 1
    block: int | str = "auto"

    def lrv_config(self, rho: float) -> LrvConfig:
        """Resolve 'auto': parametric for serially uncorrelated errors
        (rho == 0 in the simulation designs), Bartlett otherwise."""
        if self.lrv == "parametric":
            return LrvConfig.parametric()
        if self.lrv == "bartlett":
            return LrvConfig.bartlett()
        if self.lrv == "auto":
            return LrvConfig.parametric() if rho == 0.0 else LrvConfig.bartlett()
        raise ValueError(f"unknown lrv setting {self.lrv!r}")


@dataclass(frozen=True)
class GridSpec:
    """Cross product of simulation settings plus execution parameters.

    ``tau = 0`` rows are emitted once with ``sigma1_sq = 1`` (no break), so
    the grid matches the usual table layout where the homoskedastic row is
    not duplicated per break magnitude.
    """

    family: str = "linear"
    T: tuple = (100,)
    tau: tuple = (0.0,)
    sigma1_sq: tuple = (1.0,)
    lam: tuple = (0.0,)
    rho: tuple = (0.0,)
    rho_mu_sq: tuple = (0.0,)
    methods: tuple = ("bootstrap",)
    estimator: str = "auto"
    leads_lags_K: int = 1
    lrv: str = "auto"
    replications: int = 2000
    bootstrap_B: int = 399
    alpha: float = 0.05
    block: int | str = "auto"
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; use one of {sorted(FAMILIES)}")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; use one of {METHODS}")

    @classmethod
    def from_toml(cls, path) -> "GridSpec":
        import sys

        if sys.version_info >= (3, 11):
            import tomllib as toml
        else:
            import tomli as toml
        with open(path, "rb") as fh:
            doc = toml.load(fh)
        section = doc.get("grid", doc)
        return cls.from_dict(section)

    @classmethod
    def from_dict(cls, section: dict) -> "GridSpec":
        def as_tuple(v):
            return tuple(v) if isinstance(v, (list, tuple)) else (v,)

        kwargs = {}
        rename = {"lambda": "lam"}
        tuple_fields = {"T", "tau", "sigma1_sq", "lam", "rho", "rho_mu_sq", "methods"}
        for key, val in section.items():
            name = rename.get(key, key)
            if name not in {f.name for f in dataclasses.fields(cls)}:
                raise ValueError(f"unknown grid key {key!r}")
            kwargs[name] = as_tuple(val) if name in tuple_fields else val
        return cls(**kwargs)

    def break_pairs(self) -> list[tuple[float, float]]:
        pairs = []
        if any(t == 0.0 for t in self.tau):
            pairs.append((0.0, 1.0))
        pairs.extend((t, s) for t in self.tau if t != 0.0 for s in self.sigma1_sq)
        return pairs

    def cell_keys(self) -> list[CellKey]:
        keys = []
        for method in self.methods:
            for T in self.T:
                for tau, s1 in self.break_pairs():
                    for lam in self.lam:
                        for rho in self.rho:
                            for rmu in self.rho_mu_sq:
                                keys.append(CellKey(T, tau, s1, lam, rho, rmu, method))
        return keys

    def dgp_config(self, key: CellKey) -> DgpConfig:
        spec, theta = FAMILIES[self.family]
        br = BreakSpec.constant(1.0) if key.tau == 0.0 else BreakSpec(key.tau, 1.0, key.sigma1_sq)
        return DgpConfig(
            T=key.T,
            model=spec,
            theta=theta,
            rho=key.rho,
            rho_mu_sq=key.rho_mu_sq,
            lam=key.lam,
            u_break=br,
            x_break=br,
            mu_break=br,
        )

    def test_config(self, method: str) -> TestConfig:
        return TestConfig(
            method=method,
            B=self.bootstrap_B,
            alpha=self.alpha,
            lrv=self.lrv,
            estimator=self.estimator,
            K=self.leads_lags_K,
            block=self.block,
        )

    def fingerprint(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, default=str)


def run_cell(config: DgpConfig, test_cfg: TestConfig, R: int, seed: int) -> CellOutcome:
    """Rejection tally over R independent replications of one design cell.

    Replication r simulates with stream (seed, r, 0) and tests with stream
    (seed, r, 1).  Replications whose original fit does not converge (or
    whose bootstrap exhausts every refit) are excluded from the denominator,
    mirroring the exclusion rule used for the reported tables.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    spec = config.model
    lrv_cfg = test_cfg.lrv_config(config.rho)
    tidx = np.arange(1, config.T + 1) if spec.trend else None
    n_reject = n_excluded = 0
    for r in range(R):
        sample = simulate_system(config, spawn_seed(seed, r, 0))
        try:
            fit = fit_model(
                spec, sample.x, sample.y, estimator=test_cfg.estimator, K=test_cfg.K, t=tidx
            )
            if not fit.converged:
                n_excluded += 1
                continue
            if test_cfg.method == "bootstrap":
                outcome = fixed_regressor_bootstrap(
                    spec,
                    sample.x,
                    sample.y,
                    test_cfg.B,
                    lrv_cfg,
                    spawn_seed(seed, r, 1),
                    estimator=test_cfg.estimator,
                    K=test_cfg.K,
                    fit=fit,
                )
            elif test_cfg.method == "subresidual":
                outcome = bonferroni_subresidual_test(
                    fit.residuals, alpha=test_cfg.alpha, block=test_cfg.block, lrv_cfg=lrv_cfg
                )
            elif test_cfg.method == "shin":
                outcome = shin_critical_value_test(fit.residuals, lrv_cfg, spec=spec)
            else:
                raise ValueError(f"unknown method {test_cfg.method!r}")
        except (NonConvergence, AllBootstrapFitsFailed) as exc:
            warnings.warn(f"replication {r} excluded: {exc}")
            n_excluded += 1
            continue
        if outcome.p_value <= test_cfg.alpha:
            n_reject += 1
    if n_excluded and spec.family is not Family.SMOOTH_TRANSITION:
        warnings.warn(
            f"{n_excluded} replications excluded for a {spec.family.value} cell; "
            "exclusions are expected only for smooth transition fits"
        )
    n_eff = R - n_excluded
    rate = n_reject / n_eff if n_eff else 0.0
    return CellOutcome(rate=rate, n_reject=n_reject, n_effective=n_eff, n_excluded=n_excluded)


def _cell_task(args):
    grid, index, key = args
    cell_seed = spawn_seed(grid.master_seed, index)
    outcome = run_cell(
        grid.dgp_config(key), grid.test_config(key.method), grid.replications, cell_seed
    )
    return index, key, cell_seed, outcome


def _load_checkpoint(path: Path, fingerprint: str) -> dict:
    done = {}
    if not path.exists():
        return done
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("grid") != fingerprint:
                continue
            key = CellKey(**{k: rec[k] for k in CellKey._fields})
            done[key] = CellOutcome(
                rate=rec["n_reject"] / rec["n_effective"] if rec["n_effective"] else 0.0,
                n_reject=rec["n_reject"],
                n_effective=rec["n_effective"],
                n_excluded=rec["n_excluded"],
            )
    return done


def _append_checkpoint(
    path: Path, fingerprint: str, index: int, cell_seed: int, key: CellKey, out: CellOutcome
):
    rec = dict(key._asdict())
    rec.update(
        {
            "grid": fingerprint,
            "cell_index": index,
            "cell_seed": cell_seed,
            "n_reject": out.n_reject,
            "n_effective": out.n_effective,
            "n_excluded": out.n_excluded,
        }
    )
    with open(path, "a") as fh:
        fh.write(json.dumps(rec) + "\n")
        fh.flush()


def run_grid(
    grid: GridSpec,
    jobs: int = 1,
    checkpoint=None,
    progress: bool = False,
) -> McTable:
    """Evaluate every grid cell; resumable and deterministic.

    With ``checkpoint`` set, one JSON record per completed cell is appended
    to that file and matching records are skipped on rerun; interrupting a
    run therefore loses at most the cell in flight.
    """
    keys = grid.cell_keys()
    fingerprint = grid.fingerprint()
    ckpt = Path(checkpoint) if checkpoint else None
    done = _load_checkpoint(ckpt, fingerprint) if ckpt else {}
    pending = [(grid, i, k) for i, k in enumerate(keys) if k not in done]

    results = dict(done)

    def record(index, key, cell_seed, outcome):
        results[key] = outcome
        if ckpt:
            _append_checkpoint(ckpt, fingerprint, index, cell_seed, key, outcome)
        if progress:
            print(f"[{len(results)}/{len(keys)}] {key} rate={outcome.rate:.4f}", flush=True)

    if jobs <= 1 or not pending:
        for task in pending:
            record(*_cell_task(task))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for res in pool.map(_cell_task, pending):
                record(*res)
    return McTable(cells={k: results[k] for k in keys})


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_CSV_HEADER = "T,tau,sigma1_sq,lambda,rho,rho_mu_sq,method,rate_pct,n_reject,n_effective,n_excluded"


def emit_table(table: McTable, format: str = "csv") -> str:
    """Render a table as ``csv``, ``json`` or panel-style ``text``."""
    if format == "csv":
        lines = [_CSV_HEADER]
        for key, out in table.cells.items():
            lines.append(
                f"{key.T},{key.tau!r},{key.sigma1_sq!r},{key.lam!r},{key.rho!r},"
                f"{key.rho_mu_sq!r},{key.method},{out.rate * 100.0!r},"
                f"{out.n_reject},{out.n_effective},{out.n_excluded}"
            )
        return "\n".join(lines) + "\n"
    if format == "json":
        recs = []
        for key, out in table.cells.items():
            rec = dict(key._asdict())
            rec.update(dataclasses.asdict(out))
            recs.append(rec)
        return json.dumps(recs, indent=2) + "\n"
    if format == "text":
        return _emit_text(table)
    raise ValueError(f"unknown format {format!r}")


def parse_table(csv_text: str) -> McTable:
    """Inverse of ``emit_table(..., 'csv')``.

    The rate is recomputed as n_reject / n_effective, so a round trip
    reproduces the original table exactly.
    """
    lines = [ln for ln in csv_text.strip().splitlines() if ln]
    if not lines or lines[0] != _CSV_HEADER:
        raise ValueError("unrecognized table header")
    cells = {}
    for ln in lines[1:]:
        parts = ln.split(",")
        key = CellKey(
            T=int(parts[0]),
            tau=float(parts[1]),
            sigma1_sq=float(parts[2]),
            lam=float(parts[3]),
            rho=float(parts[4]),
            rho_mu_sq=float(parts[5]),
            method=parts[6],
        )
        n_reject, n_eff, n_excl = int(parts[8]), int(parts[9]), int(parts[10])
        cells[key] = CellOutcome(
            rate=n_reject / n_eff if n_eff else 0.0,
            n_reject=n_reject,
            n_effective=n_eff,
            n_excluded=n_excl,
        )
    return McTable(cells=cells)


def _emit_text(table: McTable) -> str:
    """Panel layout: one block per (method, T), rows (tau, sigma1_sq),
    columns (rho_mu_sq, rho, lambda)."""
    if not table.cells:
        return "(empty table)\n"
    keys = list(table.cells)
    col_ids = sorted({(k.rho_mu_sq, k.rho, k.lam) for k in keys})
    row_ids = sorted({(k.tau, k.sigma1_sq) for k in keys})
    blocks = sorted({(k.method, k.T) for k in keys}, key=lambda b: (b[0], b[1]))
    lookup = {
        (k.method, k.T, k.tau, k.sigma1_sq, k.rho_mu_sq, k.rho, k.lam): v
        for k, v in table.cells.items()
    }
    out = []
    for method, T in blocks:
        out.append(f"== method={method}  T={T}  (rejection rates in %)")
        header = "tau    sigma1^2 | " + " ".join(
            f"mu2={c[0]:g},rho={c[1]:g},lam={c[2]:g}".ljust(22) for c in col_ids
        )
        out.append(header)
        for tau, s1 in row_ids:
            cellvals = []
            for c in col_ids:
                v = lookup.get((method, T, tau, s1, c[0], c[1], c[2]))
                cellvals.append(f"{v.rate * 100:.1f}".ljust(22) if v else "-".ljust(22))
            out.append(f"{tau:<6g} {s1:<8g} | " + " ".join(cellvals))
        out.append("")
    return "\n".join(out) + "\n"
