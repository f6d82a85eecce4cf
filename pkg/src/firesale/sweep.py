"""Parameter sweeps: phase diagrams, diversification sweeps, method-gap
tables, and the four-way stability classification.

Every grid cell derives its random streams from (global seed, cell index),
cells are dispatched to a process pool, and reductions run in cell-index
order, so rerunning a configuration reproduces its CSV byte for byte
regardless of the worker count.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .corsi import corsi_estimate, corsi_lambda_max
from .network import child_seed, sample_holdings, spawn_rng, to_weights
from .params import (
    HeterogeneityParams,
    ModelParams,
    ParameterError,
    second_moment,
    solve_heterogeneity,
    target_leverage,
)
from .replica import ApproxPhiSpec, approx_prefactor, replica_lambda_max, scaling_constant
from .spectral import PhiOperator, lambda_max, mc_lambda_max

TRUTH_METHOD = "diagonalization"

# Table of verdict labels: truth (row) vs approximate method (column).
TRUE_UNSTABLE = "true-unstable"
FALSE_STABLE = "false-stable"
FALSE_UNSTABLE = "false-unstable"
TRUE_STABLE = "true-stable"
INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class SweepConfig:
    """Grid specification and execution knobs for one sweep run."""

    model: ModelParams
    methods: tuple = ("diagonalization", "corsi", "replica")
    samples: int = 200
    seed: int = 0
    workers: int = 1
    out_dir: Path | None = None
    fmt: str = "csv"
    heatmaps: bool = False
    solver: str = "lanczos"
    phi_values: np.ndarray | None = None
    p_heavy_values: np.ndarray | None = None
    q_values: np.ndarray | None = None
    het_phi: float = 0.9
    het_p_heavy: float = 7.0 / 27.0
    replica_pop: int = 10_000
    replica_equilibration: int = 200
    replica_measurement: int = 150
    replica_tol: float = 0.01
    replica_breakdown_tol: float = 1e-3
    gap_scales: tuple = (1, 2, 4)

    def __post_init__(self) -> None:
        if self.samples < 1:
            raise ParameterError("samples must be >= 1")
        if not self.methods:
            raise ParameterError("at least one method is required")
        if self.fmt not in ("csv", "json"):
            raise ParameterError(f"unknown output format {self.fmt!r}")


@dataclass
class CellResult:
    """One evaluated grid cell with derived scalars and per-method estimates."""

    index: int
    setting: str
    phi: float
    p_heavy: float
    q: float
    heavy: float = math.nan
    light: float = math.nan
    b: float = math.nan
    eta: float = math.nan
    kappa: float = math.nan
    scale_c: float = math.nan
    estimates: dict = field(default_factory=dict)
    classification: dict = field(default_factory=dict)
    error: str | None = None


@dataclass
class SweepResult:
    kind: str
    cells: list
    config: SweepConfig
    contours: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    @property
    def n_failed(self) -> int:
        return sum(1 for c in self.cells if getattr(c, "error", None) is not None)


def classify(cell: CellResult) -> dict:
    """Four-way stability verdicts of each approximate method against truth.

    The market is unstable when the averaged largest eigenvalue exceeds 1.
    Estimates within two standard errors of the threshold (on either side
    of the comparison) are flagged indeterminate instead of being forced
    into a quadrant.
    """
    if TRUTH_METHOD not in cell.estimates:
        raise ParameterError("classification requires a diagonalization estimate")
    truth = cell.estimates[TRUTH_METHOD]
    labels = {}
    truth_tied = abs(truth.value - 1.0) < 2.0 * truth.stderr
    for method, est in cell.estimates.items():
        if method == TRUTH_METHOD:
            continue
        if truth_tied or abs(est.value - 1.0) < 2.0 * est.stderr:
            labels[method] = INDETERMINATE
            continue
        if truth.value > 1.0:
            labels[method] = TRUE_UNSTABLE if est.value > 1.0 else FALSE_STABLE
        else:
            labels[method] = FALSE_UNSTABLE if est.value > 1.0 else TRUE_STABLE
    return labels


def _evaluate_cell(
    cfg: SweepConfig,
    model: ModelParams,
    het: HeterogeneityParams,
    index: int,
    setting: str,
    phi: float,
    p_heavy: float,
) -> CellResult:
    cell = CellResult(
        index=index, setting=setting, phi=phi, p_heavy=p_heavy, q=model.q
    )
    cell.heavy = het.heavy
    cell.light = het.light
    cell.b = second_moment(het)
    cell.eta = target_leverage(model)
    cell.kappa = approx_prefactor(model)
    cell.scale_c = scaling_constant(model.alpha, model.q)
    if TRUTH_METHOD in cfg.methods:
        cell.estimates[TRUTH_METHOD] = mc_lambda_max(
            model,
            het,
            cfg.samples,
            child_seed(cfg.seed, 2, index),
            method=cfg.solver,
            tol=1e-9 if cfg.solver == "lanczos" else 1e-10,
        )
    if "corsi" in cfg.methods:
        cell.estimates["corsi"] = corsi_estimate(model, cell.b)
    if "replica" in cfg.methods:
        spec = ApproxPhiSpec.from_model(model, het)
        cell.estimates["replica"] = replica_lambda_max(
            spec,
            pop_size=cfg.replica_pop,
            n_equilibrate=cfg.replica_equilibration,
            n_measure=cfg.replica_measurement,
            seed=child_seed(cfg.seed, 3, index),
            tol=cfg.replica_tol,
            breakdown_tol=cfg.replica_breakdown_tol,
        )
    if TRUTH_METHOD in cell.estimates:
        cell.classification = classify(cell)
    return cell


def _phase_cell(cfg: SweepConfig, task) -> CellResult:
    index, phi, p_heavy = task
    try:
        het = solve_heterogeneity(phi, p_heavy)
        return _evaluate_cell(cfg, cfg.model, het, index, "grid", phi, p_heavy)
    except ParameterError as exc:
        cell = CellResult(
            index=index, setting="grid", phi=phi, p_heavy=p_heavy, q=cfg.model.q
        )
        cell.error = str(exc)
        return cell


def _q_cell(cfg: SweepConfig, task) -> CellResult:
    index, q, setting = task
    try:
        model = _with_q(cfg.model, q)
        if setting == "homogeneous":
            het = HeterogeneityParams.homogeneous()
            phi, p_heavy = 0.0, 1.0
        else:
            phi, p_heavy = cfg.het_phi, cfg.het_p_heavy
            het = solve_heterogeneity(phi, p_heavy)
        return _evaluate_cell(cfg, model, het, index, setting, phi, p_heavy)
    except ParameterError as exc:
        cell = CellResult(
            index=index, setting=setting, phi=math.nan, p_heavy=math.nan, q=q
        )
        cell.error = str(exc)
        return cell


def _with_q(model: ModelParams, q: float) -> ModelParams:
    return ModelParams(
        n_assets=model.n_assets,
        n_banks=model.n_banks,
        q=float(q),
        zeta=model.zeta,
        sigma_s2=model.sigma_s2,
        sigma_d2=model.sigma_d2,
        gamma=model.gamma,
        sigma_f2=model.sigma_f2,
        sigma_nu2=model.sigma_nu2,
    )


def _with_shape(model: ModelParams, n_assets: int, n_banks: int) -> ModelParams:
    return ModelParams(
        n_assets=n_assets,
        n_banks=n_banks,
        q=model.q,
        zeta=model.zeta,
        sigma_s2=model.sigma_s2,
        sigma_d2=model.sigma_d2,
        gamma=model.gamma,
        sigma_f2=model.sigma_f2,
        sigma_nu2=model.sigma_nu2,
    )


def _run_tasks(fn, tasks, workers: int) -> list:
    if workers <= 1:
        return [fn(task) for task in tasks]
    chunk = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))


def run_phase_diagram(cfg: SweepConfig) -> SweepResult:
    """Evaluate every (phi, p_heavy) grid cell with the requested methods.

    Per-cell failures (e.g. the contradictory p_heavy=1, phi>0 corner) are
    recorded in place and the run continues.  The E[lambda_max]=1 crossing
    is interpolated along each p_heavy column per method.
    """
    if cfg.phi_values is None or cfg.p_heavy_values is None:
        raise ParameterError("phase diagram requires phi and p_heavy axes")
    tasks = []
    index = 0
    for phi in cfg.phi_values:
        for p_heavy in cfg.p_heavy_values:
            tasks.append((index, float(phi), float(p_heavy)))
            index += 1
    cells = _run_tasks(partial(_phase_cell, cfg), tasks, cfg.workers)
    result = SweepResult(kind="phase-diagram", cells=cells, config=cfg)
    for method in cfg.methods:
        result.contours[method] = _transition_contour(cfg, cells, method)
    _emit(result)
    return result


def run_q_sweep(cfg: SweepConfig) -> SweepResult:
    """E[lambda_max] versus diversification for the homogeneous and
    heterogeneous settings; reports the argmin of each curve."""
    if cfg.q_values is None or len(cfg.q_values) < 3:
        raise ParameterError("q sweep requires at least 3 q values")
    tasks = []
    index = 0
    for setting in ("heterogeneous", "homogeneous"):
        for q in cfg.q_values:
            tasks.append((index, float(q), setting))
            index += 1
    cells = _run_tasks(partial(_q_cell, cfg), tasks, cfg.workers)
    result = SweepResult(kind="q-sweep", cells=cells, config=cfg)
    for setting in ("heterogeneous", "homogeneous"):
        for method in cfg.methods:
            curve = [
                (c.q, c.estimates[method].value)
                for c in cells
                if c.setting == setting and c.error is None and method in c.estimates
            ]
            if curve:
                qmin, _ = min(curve, key=lambda pair: pair[1])
                result.summary[f"argmin.{setting}.{method}"] = qmin
    _emit(result)
    return result


@dataclass
class GapRow:
    scale: int
    q: float
    n_assets: int
    n_banks: int
    corsi_gap: float
    surrogate_gap_mean: float
    surrogate_gap_se: float
    samples: int


def _gap_point(cfg: SweepConfig, task) -> GapRow:
    index, scale, q = task
    model = _with_q(
        _with_shape(
            cfg.model, cfg.model.n_assets * scale, cfg.model.n_banks * scale
        ),
        q,
    )
    het = solve_heterogeneity(cfg.het_phi, cfg.het_p_heavy)
    kappa = approx_prefactor(model)
    gaps = np.empty(cfg.samples)
    lam_phi = np.empty(cfg.samples)
    for i in range(cfg.samples):
        rng = spawn_rng(cfg.seed, 4, index, i)
        x = sample_holdings(model, het, rng)
        op_phi = PhiOperator.from_weights(to_weights(x), model)
        op_x = PhiOperator(x.to_csr(), kappa)
        res_phi = lambda_max(op_phi, tol=1e-9, method=cfg.solver)
        res_x = lambda_max(op_x, tol=1e-9, method=cfg.solver)
        lam_phi[i] = res_phi.value
        gaps[i] = (res_x.value - res_phi.value) / res_phi.value
    b = second_moment(het)
    corsi_gap = (corsi_lambda_max(model, b) - lam_phi.mean()) / lam_phi.mean()
    return GapRow(
        scale=scale,
        q=q,
        n_assets=model.n_assets,
        n_banks=model.n_banks,
        corsi_gap=float(corsi_gap),
        surrogate_gap_mean=float(gaps.mean()),
        surrogate_gap_se=float(gaps.std(ddof=1) / math.sqrt(cfg.samples)),
        samples=cfg.samples,
    )


def run_gap_analysis(cfg: SweepConfig, scales=None) -> SweepResult:
    """Relative gaps of both approximations against paired diagonalization.

    For each (scale, q): the closed-form gap against the sample-averaged
    exact eigenvalue, and the per-sample relative gap of the surrogate
    operator built from the same holdings draw.
    """
    if cfg.q_values is None or len(cfg.q_values) < 1:
        raise ParameterError("gap analysis requires a q axis")
    scales = tuple(scales) if scales is not None else cfg.gap_scales
    tasks = []
    index = 0
    for scale in scales:
        for q in cfg.q_values:
            tasks.append((index, int(scale), float(q)))
            index += 1
    rows = _run_tasks(partial(_gap_point, cfg), tasks, cfg.workers)
    result = SweepResult(kind="gap", cells=rows, config=cfg)
    _emit(result)
    return result


def _transition_contour(cfg: SweepConfig, cells, method: str) -> list:
    """Linear interpolation of the E[lambda_max]=1 crossing along phi."""
    contour = []
    if cfg.phi_values is None or cfg.p_heavy_values is None:
        return contour
    n_p = len(cfg.p_heavy_values)
    for j, p_heavy in enumerate(cfg.p_heavy_values):
        column = [
            (c.phi, c.estimates[method].value)
            for c in cells
            if c.error is None
            and method in c.estimates
            and abs(c.p_heavy - p_heavy) < 1e-15
        ]
        column.sort()
        for (phi0, v0), (phi1, v1) in zip(column, column[1:]):
            if (v0 - 1.0) * (v1 - 1.0) <= 0.0 and v0 != v1:
                crossing = phi0 + (1.0 - v0) * (phi1 - phi0) / (v1 - v0)
                contour.append((float(p_heavy), float(crossing)))
                break
    return contour


# --------------------------------------------------------------------------
# output emission
# --------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def cell_rows(result: SweepResult):
    """Canonical tabular view of a sweep's cells (stable column order)."""
    methods = list(result.config.methods)
    header = [
        "index", "setting", "phi", "p_b", "q",
        "B", "s", "b", "eta", "kappa", "c",
    ]
    for m in methods:
        header += [f"lambda_{m}", f"stderr_{m}", f"class_{m}"]
    header.append("error")
    yield header
    if result.kind == "gap":
        return
    for cell in result.cells:
        row = [
            cell.index, cell.setting, _fmt(cell.phi), _fmt(cell.p_heavy),
            _fmt(cell.q), _fmt(cell.heavy), _fmt(cell.light), _fmt(cell.b),
            _fmt(cell.eta), _fmt(cell.kappa), _fmt(cell.scale_c),
        ]
        for m in methods:
            est = cell.estimates.get(m)
            if est is None:
                row += ["", "", ""]
            else:
                row += [
                    _fmt(est.value),
                    _fmt(est.stderr),
                    cell.classification.get(m, ""),
                ]
        row.append(cell.error or "")
        yield row


def gap_rows(result: SweepResult):
    yield [
        "scale", "q", "N", "M", "corsi_gap",
        "surrogate_gap_mean", "surrogate_gap_se", "samples",
    ]
    for row in result.cells:
        yield [
            row.scale, _fmt(row.q), row.n_assets, row.n_banks,
            _fmt(row.corsi_gap), _fmt(row.surrogate_gap_mean),
            _fmt(row.surrogate_gap_se), row.samples,
        ]


def write_csv(result: SweepResult, path) -> None:
    rows = gap_rows(result) if result.kind == "gap" else cell_rows(result)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in rows:
            writer.writerow(row)


def write_json(result: SweepResult, path) -> None:
    rows = list(gap_rows(result) if result.kind == "gap" else cell_rows(result))
    header, body = rows[0], rows[1:]
    records = [dict(zip(header, row)) for row in body]
    Path(path).write_text(json.dumps(records, indent=1) + "\n")


def _config_dict(cfg: SweepConfig) -> dict:
    raw = asdict(cfg)
    for key, value in raw.items():
        if isinstance(value, np.ndarray):
            raw[key] = value.tolist()
        elif isinstance(value, Path):
            raw[key] = str(value)
    return raw


def write_manifest(result: SweepResult, path) -> None:
    manifest = {
        "kind": result.kind,
        "version": __version__,
        "seed": result.config.seed,
        "config": _config_dict(result.config),
        "summary": result.summary,
        "n_failed_cells": result.n_failed,
    }
    Path(path).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def write_heatmaps(result: SweepResult, out_dir) -> list:
    """One SVG heatmap per method with the lambda=1 contour overlaid."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cfg = result.config
    written = []
    if cfg.phi_values is None or cfg.p_heavy_values is None:
        return written
    for method in cfg.methods:
        grid = np.full((len(cfg.phi_values), len(cfg.p_heavy_values)), np.nan)
        for c in result.cells:
            if c.error is None and method in c.estimates:
                i = int(np.argmin(np.abs(cfg.phi_values - c.phi)))
                j = int(np.argmin(np.abs(cfg.p_heavy_values - c.p_heavy)))
                grid[i, j] = c.estimates[method].value
        fig, ax = plt.subplots(figsize=(6, 5))
        mesh = ax.pcolormesh(cfg.p_heavy_values, cfg.phi_values, grid,
                             shading="nearest")
        fig.colorbar(mesh, ax=ax, label="average largest eigenvalue")
        contour = result.contours.get(method, [])
        if contour:
            xs = [pt[0] for pt in contour]
            ys = [pt[1] for pt in contour]
            ax.plot(xs, ys, "r-", lw=2, label="instability threshold")
            ax.legend(loc="lower right")
        ax.set_xlabel("heavy-investment probability")
        ax.set_ylabel("heterogeneity")
        ax.set_title(f"{method}")
        path = Path(out_dir) / f"heatmap_{method}.svg"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written


def _emit(result: SweepResult) -> None:
    cfg = result.config
    if cfg.out_dir is None:
        return
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = result.kind.replace("-", "_")
    if cfg.fmt == "json":
        write_json(result, out / f"{stem}.json")
    else:
        write_csv(result, out / f"{stem}.csv")
    write_manifest(result, out / f"{stem}_manifest.json")
    if cfg.heatmaps and result.kind == "phase-diagram":
        write_heatmaps(result, out)
