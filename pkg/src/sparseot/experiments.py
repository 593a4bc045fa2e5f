"""Reproducible sweeps over cost families, regularization strengths and dimensions.

Each cell of a sweep is keyed by ``(pattern, n, s, d, seed, cost, gamma, k)``
and produces one :data:`RECORD_FIELDS` row. Results are written sorted by
that key, so identical configurations give byte-identical CSV files no
matter how many workers ran the cells or whether the sweep was resumed.
Wall-clock times live in a separate sidecar file for the same reason.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from sparseot.costs import CostFamily, CostModel, cost_matrix
from sparseot.exceptions import ConfigError
from sparseot.io import write_rows
from sparseot.maps import fit_map
from sparseot.metrics import mean_sparsity, nmse, rbo, sinkhorn_divergence, support_error
from sparseot.sinkhorn import PointCloud, SolveConfig, epsilon_from_cost
from sparseot.synthetic import Pattern, SyntheticSpec, make_benchmark, query_points

logger = logging.getLogger(__name__)

DEFAULT_GAMMAS = tuple(float(g) for g in np.logspace(-3, 1, 6))
KSUPPORT_MAX_DIM = 512
RBO_P = 0.9

KEY_FIELDS = ["pattern", "n", "s", "d", "seed", "cost", "gamma", "k"]
RECORD_FIELDS = KEY_FIELDS + [
    "epsilon_fraction",
    "tol",
    "max_iter",
    "epsilon",
    "iterations",
    "marginal_error",
    "converged",
    "nmse",
    "nmse_fresh",
    "support_error",
    "mean_sparsity",
    "sinkhorn_div",
    "rbo",
    "error",
]
SUMMARY_FIELDS = ["pattern", "n", "s", "d", "cost", "k", "best_gamma", "nmse", "support_error",
                  "mean_sparsity", "n_seeds"]


@dataclass
class ExperimentConfig:
    costs: Sequence[str] = ("sqeuclid", "l1", "stvs")
    gammas: Sequence[float] = DEFAULT_GAMMAS
    k: int = 1
    pattern: str = "constant"
    n: int = 1000
    s: int = 5
    dims: Sequence[int] = (100,)
    seeds: Sequence[int] = (0,)
    epsilon_fraction: float = 0.1
    tol: float = 1e-6
    max_iter: int = 10_000
    n_query: Optional[int] = None
    divergence: bool = True

    def __post_init__(self):
        self.costs = [CostFamily(c).value for c in self.costs]
        self.gammas = [float(g) for g in self.gammas]
        self.dims = [int(d) for d in self.dims]
        self.seeds = [int(s) for s in self.seeds]
        self.pattern = Pattern(self.pattern).value
        if not self.costs:
            raise ConfigError("at least one cost family is required")
        if not self.gammas or any(not (g >= 0 and math.isfinite(g)) for g in self.gammas):
            raise ConfigError("gamma grid must be non-empty and nonnegative")
        if not 0 < self.epsilon_fraction <= 1:
            raise ConfigError("epsilon fraction must lie in (0, 1]")
        if not self.dims or not self.seeds:
            raise ConfigError("dimension and seed grids must be non-empty")
        for d in self.dims:
            SyntheticSpec(self.n, d, self.s, self.pattern, 0)  # validates (n, d, s)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return cls(**data)


@dataclass(frozen=True)
class Cell:
    d: int
    seed: int
    cost: CostModel

    def key(self, cfg: ExperimentConfig) -> Tuple:
        return _key(cfg.pattern, cfg.n, cfg.s, self.d, self.seed, self.cost.family.value,
                    self.cost.gamma, self.cost.k)


def _key(pattern, n, s, d, seed, cost, gamma, k) -> Tuple:
    k = "" if k in (None, "") else int(k)
    return (str(pattern), int(n), int(s), int(d), int(seed), str(cost), float(gamma), k)


def enumerate_cells(cfg: ExperimentConfig) -> List[Cell]:
    cells = []
    for d in cfg.dims:
        for seed in cfg.seeds:
            for fam in cfg.costs:
                if fam == CostFamily.SQEUCLIDEAN.value:
                    cells.append(Cell(d, seed, CostModel.sqeuclidean()))
                    continue
                if fam == CostFamily.KSUPPORT.value and (d > KSUPPORT_MAX_DIM or cfg.k > d):
                    continue
                for g in cfg.gammas:
                    k = cfg.k if fam == CostFamily.KSUPPORT.value else None
                    cells.append(Cell(d, seed, CostModel(CostFamily(fam), g, k)))
    return cells


def _ranked_coordinates(displacements: np.ndarray, depth: int) -> List[int]:
    score = np.mean(np.abs(displacements), axis=0)
    order = np.argsort(-score, kind="stable")
    return [int(i) for i in order[:depth]]


def evaluate_cell(cfg: ExperimentConfig, bench, cost: CostModel) -> dict:
    """Fit one map on a benchmark and compute its metric row."""
    spec = bench.spec
    X = bench.source.points
    solve = SolveConfig(epsilon_fraction=cfg.epsilon_fraction, tolerance=cfg.tol,
                        max_iterations=cfg.max_iter)
    fmap = fit_map(bench.source, bench.target, cost, solve)
    pots = fmap.potentials

    out = fmap(X)
    delta = out - X
    truth = bench.truth(X)
    mask = bench.support_mask(X)
    queries = query_points(spec, cfg.n_query)
    q_out = fmap(queries)

    try:
        se = support_error(delta, support=mask)
    except ValueError:
        se = float("nan")

    depth = int(min(spec.d, spec.s if spec.pattern is Pattern.CONSTANT else 2 * spec.s))
    true_rank = _ranked_coordinates(truth - X, depth)
    est_rank = _ranked_coordinates(delta, depth)

    div = float("nan")
    if cfg.divergence:
        ref = CostModel.sqeuclidean()
        eps_div = epsilon_from_cost(cost_matrix(bench.target.points, bench.target.points, ref), 0.1)
        div = sinkhorn_divergence(PointCloud(q_out), bench.target, ref, eps_div, debias=True)

    return {
        "epsilon": pots.epsilon,
        "iterations": pots.iterations,
        "marginal_error": pots.marginal_error,
        "converged": int(pots.converged),
        "nmse": nmse(truth, out),
        "nmse_fresh": nmse(bench.truth(queries), q_out),
        "support_error": se,
        "mean_sparsity": mean_sparsity(delta),
        "sinkhorn_div": div,
        "rbo": rbo(true_rank, est_rank, RBO_P),
        "error": "",
    }


def _run_group(cfg: ExperimentConfig, d: int, seed: int, costs: List[CostModel]):
    """Evaluate all cells sharing one benchmark; returns (rows, timings)."""
    bench = make_benchmark(SyntheticSpec(cfg.n, d, cfg.s, cfg.pattern, seed))
    rows, timings = [], []
    for cost in costs:
        base = {
            "pattern": cfg.pattern, "n": cfg.n, "s": cfg.s, "d": d, "seed": seed,
            "cost": cost.family.value, "gamma": cost.gamma,
            "k": "" if cost.k is None else cost.k,
            "epsilon_fraction": cfg.epsilon_fraction, "tol": cfg.tol, "max_iter": cfg.max_iter,
        }
        t0 = time.perf_counter()
        try:
            metrics = evaluate_cell(cfg, bench, cost)
        except Exception as exc:  # recorded per row; the sweep carries on
            logger.exception("cell %s failed", base)
            metrics = {f: "" for f in RECORD_FIELDS if f not in base}
            metrics["error"] = f"{type(exc).__name__}: {exc}"
        row = {**base, **metrics}
        rows.append(row)
        timings.append((row, time.perf_counter() - t0))
    return rows, timings


def _format(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _row_key(row: Dict[str, str]) -> Tuple:
    return _key(*(row[f] for f in KEY_FIELDS))


def read_records(path) -> List[Dict[str, str]]:
    path = Path(path)
    if not path.exists():
        return []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RECORD_FIELDS:
            raise ConfigError(f"{path}: header does not match the record schema")
        return list(reader)


def write_records(path, rows: List[Dict]) -> None:
    ordered = sorted(rows, key=_row_key)
    write_rows(path, RECORD_FIELDS, ([_format(r[f]) for f in RECORD_FIELDS] for r in ordered))


def best_gamma_summary(rows: List[Dict]) -> List[Dict]:
    """Per (d, cost) the gamma with the lowest seed-averaged NMSE."""
    groups: Dict[Tuple, Dict[float, List[Dict]]] = {}
    for r in rows:
        if r.get("error"):
            continue
        gk = (r["pattern"], int(r["n"]), int(r["s"]), int(r["d"]), r["cost"], str(r["k"]))
        groups.setdefault(gk, {}).setdefault(float(r["gamma"]), []).append(r)
    out = []
    for gk in sorted(groups):
        by_gamma = groups[gk]
        means = {}
        for g, rs in by_gamma.items():
            means[g] = {
                f: float(np.nanmean([float(r[f]) for r in rs]))
                for f in ("nmse", "support_error", "mean_sparsity")
            }
        best = min(sorted(means), key=lambda g: means[g]["nmse"])
        pattern, n, s, d, cost, k = gk
        out.append({
            "pattern": pattern, "n": n, "s": s, "d": d, "cost": cost, "k": k,
            "best_gamma": best, **means[best], "n_seeds": len(by_gamma[best]),
        })
    return out


def write_summary(path, summary: List[Dict]) -> None:
    write_rows(path, SUMMARY_FIELDS, ([_format(r[f]) for f in SUMMARY_FIELDS] for r in summary))


def _paths(output) -> Tuple[Path, Path, Path, Path]:
    output = Path(output)
    stem = output.with_suffix("")
    return (
        output,
        Path(f"{stem}.summary.csv"),
        Path(f"{stem}.config.json"),
        Path(f"{stem}.timings.csv"),
    )


def run_sweep(cfg: ExperimentConfig, output, workers: int = 1) -> List[Dict]:
    """Run (or resume) a sweep and write records, best-gamma summary and config echo.

    Cells already present in ``output`` (matched by key) are skipped.
    """
    out_path, summary_path, config_path, timing_path = _paths(output)
    existing = read_records(out_path)
    done = {_row_key(r) for r in existing}

    groups: Dict[Tuple[int, int], List[CostModel]] = {}
    for cell in enumerate_cells(cfg):
        if cell.key(cfg) in done:
            continue
        groups.setdefault((cell.d, cell.seed), []).append(cell.cost)
    logger.info("%d cells done, %d groups to run", len(done), len(groups))

    new_rows: List[Dict] = []
    timings: List[Tuple[Dict, float]] = []
    jobs = [(cfg, d, seed, costs) for (d, seed), costs in groups.items()]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_group, *zip(*jobs)))
    else:
        results = [_run_group(*job) for job in jobs]
    for rows, tms in results:
        new_rows.extend(rows)
        timings.extend(tms)

    all_rows = existing + [{f: _format(r[f]) for f in RECORD_FIELDS} for r in new_rows]
    write_records(out_path, all_rows)
    write_summary(summary_path, best_gamma_summary(all_rows))
    config_path.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    if timings:
        mode = "a" if timing_path.exists() else "w"
        with timing_path.open(mode, newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if mode == "w":
                w.writerow(KEY_FIELDS + ["wall_time_s"])
            for row, secs in timings:
                w.writerow([_format(row[f]) for f in KEY_FIELDS] + [f"{secs:.3f}"])
    return sorted(all_rows, key=_row_key)
