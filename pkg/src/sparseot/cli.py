"""Command-line entry point: ``sparseot {synth,fit,transport,flow,sweep}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from sparseot import io
from sparseot.costs import CostFamily, CostModel
from sparseot.exceptions import ArtifactError, ConfigError, NumericFailure
from sparseot.experiments import DEFAULT_GAMMAS, ExperimentConfig, run_sweep
from sparseot.maps import ACTIVE_THRESHOLD, fit_map, flow
from sparseot.sinkhorn import PointCloud, SolveConfig
from sparseot.synthetic import SyntheticSpec, make_benchmark, query_points

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_ARTIFACT = 4
EXIT_IO = 5

COST_CHOICES = [f.value for f in CostFamily]


def _cost_from_args(args) -> CostModel:
    fam = CostFamily(args.cost)
    k = args.k if fam is CostFamily.KSUPPORT else None
    return CostModel(fam, args.gamma if fam is not CostFamily.SQEUCLIDEAN else 0.0, k)


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=None,
                   help="entropic regularization; overrides --epsilon-fraction")
    p.add_argument("--epsilon-fraction", type=float, default=0.1,
                   help="epsilon as a fraction of the mean cost (default 0.1)")
    p.add_argument("--tol", type=float, default=1e-6, help="marginal L-inf tolerance")
    p.add_argument("--max-iter", type=int, default=10_000)


def cmd_synth(args) -> int:
    spec = SyntheticSpec(args.n, args.d, args.s, args.pattern, args.seed)
    bench = make_benchmark(spec)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    io.write_points(out / "source.csv", bench.source.points)
    io.write_points(out / "target.csv", bench.target.points)
    queries = query_points(spec)
    io.write_points(out / "query.csv", queries)
    io.write_points(out / "query_truth.csv", bench.truth(queries))
    (out / "spec.json").write_text(json.dumps(
        {"n": spec.n, "d": spec.d, "s": spec.s, "pattern": spec.pattern.value,
         "seed": spec.seed}, indent=2) + "\n")
    return 0


def cmd_fit(args) -> int:
    source = PointCloud(io.read_points(args.source))
    target = PointCloud(io.read_points(args.target))
    if source.d != target.d:
        raise ConfigError(f"source has d={source.d} but target has d={target.d}")
    cost = _cost_from_args(args)
    config = SolveConfig(args.epsilon, args.epsilon_fraction, args.tol, args.max_iter)
    fmap = fit_map(source, target, cost, config)
    io.save_map(args.output, fmap, source)
    pots = fmap.potentials
    print(json.dumps({
        "cost": cost.label(), "epsilon": pots.epsilon, "iterations": pots.iterations,
        "marginal_error": pots.marginal_error, "converged": pots.converged,
    }))
    return 0


def _load_query(args, fmap):
    pts = io.read_points(args.query)
    if pts.shape[1] != fmap.d:
        raise ConfigError(f"query has d={pts.shape[1]} but the map has d={fmap.d}")
    return pts


def cmd_transport(args) -> int:
    fmap = io.load_map(args.artifact, args.direction)
    Q = _load_query(args, fmap)
    out = fmap(Q)
    delta = out - Q
    active = np.abs(delta) > args.threshold
    d = fmap.d
    header = ([f"in_{i}" for i in range(d)] + [f"out_{i}" for i in range(d)]
              + ["sparsity", "active_size"])
    rows = []
    for x, y, a in zip(Q, out, active):
        n_active = int(a.sum())
        rows.append(list(map(float, x)) + list(map(float, y)) + [1.0 - n_active / d, n_active])
    io.write_rows(args.output, header, rows)
    return 0


def cmd_flow(args) -> int:
    if args.steps < 1:
        raise ConfigError("--steps must be >= 1")
    if not 0.0 <= args.lam <= 1.0:
        raise ConfigError("--lam must lie in [0, 1]")
    fmap = io.load_map(args.artifact, args.direction)
    Q = _load_query(args, fmap)
    traj = flow(fmap, Q, args.lam, args.steps, args.mode)
    d = fmap.d
    header = ["point", "step", "mode"] + [f"x{i}" for i in range(d)]
    rows = []
    for i in range(Q.shape[0]):
        for t in range(traj.shape[0]):
            rows.append([i, t, args.mode] + list(map(float, traj[t, i])))
    io.write_rows(args.output, header, rows)
    return 0


def cmd_sweep(args) -> int:
    if args.config:
        data = json.loads(Path(args.config).read_text())
        cfg = ExperimentConfig.from_dict(data)
    else:
        cfg = ExperimentConfig(
            costs=args.cost, gammas=args.gamma, k=args.k, pattern=args.pattern, n=args.n,
            s=args.s, dims=args.d, seeds=args.seed, epsilon_fraction=args.epsilon_fraction,
            tol=args.tol, max_iter=args.max_iter, n_query=args.n_query,
            divergence=not args.no_divergence,
        )
    rows = run_sweep(cfg, args.output, workers=args.workers)
    failed = sum(1 for r in rows if r["error"])
    print(json.dumps({"records": len(rows), "failed": failed, "output": str(args.output)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparseot",
        description="Feature-sparse entropic transport maps under elastic costs.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic benchmark as CSV clouds")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--d", type=int, default=100)
    p.add_argument("--s", type=int, default=5)
    p.add_argument("--pattern", choices=["constant", "adaptive"], default="constant")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit an entropic map and save it as an artifact")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--cost", choices=COST_CHOICES, default="sqeuclid")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--k", type=int, default=1)
    _add_solver_flags(p)
    p.add_argument("--seed", type=int, default=0, help="unused; accepted for uniformity")
    p.add_argument("--output", required=True, help="artifact path (.json)")
    p.set_defaults(func=cmd_fit)

    for name, func, helptext in (
        ("transport", cmd_transport, "transport query points with a saved map"),
        ("flow", cmd_flow, "run descent trajectories driven by a saved map"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--artifact", required=True)
        p.add_argument("--query", required=True)
        p.add_argument("--direction", choices=["forward", "reverse"], default=None)
        p.add_argument("--output", required=True)
        if name == "transport":
            p.add_argument("--threshold", type=float, default=ACTIVE_THRESHOLD)
        else:
            p.add_argument("--lam", type=float, default=0.25)
            p.add_argument("--steps", type=int, default=6)
            p.add_argument("--mode", choices=["bregman", "plain"], default="bregman")
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", help="grid over costs, gamma, dimension and seeds")
    p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    p.add_argument("--cost", nargs="+", choices=COST_CHOICES, default=["sqeuclid", "l1", "stvs"])
    p.add_argument("--gamma", nargs="+", type=float, default=list(DEFAULT_GAMMAS))
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--pattern", choices=["constant", "adaptive"], default="constant")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--s", type=int, default=5)
    p.add_argument("--d", nargs="+", type=int, default=[100])
    p.add_argument("--seed", nargs="+", type=int, default=[0])
    p.add_argument("--n-query", type=int, default=None)
    p.add_argument("--no-divergence", action="store_true",
                   help="skip the debiased Sinkhorn divergence column")
    p.add_argument("--epsilon-fraction", type=float, default=0.1)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=10_000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output", required=True, help="records CSV path")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARTIFACT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
