"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
Set ``HYPERDIFFUSE_LOG`` (e.g. ``DEBUG``) to change the log level.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .diffusion import diffusion_distance, embedding
from .errors import (
    ConfigError,
    DataError,
    DegenerateFeatures,
    HypergraphError,
    NonFiniteRho,
    SizeCapExceeded,
)
from .experiment import (
    build_operator,
    load_config,
    load_dataset,
    run_kernel,
    run_spectrum,
    run_stability,
    run_sweep_depth,
    run_train,
)
from .hypergraph import build_knn_hypergraph, validate
from .io import read_features, read_hypergraph, write_hypergraph
from .model import load_checkpoint
from .synthetic import write_planted_dataset

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4

log = logging.getLogger("hyperdiffuse")


def _config(args):
    if not args.config:
        raise ConfigError("--config is required for this command")
    overrides = {
        "out_dir": str(Path(args.out_dir).resolve()) if args.out_dir else None,
        "seeds": [args.seed] if args.seed is not None else None,
        "threads": args.threads,
        "dense_cap": args.dense_cap,
    }
    return load_config(args.config, overrides)


def cmd_train(args) -> int:
    cfg = _config(args)
    records = run_train(cfg)
    for rec in records:
        print(f"{rec.config_hash}  mean={rec.mean:.4f}  std={rec.std:.4f}  splits={len(rec.splits)}")
    return 0


def cmd_sweep_depth(args) -> int:
    cfg = _config(args)
    steps = args.t or cfg.steps
    for row in run_sweep_depth(cfg, steps):
        print(f"t={row['t']:<4d} mean={row['mean_accuracy']:.4f} std={row['std_accuracy']:.4f}")
    return 0


def cmd_stability(args) -> int:
    cfg = _config(args)
    report = run_stability(cfg, checkpoint=args.checkpoint)
    print(json.dumps({k: report[k] for k in ("C_alpha_beta_L", "L_M", "G_M", "S_M", "mu", "all_lemmas_ok")}))
    return 0


def cmd_spectrum(args) -> int:
    cfg = _config(args)
    thresholds = args.thresholds if args.thresholds else [0.1 * j for j in range(10)]
    for row in run_spectrum(cfg, thresholds):
        print(f"{row['threshold']:g},{row['count']}")
    return 0


def cmd_kernel(args) -> int:
    cfg = _config(args)
    if args.distance:
        data = load_dataset(cfg)
        op = build_operator(cfg, data, cfg.first_point())
        theta = load_checkpoint(args.checkpoint)[0].theta if args.checkpoint else None
        Phi = embedding(op, data.features, theta)
        i, j = args.distance
        print(repr(diffusion_distance(op, data.features, i, j, Phi=Phi)))
        return 0
    out = args.out or Path(cfg.out_dir) / "kernel.csv"
    K = run_kernel(cfg, out, checkpoint=args.checkpoint)
    print(f"wrote {K.shape[0]}x{K.shape[1]} kernel to {out}")
    return 0


def cmd_knn(args) -> int:
    X = read_features(args.features)
    h = build_knn_hypergraph(X, args.k, args.gamma)
    write_hypergraph(h, args.out)
    print(f"wrote {h.num_edges} hyperedges on {h.num_vertices} vertices to {args.out}")
    return 0


def cmd_validate(args) -> int:
    stats = validate(read_hypergraph(args.hypergraph))
    print(json.dumps({
        "E": stats.max_edge_size,
        "D": stats.max_vertex_degree,
        "num_isolated": stats.num_isolated,
        "isolated": list(stats.isolated),
    }))
    return 0


def cmd_planted(args) -> int:
    path = write_planted_dataset(args.directory, n_splits=args.splits, seed=args.seed or 0)
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--seed", type=int, help="override the config's seed list with one seed")
    common.add_argument("--out-dir", help="override the config's output directory")
    common.add_argument("--threads", type=int, help="worker threads for grid points and splits")
    common.add_argument("--dense-cap", type=int, help="largest N for dense N x N matrices")

    p = argparse.ArgumentParser(prog="hyperdiffuse", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("train", parents=[common], help="grid search over all splits")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("sweep-depth", parents=[common], help="accuracy against diffusion steps")
    s.add_argument("--t", type=int, nargs="+", help="diffusion steps (default: the config's steps grid)")
    s.set_defaults(func=cmd_sweep_depth)

    s = sub.add_parser("stability", parents=[common], help="stability constants and lemma checks")
    s.add_argument("--checkpoint", help="use a saved model instead of training")
    s.set_defaults(func=cmd_stability)

    s = sub.add_parser("spectrum", parents=[common], help="eigenvalue counts of the diffusion operator")
    s.add_argument("--thresholds", type=float, nargs="+")
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("kernel", parents=[common], help="write the kernel matrix or query a distance")
    s.add_argument("--out", type=Path, help="kernel CSV path (default: <out-dir>/kernel.csv)")
    s.add_argument("--checkpoint", help="model whose channel-mixing weights define the learnable kernel")
    s.add_argument("--distance", type=int, nargs=2, metavar=("I", "J"), help="print the distance between two vertices")
    s.set_defaults(func=cmd_kernel)

    s = sub.add_parser("knn", parents=[common], help="build a kNN hypergraph from features")
    s.add_argument("features")
    s.add_argument("--k", type=int, default=6)
    s.add_argument("--gamma", type=float, default=1.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_knn)

    s = sub.add_parser("validate", parents=[common], help="structural statistics of a hypergraph file")
    s.add_argument("hypergraph")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("planted", parents=[common], help="write a synthetic planted dataset and config")
    s.add_argument("directory")
    s.add_argument("--splits", type=int, default=3)
    s.set_defaults(func=cmd_planted)
    return p


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("HYPERDIFFUSE_LOG", "WARNING").upper(),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, HypergraphError, DegenerateFeatures, SizeCapExceeded) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NonFiniteRho, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
