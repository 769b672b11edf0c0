"""Planted-partition hypergraphs for smoke tests and demos."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .hypergraph import Hypergraph
from .io import write_hypergraph, write_labels, write_matrix_csv, write_split


def planted_hypergraph(
    n_blocks: int = 2,
    block_size: int = 50,
    edges_per_block: int = 100,
    edge_size: int = 3,
    num_features: int = 8,
    noise: float = 0.5,
    seed: int = 0,
) -> tuple[Hypergraph, np.ndarray, np.ndarray]:
    """Blocks of vertices joined only by intra-block hyperedges.

    Features are a one-hot block indicator (padded to ``num_features``
    columns) plus isotropic Gaussian noise. Returns ``(h, X, labels)``.
    """
    if num_features < n_blocks:
        raise ValueError("num_features must be at least n_blocks")
    rng = np.random.default_rng(seed)
    n = n_blocks * block_size
    labels = np.repeat(np.arange(n_blocks), block_size)
    edges = []
    for b in range(n_blocks):
        members = np.arange(b * block_size, (b + 1) * block_size)
        # a chain through the block keeps it connected
        for start in range(0, block_size - 1, edge_size - 1):
            chunk = members[start : start + edge_size]
            if len(chunk) > 1:
                edges.append(chunk.tolist())
        for _ in range(edges_per_block):
            edges.append(np.sort(rng.choice(members, size=edge_size, replace=False)).tolist())
    X = np.zeros((n, num_features))
    X[np.arange(n), labels] = 1.0
    X += noise * rng.standard_normal(X.shape)
    return Hypergraph(n, edges), X, labels


def planted_splits(labels, per_class: int, n_splits: int, seed: int = 0) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    labels = np.asarray(labels)
    splits = []
    for _ in range(n_splits):
        idx = [rng.choice(np.flatnonzero(labels == c), size=per_class, replace=False) for c in np.unique(labels)]
        splits.append(np.sort(np.concatenate(idx)))
    return splits


def write_planted_dataset(directory, n_splits: int = 3, per_class: int = 10, seed: int = 0, **kwargs) -> Path:
    """Write a planted dataset plus a ready-to-run ``config.json``; returns the config path."""
    d = Path(directory)
    (d / "splits").mkdir(parents=True, exist_ok=True)
    h, X, labels = planted_hypergraph(seed=seed, **kwargs)
    write_hypergraph(h, d / "hypergraph.txt")
    write_matrix_csv(X, d / "features.csv")
    write_labels(labels, d / "labels.csv")
    for k, split in enumerate(planted_splits(labels, per_class, n_splits, seed)):
        write_split(split, d / "splits" / f"split_{k:02d}.txt")
    config = {
        "hypergraph": "hypergraph.txt",
        "features": "features.csv",
        "labels": "labels.csv",
        "splits_dir": "splits",
        "alpha": [0.95],
        "beta": [0.9],
        "steps": [4],
        "sigma": [0.0],
        "learning_rate": [0.01],
        "weight_decay": [5e-4],
        "hidden": [32],
        "epochs": 200,
        "patience": 50,
        "seeds": [0],
        "out_dir": "results",
    }
    path = d / "config.json"
    path.write_text(json.dumps(config, indent=2) + "\n")
    return path
