"""Experiment orchestration: config loading, grid search over splits, sweeps and reports."""
from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analysis import (
    TheoryConstants,
    max_row_norm,
    spectral_norm,
    spectrum_histogram,
    stability_report,
    verify_lemma_bounds,
)
from .diffusion import DEFAULT_DENSE_CAP, DiffusionOperator, DiffusionParams, apply_diffusion, kernel_matrix
from .errors import ConfigError, DataError
from .hypergraph import Hypergraph
from .io import read_features, read_hypergraph, read_labels, read_splits, write_matrix_csv, write_rows_csv
from .model import TrainConfig, TrainResult, fit, init_params, load_checkpoint, save_checkpoint
from .transition import RhoFunction, build_transition, l1_norm

log = logging.getLogger(__name__)

# search ranges used when a config omits a grid
DEFAULT_GRID = {
    "alpha": [1.0, 0.97, 0.95, 0.9, 0.85, 0.8, 0.75, 0.7, 0.65, 0.6],
    "beta": [1.0, 0.95, 0.9, 0.85, 0.8],
    "steps": [2, 4, 6, 8, 16, 32, 64],
    "sigma": [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0],
    "learning_rate": [0.001, 0.005, 0.01],
    "weight_decay": [1e-3, 1e-4, 5e-4, 1e-5],
    "hidden": [128],
}
GRID_KEYS = tuple(DEFAULT_GRID)
DIFFUSION_KEYS = ("alpha", "beta", "steps", "sigma")


@dataclass
class ExperimentConfig:
    hypergraph: Path
    features: Path
    labels: Path
    splits_dir: Path
    alpha: list = field(default_factory=lambda: list(DEFAULT_GRID["alpha"]))
    beta: list = field(default_factory=lambda: list(DEFAULT_GRID["beta"]))
    steps: list = field(default_factory=lambda: list(DEFAULT_GRID["steps"]))
    sigma: list = field(default_factory=lambda: list(DEFAULT_GRID["sigma"]))
    learning_rate: list = field(default_factory=lambda: list(DEFAULT_GRID["learning_rate"]))
    weight_decay: list = field(default_factory=lambda: list(DEFAULT_GRID["weight_decay"]))
    hidden: list = field(default_factory=lambda: list(DEFAULT_GRID["hidden"]))
    epochs: int = 1000
    patience: int = 100
    seeds: list = field(default_factory=lambda: [0])
    out_dir: Path = Path("results")
    renormalize: bool = True
    optimizer: str = "adam"
    val_fraction: float = 0.2
    threads: int = 1
    dense_cap: int = DEFAULT_DENSE_CAP
    delta: float = 0.05
    save_models: bool = False
    source_digest: str = ""

    @classmethod
    def from_dict(cls, raw: dict, base_dir=".") -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        missing = [k for k in ("hypergraph", "features", "labels", "splits_dir") if k not in raw]
        if missing:
            raise ConfigError(f"config is missing {missing}")
        base = Path(base_dir)
        data = dict(raw)
        for key in ("hypergraph", "features", "labels", "splits_dir", "out_dir"):
            if key in data:
                p = Path(data[key])
                data[key] = p if p.is_absolute() else base / p
        for key in GRID_KEYS + ("seeds",):
            if key in data:
                v = data[key]
                data[key] = list(v) if isinstance(v, (list, tuple)) else [v]
                if not data[key]:
                    raise ConfigError(f"grid {key!r} is empty")
        cfg = cls(**data)
        cfg.source_digest = hashlib.sha1(json.dumps(raw, sort_keys=True).encode()).hexdigest()[:12]
        if cfg.patience > cfg.epochs:
            raise ConfigError("patience must not exceed epochs")
        return cfg

    def grid(self, override: Optional[dict] = None) -> list[dict]:
        """Cartesian product of the grids; ``override`` replaces individual lists."""
        lists = {k: getattr(self, k) for k in GRID_KEYS}
        lists["seed"] = self.seeds
        lists.update(override or {})
        keys = list(lists)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(lists[k] for k in keys))]

    def first_point(self) -> dict:
        return self.grid({k: [getattr(self, k)[0]] for k in GRID_KEYS} | {"seed": [self.seeds[0]]})[0]

    def train_config(self, point: dict) -> TrainConfig:
        try:
            return TrainConfig(
                learning_rate=float(point["learning_rate"]),
                weight_decay=float(point["weight_decay"]),
                hidden_dim=int(point["hidden"]),
                epochs=int(self.epochs),
                patience=int(self.patience),
                seed=int(point["seed"]),
                diffusion=DiffusionParams(float(point["alpha"]), float(point["beta"]), int(point["steps"])),
                sigma=float(point["sigma"]),
                renormalize=bool(self.renormalize),
                optimizer=self.optimizer,
                val_fraction=float(self.val_fraction),
            )
        except ValueError as exc:
            raise ConfigError(f"invalid grid point {point}: {exc}") from exc


def load_config(path, overrides: Optional[dict] = None) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ExperimentConfig.from_dict(raw, path.parent)


@dataclass
class Dataset:
    hypergraph: Hypergraph
    features: np.ndarray
    labels: np.ndarray
    splits: list[tuple[str, np.ndarray]]

    def test_indices(self, train_idx) -> np.ndarray:
        mask = self.labels >= 0
        mask[np.asarray(train_idx, dtype=np.int64)] = False
        return np.flatnonzero(mask)


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    h = read_hypergraph(cfg.hypergraph)
    X = read_features(cfg.features)
    if X.shape[0] != h.num_vertices:
        raise DataError(f"{cfg.features}: {X.shape[0]} feature rows for {h.num_vertices} vertices")
    labels = read_labels(cfg.labels, h.num_vertices)
    splits = read_splits(cfg.splits_dir)
    for name, idx in splits:
        if idx.size == 0 or idx.min() < 0 or idx.max() >= h.num_vertices:
            raise DataError(f"split {name}: indices outside [0, {h.num_vertices})")
        if np.any(labels[idx] < 0):
            raise DataError(f"split {name}: training vertices without labels")
    return Dataset(h, X, labels, splits)


# ---------------------------------------------------------------- records
def provenance(cfg: ExperimentConfig) -> str:
    return f"hyperdiffuse-{__version__}+cfg.{cfg.source_digest} numpy-{np.__version__}"


@dataclass
class RunRecord:
    config_hash: str
    config: dict
    splits: list[dict]  # name, test_accuracy, best_epoch, epochs_run, wall_time, mean_epoch_seconds
    mean: float
    std: float
    provenance: str = ""

    @classmethod
    def build(cls, config_hash: str, config: dict, splits: list[dict], provenance: str = "") -> "RunRecord":
        mean, std = _mean_std([s["test_accuracy"] for s in splits])
        return cls(config_hash, config, splits, mean, std, provenance)

    def check(self) -> None:
        """Recompute mean/std from the stored per-split values."""
        mean, std = _mean_std([s["test_accuracy"] for s in self.splits])
        if not (_same(mean, self.mean) and _same(std, self.std)):
            raise DataError(f"run record {self.config_hash}: stored mean/std disagree with split values")

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "config": self.config,
            "splits": self.splits,
            "mean": self.mean,
            "std": self.std,
            "provenance": self.provenance,
        }

    def save(self, path) -> None:
        self.check()
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "RunRecord":
        d = json.loads(Path(path).read_text())
        rec = cls(d["config_hash"], d["config"], d["splits"], d["mean"], d["std"], d.get("provenance", ""))
        rec.check()
        return rec


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    a = np.asarray(values, dtype=np.float64)
    return float(a.mean()), float(a.std())


def _same(a: float, b: float) -> bool:
    return (math.isnan(a) and math.isnan(b)) or math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-15)


# ------------------------------------------------------------- execution
class _FeatureCache:
    """Diffused features keyed by diffusion setting; computed once, shared read-only."""

    def __init__(self, data: Dataset, renormalize: bool):
        self.data = data
        self.renormalize = renormalize
        self._cache: dict[tuple, np.ndarray] = {}
        self._transitions: dict[float, object] = {}
        self._lock = threading.Lock()

    def get(self, alpha, beta, steps, sigma) -> np.ndarray:
        key = (float(alpha), float(beta), int(steps), float(sigma))
        with self._lock:
            if key not in self._cache:
                T = self._transitions.get(key[3])
                if T is None:
                    T = build_transition(self.data.hypergraph, RhoFunction(key[3]), self.renormalize)
                    self._transitions[key[3]] = T
                op = DiffusionOperator(DiffusionParams(*key[:3]), T)
                self._cache[key] = apply_diffusion(op, self.data.features)
            return self._cache[key]

    def drop(self, alpha, beta, steps, sigma) -> None:
        with self._lock:
            self._cache.pop((float(alpha), float(beta), int(steps), float(sigma)), None)


def _run_points(cfg: ExperimentConfig, data: Dataset, points: list[dict]) -> dict[str, tuple[dict, list[TrainResult]]]:
    """Train every grid point on every split, grouped by diffusion setting."""
    cache = _FeatureCache(data, cfg.renormalize)
    results: dict[str, tuple[dict, list]] = {}
    by_diffusion: dict[tuple, list[dict]] = {}
    for p in points:
        by_diffusion.setdefault(tuple(p[k] for k in DIFFUSION_KEYS), []).append(p)

    def task(point, split_pos):
        tc = cfg.train_config(point)
        S = cache.get(*(point[k] for k in DIFFUSION_KEYS))
        name, train_idx = data.splits[split_pos]
        res = fit(S, data.labels, train_idx, data.test_indices(train_idx), tc,
                  num_classes=int(data.labels.max()) + 1)
        return tc.digest(), split_pos, res

    with ThreadPoolExecutor(max_workers=max(1, int(cfg.threads))) as pool:
        for dkey, group in by_diffusion.items():
            for p in group:
                results[cfg.train_config(p).digest()] = (p, [None] * len(data.splits))
            jobs = [pool.submit(task, p, s) for p in group for s in range(len(data.splits))]
            for job in jobs:
                digest, split_pos, res = job.result()
                results[digest][1][split_pos] = res
            cache.drop(*dkey)
    return results


def _split_summary(name: str, res: TrainResult) -> dict:
    secs = [h["seconds"] for h in res.history]
    return {
        "name": name,
        "test_accuracy": res.test_accuracy,
        "best_epoch": res.best_epoch,
        "epochs_run": res.epochs_run,
        "wall_time": res.wall_time,
        "mean_epoch_seconds": float(np.mean(secs)) if secs else 0.0,
    }


HISTORY_COLUMNS = ["epoch", "train_loss", "train_acc", "val_loss", "val_acc", "seconds"]


def run_train(cfg: ExperimentConfig, data: Optional[Dataset] = None) -> list[RunRecord]:
    """Grid x splits training; writes one RunRecord JSON per grid point plus per-epoch CSVs."""
    data = data or load_dataset(cfg)
    out = Path(cfg.out_dir)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    (out / "metrics").mkdir(parents=True, exist_ok=True)
    results = _run_points(cfg, data, cfg.grid())
    records, summary = [], []
    for digest, (point, per_split) in results.items():
        tc = cfg.train_config(point)
        for (name, _), res in zip(data.splits, per_split):
            write_rows_csv(res.history, out / "metrics" / f"{digest}_{name}.csv", HISTORY_COLUMNS)
            if cfg.save_models:
                (out / "models").mkdir(exist_ok=True)
                save_checkpoint(res.model, out / "models" / f"{digest}_{name}", tc.seed, digest)
        rec = RunRecord.build(
            digest,
            tc.to_dict(),
            [_split_summary(name, res) for (name, _), res in zip(data.splits, per_split)],
            provenance(cfg),
        )
        rec.save(out / "runs" / f"{digest}.json")
        records.append(rec)
        summary.append({"config_hash": digest, **point, "mean": rec.mean, "std": rec.std,
                        "n_splits": len(per_split)})
    write_rows_csv(summary, out / "summary.csv")
    log.info("wrote %d run records to %s", len(records), out)
    return records


def run_sweep_depth(cfg: ExperimentConfig, steps: Sequence[int], data: Optional[Dataset] = None) -> list[dict]:
    """Accuracy against diffusion steps at the first value of every other grid."""
    data = data or load_dataset(cfg)
    base = cfg.first_point()
    points = [dict(base, steps=int(t)) for t in steps]
    results = _run_points(cfg, data, points)
    rows = []
    for p in points:
        _, per_split = results[cfg.train_config(p).digest()]
        mean, std = _mean_std([r.test_accuracy for r in per_split])
        rows.append({"t": int(p["steps"]), "mean_accuracy": mean, "std_accuracy": std, "n_splits": len(per_split)})
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_rows_csv(rows, out / "sweep_depth.csv")
    return rows


def build_operator(cfg: ExperimentConfig, data: Dataset, point: dict) -> DiffusionOperator:
    T = build_transition(data.hypergraph, RhoFunction(float(point["sigma"])), cfg.renormalize)
    params = DiffusionParams(float(point["alpha"]), float(point["beta"]), int(point["steps"]))
    return DiffusionOperator(params, T, dense_cap=int(cfg.dense_cap))


def run_stability(cfg: ExperimentConfig, checkpoint=None, data: Optional[Dataset] = None) -> dict:
    """Train (or load) one model at the first grid point on the first split and report its bounds."""
    data = data or load_dataset(cfg)
    point = cfg.first_point()
    op = build_operator(cfg, data, point)
    name, train_idx = data.splits[0]
    test_idx = data.test_indices(train_idx)
    S = apply_diffusion(op, data.features)
    lr = float(point["learning_rate"])
    num_classes = int(data.labels.max()) + 1
    if checkpoint is not None:
        model, _ = load_checkpoint(checkpoint)
        steps_run, m = int(cfg.epochs), len(train_idx)
        initial = None
    elif lr == 0:
        # no learning: parameters stay at their initialization
        model = init_params(int(point["seed"]), S.shape[1], int(point["hidden"]), num_classes)
        steps_run, m, initial = int(cfg.epochs), len(train_idx), None
    else:
        tc = cfg.train_config(point)
        res = fit(S, data.labels, train_idx, test_idx, tc, num_classes=num_classes)
        model, steps_run, m = res.model, res.epochs_run, len(res.train_idx)
        initial = init_params(tc.seed, S.shape[1], tc.hidden_dim, num_classes).theta

    d_T = op.transition.l1_bound
    if d_T is None:
        d_T = l1_norm(op.transition)  # no a-priori bound without renormalization
    lemma = verify_lemma_bounds(op, data.features, model, data.labels, train_idx, theta_tilde=initial, d_T=d_T)
    consts = TheoryConstants(
        C_x=max_row_norm(data.features),
        C_theta=spectral_norm(model.theta),
        d_T=d_T,
        alpha=op.params.alpha,
        beta=op.params.beta,
        L=op.params.steps,
        eta=lr,
        T_steps=max(1, steps_run),
        m=max(1, m),
        n=max(1, len(test_idx)),
        kappa=lemma.constants["kappa"],
    )
    report = stability_report(consts, cfg.delta)
    report.empirical_h_max = lemma.empirical_h_max
    report.empirical_l1 = lemma.empirical_l1
    report.lemma_checks = lemma.lemma_checks
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    d = report.to_dict()
    d["split"] = name
    d["grid_point"] = point
    (out / "stability.json").write_text(json.dumps(d, indent=2) + "\n")
    return d


def run_spectrum(cfg: ExperimentConfig, thresholds: Sequence[float], data: Optional[Dataset] = None) -> list[dict]:
    data = data or load_dataset(cfg)
    op = build_operator(cfg, data, cfg.first_point())
    counts = spectrum_histogram(op, thresholds)
    rows = [{"threshold": float(t), "count": c} for t, c in zip(thresholds, counts)]
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_rows_csv(rows, out / "spectrum.csv")
    return rows


def run_kernel(cfg: ExperimentConfig, out_path, checkpoint=None, data: Optional[Dataset] = None) -> np.ndarray:
    data = data or load_dataset(cfg)
    op = build_operator(cfg, data, cfg.first_point())
    theta = load_checkpoint(checkpoint)[0].theta if checkpoint is not None else None
    K = kernel_matrix(op, data.features, theta)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(K.values, out_path)
    return K.values

