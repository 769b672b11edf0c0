"""SHKC: one rectified diffusion-kernel layer followed by a linear classifier.

Hidden representations are ``H = relu(S @ Theta)`` where ``S = A(t) @ X`` is
computed once per diffusion setting. Because ``Theta`` never interacts with
the transition matrix, gradients only pass through two dense layers and are
computed analytically here.
"""
from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .diffusion import DiffusionOperator, DiffusionParams, apply_diffusion
from .errors import EmptyMask, HyperdiffuseError
from .hypergraph import Hypergraph
from .transition import RhoFunction, build_transition

log = logging.getLogger(__name__)

UNLABELED = -1


class ShapeMismatch(HyperdiffuseError, ValueError):
    pass


@dataclass
class ShkcModel:
    theta: np.ndarray  # d x M
    classifier: np.ndarray  # M x C
    bias: np.ndarray  # C

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        self.classifier = np.asarray(self.classifier, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if self.theta.ndim != 2 or self.classifier.ndim != 2:
            raise ShapeMismatch("theta and classifier must be 2-D")
        if self.theta.shape[1] != self.classifier.shape[0]:
            raise ShapeMismatch(f"theta {self.theta.shape} and classifier {self.classifier.shape} disagree on M")
        if self.bias.shape[0] != self.classifier.shape[1]:
            raise ShapeMismatch(f"bias has {self.bias.shape[0]} entries for {self.classifier.shape[1]} classes")

    @property
    def in_dim(self) -> int:
        return self.theta.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.theta.shape[1]

    @property
    def num_outputs(self) -> int:
        return self.classifier.shape[1]

    def copy(self) -> "ShkcModel":
        return ShkcModel(self.theta.copy(), self.classifier.copy(), self.bias.copy())

    def params(self) -> list[np.ndarray]:
        return [self.theta, self.classifier, self.bias]


def init_params(seed: int, d: int, M: int, C: int) -> ShkcModel:
    """Glorot-uniform weights, zero bias."""
    for name, v in (("d", d), ("M", M), ("C", C)):
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v}")
    rng = np.random.default_rng(seed)
    a1 = np.sqrt(6.0 / (d + M))
    a2 = np.sqrt(6.0 / (M + C))
    theta = rng.uniform(-a1, a1, size=(d, M))
    classifier = rng.uniform(-a2, a2, size=(M, C))
    return ShkcModel(theta, classifier, np.zeros(C))


def relu(x):
    return np.maximum(x, 0.0)


def sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def forward(model: ShkcModel, S) -> tuple[np.ndarray, np.ndarray]:
    """Return hidden representations and class probabilities.

    With a single output column the head is a sigmoid and ``P`` holds the
    probability of class 1; otherwise ``P`` is a row-wise softmax.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[1] != model.in_dim:
        raise ShapeMismatch(f"S has shape {S.shape}, model expects {model.in_dim} columns")
    H = relu(S @ model.theta)
    logits = H @ model.classifier + model.bias
    P = sigmoid(logits) if model.num_outputs == 1 else softmax(logits)
    return H, P


def _mask_rows(mask, n: int) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.dtype == bool:
        if mask.shape[0] != n:
            raise ShapeMismatch(f"mask of length {mask.shape[0]} for {n} vertices")
        rows = np.flatnonzero(mask)
    else:
        rows = mask.astype(np.int64).reshape(-1)
    if rows.size == 0:
        raise EmptyMask("mask selects no vertices")
    return rows


def loss_and_grads(model: ShkcModel, S, labels, mask, weight_decay: float = 0.0):
    """Mean cross-entropy over the masked vertices plus ``weight_decay/2 * (|Theta|^2 + |W|^2)``.

    Returns ``(loss, grad_theta, grad_classifier, grad_bias)``. The rectifier
    derivative at exactly zero is taken as 0.
    """
    S = np.asarray(S, dtype=np.float64)
    rows = _mask_rows(mask, S.shape[0])
    y = np.asarray(labels).reshape(-1)[rows].astype(np.int64)
    Sm = S[rows]
    m = len(rows)

    U = Sm @ model.theta
    H = relu(U)
    Z = H @ model.classifier + model.bias
    if model.num_outputs == 1:
        z = Z[:, 0]
        # softplus(z) - y z, written to avoid overflow
        data_loss = np.mean(np.maximum(z, 0) - y * z + np.log1p(np.exp(-np.abs(z))))
        dZ = (sigmoid(z) - y)[:, None] / m
    else:
        if y.min() < 0 or y.max() >= model.num_outputs:
            raise ValueError("masked labels outside [0, C)")
        logp = _log_softmax(Z)
        data_loss = -np.mean(logp[np.arange(m), y])
        dZ = np.exp(logp)
        dZ[np.arange(m), y] -= 1.0
        dZ /= m

    g_classifier = H.T @ dZ
    g_bias = dZ.sum(axis=0)
    dU = (dZ @ model.classifier.T) * (U > 0)
    g_theta = Sm.T @ dU

    loss = float(data_loss)
    if weight_decay:
        loss += 0.5 * weight_decay * (np.sum(model.theta**2) + np.sum(model.classifier**2))
        g_theta = g_theta + weight_decay * model.theta
        g_classifier = g_classifier + weight_decay * model.classifier
    return loss, g_theta, g_classifier, g_bias


def predict(model: ShkcModel, S) -> np.ndarray:
    _, P = forward(model, S)
    if model.num_outputs == 1:
        return (P[:, 0] > 0.5).astype(np.int64)
    return P.argmax(axis=1)


def accuracy(model: ShkcModel, S, labels, rows) -> float:
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        return float("nan")
    return float(np.mean(predict(model, S[rows]) == np.asarray(labels)[rows]))


class Adam:
    def __init__(self, params, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1 - self.beta1**self.t
        c2 = 1 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class SGD:
    def __init__(self, params, lr=0.01):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    hidden_dim: int = 128
    epochs: int = 1000
    patience: int = 100
    seed: int = 0
    diffusion: DiffusionParams = field(default_factory=DiffusionParams)
    sigma: float = 0.0
    renormalize: bool = True
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    val_fraction: float = 0.2

    def __post_init__(self):
        if isinstance(self.diffusion, dict):
            self.diffusion = DiffusionParams(**self.diffusion)
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.patience > self.epochs:
            raise ValueError("patience must not exceed epochs")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha1(blob).hexdigest()[:12]


@dataclass
class TrainResult:
    model: ShkcModel  # best snapshot
    best_epoch: int
    epochs_run: int
    history: list[dict]
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    test_accuracy: float
    wall_time: float


def split_validation(train_idx, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded hold-out of ``fraction`` of the training vertices for early stopping."""
    train_idx = np.asarray(train_idx, dtype=np.int64)
    if fraction == 0 or len(train_idx) < 2:
        return train_idx, np.empty(0, dtype=np.int64)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(train_idx)
    n_val = min(max(1, int(round(fraction * len(perm)))), len(perm) - 1)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def fit(S, labels, train_idx, test_idx, cfg: TrainConfig, num_classes: int | None = None) -> TrainResult:
    """Full-batch training on precomputed diffused features ``S``."""
    start = time.perf_counter()
    S = np.asarray(S, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    train_idx = np.asarray(train_idx, dtype=np.int64)
    test_idx = np.asarray(test_idx, dtype=np.int64)
    if train_idx.size == 0:
        raise EmptyMask("empty training split")
    if np.any(labels[train_idx] < 0):
        raise ValueError("training split contains unlabeled vertices")
    C = int(num_classes if num_classes is not None else labels.max() + 1)
    missing = sorted(set(range(C)) - set(labels[train_idx].tolist()))
    if missing:
        raise ValueError(f"classes {missing} have no labeled vertex in the training split")

    fit_idx, val_idx = split_validation(train_idx, cfg.val_fraction, cfg.seed)
    monitor = val_idx if val_idx.size else fit_idx
    model = init_params(cfg.seed, S.shape[1], cfg.hidden_dim, C)
    params = model.params()
    if cfg.optimizer == "adam":
        opt = Adam(params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    else:
        opt = SGD(params, cfg.learning_rate)

    best, best_loss, best_epoch, stale = model.copy(), np.inf, 0, 0
    history = []
    epoch = 0
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        loss, *grads = loss_and_grads(model, S, labels, fit_idx, cfg.weight_decay)
        opt.step(params, grads)
        val_loss = loss_and_grads(model, S, labels, monitor)[0]
        history.append(
            {
                "epoch": epoch,
                "train_loss": loss,
                "train_acc": accuracy(model, S, labels, fit_idx),
                "val_loss": val_loss,
                "val_acc": accuracy(model, S, labels, monitor),
                "seconds": time.perf_counter() - t0,
            }
        )
        if not np.isfinite(loss):
            raise FloatingPointError(f"training loss became non-finite at epoch {epoch}")
        if val_loss < best_loss:
            best, best_loss, best_epoch, stale = model.copy(), val_loss, epoch, 0
        else:
            stale += 1
            if stale >= cfg.patience:
                log.debug("early stop at epoch %d (best %d)", epoch, best_epoch)
                break

    return TrainResult(
        model=best,
        best_epoch=best_epoch,
        epochs_run=epoch,
        history=history,
        train_idx=fit_idx,
        val_idx=val_idx,
        test_idx=test_idx,
        test_accuracy=accuracy(best, S, labels, test_idx),
        wall_time=time.perf_counter() - start,
    )


def diffused_features(h: Hypergraph, X, cfg: TrainConfig) -> np.ndarray:
    T = build_transition(h, RhoFunction(cfg.sigma), cfg.renormalize)
    return apply_diffusion(DiffusionOperator(cfg.diffusion, T), X)


def train(h: Hypergraph, X, labels, train_idx, cfg: TrainConfig, test_idx=None) -> TrainResult:
    """Diffuse ``X`` over ``h`` once, then train SHKC on the given split.

    When ``test_idx`` is omitted, every labeled vertex outside ``train_idx``
    is a test vertex.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if test_idx is None:
        in_train = np.zeros(len(labels), dtype=bool)
        in_train[np.asarray(train_idx, dtype=np.int64)] = True
        test_idx = np.flatnonzero(~in_train & (labels >= 0))
    S = diffused_features(h, X, cfg)
    return fit(S, labels, train_idx, test_idx, cfg)


# -------------------------------------------------------------- checkpoints
def save_checkpoint(model: ShkcModel, path, seed: int | None = None, config_hash: str | None = None) -> None:
    """Write ``<path>.json`` (header) and ``<path>.bin`` (little-endian float64 theta, classifier, bias)."""
    path = Path(path)
    header = {
        "format": "hyperdiffuse-shkc",
        "dtype": "<f8",
        "theta": list(model.theta.shape),
        "classifier": list(model.classifier.shape),
        "bias": list(model.bias.shape),
        "seed": seed,
        "config_hash": config_hash,
    }
    path.with_suffix(".json").write_text(json.dumps(header, indent=2))
    flat = np.concatenate([p.ravel() for p in model.params()]).astype("<f8")
    path.with_suffix(".bin").write_bytes(flat.tobytes())


def load_checkpoint(path) -> tuple[ShkcModel, dict]:
    path = Path(path)
    header = json.loads(path.with_suffix(".json").read_text())
    flat = np.frombuffer(path.with_suffix(".bin").read_bytes(), dtype="<f8")
    parts = []
    offset = 0
    for key in ("theta", "classifier", "bias"):
        shape = tuple(header[key])
        size = int(np.prod(shape))
        parts.append(flat[offset : offset + size].reshape(shape).copy())
        offset += size
    if offset != flat.size:
        raise ValueError(f"checkpoint payload has {flat.size} values, header describes {offset}")
    return ShkcModel(*parts), header

