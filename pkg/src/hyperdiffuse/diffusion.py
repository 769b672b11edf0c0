"""Discounted Markov diffusion, the learnable diffusion kernel and its distances.

The diffusion operator is

    A(t) = beta * Z(t) + (1 - beta) * I,   Z(t) = (1/t) * sum_{tau=1..t} alpha**tau * T**tau

and is applied to feature matrices without ever forming a power of ``T``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, SizeCapExceeded
from .transition import TransitionMatrix

DEFAULT_DENSE_CAP = 5000


@dataclass(frozen=True)
class DiffusionParams:
    alpha: float = 1.0
    beta: float = 1.0
    steps: int = 1

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0 <= self.beta <= 1:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")


@dataclass(frozen=True)
class KernelMatrix:
    values: np.ndarray
    kind: str  # "original" | "markov" | "learnable"


def _matrix(transition):
    return transition.matrix if isinstance(transition, TransitionMatrix) else transition


@dataclass(frozen=True, eq=False)
class DiffusionOperator:
    """``A(t)`` for a fixed transition matrix and diffusion parameters."""

    params: DiffusionParams
    transition: TransitionMatrix
    dense_cap: int = DEFAULT_DENSE_CAP

    @property
    def num_vertices(self) -> int:
        return _matrix(self.transition).shape[0]

    def apply(self, X) -> np.ndarray:
        return apply_diffusion(self, X)

    def dense(self) -> np.ndarray:
        """Materialize ``A(t)`` as a dense symmetric array (subject to ``dense_cap``)."""
        n = self.num_vertices
        _check_cap(n, self.dense_cap)
        A = apply_diffusion(self, np.eye(n))
        return 0.5 * (A + A.T)


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise SizeCapExceeded(f"dense {n} x {n} matrix exceeds cap {cap}")


def apply_diffusion(op: DiffusionOperator, X) -> np.ndarray:
    """Return ``A(t) @ X`` via ``t`` sparse products, accumulating in ascending step order."""
    X = np.asarray(X, dtype=np.float64)
    T = _matrix(op.transition)
    if X.shape[0] != T.shape[0]:
        raise DimensionMismatch(f"features have {X.shape[0]} rows, operator has {T.shape[0]}")
    alpha, beta, t = op.params.alpha, op.params.beta, op.params.steps
    if beta == 0:
        return X.copy()
    P = X
    acc = np.zeros_like(X)
    for tau in range(1, t + 1):
        P = T @ P
        acc += alpha**tau * P
    return beta * (acc / t) + (1.0 - beta) * X


def projection(op: DiffusionOperator, X, Theta) -> np.ndarray:
    """Pre-activation hidden representations ``A(t) X Theta``."""
    X = np.asarray(X, dtype=np.float64)
    Theta = np.asarray(Theta, dtype=np.float64)
    if Theta.ndim != 2 or Theta.shape[0] != X.shape[1]:
        raise DimensionMismatch(f"Theta shape {Theta.shape} incompatible with {X.shape[1]} feature columns")
    return apply_diffusion(op, X) @ Theta


def embedding(op: DiffusionOperator, X, Theta=None) -> np.ndarray:
    """Rows are the kernel feature map of each vertex (diffused features, optionally mixed)."""
    if Theta is None:
        return apply_diffusion(op, X)
    return projection(op, X, Theta)


def kernel_matrix(op: DiffusionOperator, X, Theta=None) -> KernelMatrix:
    """Kernel ``Phi Phi^T`` with ``Phi = A(t) X [Theta]``.

    Without ``Theta`` this is the Markov diffusion kernel; with ``beta == 0``
    it further reduces to the plain feature kernel ``X X^T``.
    """
    X = np.asarray(X, dtype=np.float64)
    _check_cap(X.shape[0], op.dense_cap)
    Phi = embedding(op, X, Theta)
    K = Phi @ Phi.T
    K = 0.5 * (K + K.T)
    if Theta is not None:
        kind = "learnable"
    elif op.params.beta == 0:
        kind = "original"
    else:
        kind = "markov"
    return KernelMatrix(K, kind)


def diffusion_distance(op: DiffusionOperator, X, i: int, j: int, Theta=None, Phi: Optional[np.ndarray] = None) -> float:
    """Euclidean distance between the kernel embeddings of vertices ``i`` and ``j``.

    ``Phi`` may be passed to reuse a precomputed embedding.
    """
    n = op.num_vertices
    for v in (i, j):
        if not 0 <= v < n:
            raise IndexOutOfRange(f"vertex {v} outside [0, {n})")
    if Phi is None:
        Phi = embedding(op, X, Theta)
    return float(np.linalg.norm(Phi[i] - Phi[j]))

