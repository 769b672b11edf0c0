"""Hypergraph data model with edge-dependent vertex weights.

A hypergraph on ``N`` vertices is stored as a sparse vertex-by-edge weight
matrix ``Q`` (column ``e`` lists the members of hyperedge ``e`` with their
weights ``Q(v, e)``) plus a vector of prior hyperedge weights ``w``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.spatial.distance import cdist, pdist

from .errors import (
    DegenerateFeatures,
    DuplicateVertex,
    EmptyHyperedge,
    HypergraphError,
    IndexOutOfRange,
    VertexCountMismatch,
    WeightOutOfRange,
)

# above this many unordered pairs the mean distance is estimated from a sample
MAX_EXACT_PAIRS = 1_000_000
_PAIR_SAMPLE_SEED = 0


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class Hypergraph:
    """Immutable weighted hypergraph.

    Parameters
    ----------
    num_vertices : int
        Number of vertices ``N``.
    hyperedges : sequence of sequences
        Each hyperedge is a sequence of ``(vertex, weight)`` pairs, or of bare
        vertex indices (weight 1).
    edge_weights : sequence of float, optional
        Prior weight ``w(e)`` of each hyperedge, default all ones.
    """

    __slots__ = ("num_vertices", "indptr", "indices", "weights", "edge_weights")

    def __init__(self, num_vertices: int, hyperedges: Iterable[Sequence] = (), edge_weights=None):
        indptr = [0]
        indices: list[int] = []
        weights: list[float] = []
        for edge in hyperedges:
            for item in edge:
                if isinstance(item, (tuple, list)):
                    v, q = item
                else:
                    v, q = item, 1.0
                indices.append(int(v))
                weights.append(float(q))
            indptr.append(len(indices))
        self._init_arrays(
            num_vertices,
            np.asarray(indptr, dtype=np.int64),
            np.asarray(indices, dtype=np.int64),
            np.asarray(weights, dtype=np.float64),
            edge_weights,
        )

    @classmethod
    def from_arrays(cls, num_vertices, indptr, indices, weights, edge_weights=None) -> "Hypergraph":
        """Build directly from CSC-style arrays (``indptr`` has length M + 1)."""
        h = cls.__new__(cls)
        h._init_arrays(
            num_vertices,
            np.array(indptr, dtype=np.int64),
            np.array(indices, dtype=np.int64),
            np.array(weights, dtype=np.float64),
            edge_weights,
        )
        return h

    @classmethod
    def from_incidence(cls, Q, edge_weights=None) -> "Hypergraph":
        """Build from a dense or sparse N x M weight matrix; zero entries are non-members."""
        Q = sparse.csc_matrix(Q, dtype=np.float64)
        Q.eliminate_zeros()
        Q.sort_indices()
        return cls.from_arrays(Q.shape[0], Q.indptr, Q.indices, Q.data, edge_weights)

    def _init_arrays(self, num_vertices, indptr, indices, weights, edge_weights):
        n = int(num_vertices)
        if n < 1:
            raise HypergraphError(f"num_vertices must be positive, got {num_vertices}")
        m = len(indptr) - 1
        if edge_weights is None:
            edge_weights = np.ones(m)
        edge_weights = np.array(edge_weights, dtype=np.float64).reshape(-1)
        if edge_weights.shape[0] != m:
            raise HypergraphError(f"{edge_weights.shape[0]} edge weights for {m} hyperedges")
        self.num_vertices = n
        self.indptr = _readonly(indptr)
        self.indices = _readonly(indices)
        self.weights = _readonly(weights)
        self.edge_weights = _readonly(edge_weights)
        _check_invariants(self)

    # ------------------------------------------------------------------ views
    @property
    def num_edges(self) -> int:
        return len(self.indptr) - 1

    @property
    def hyperedges(self) -> list[list[tuple[int, float]]]:
        return [
            list(zip(self.indices[a:b].tolist(), self.weights[a:b].tolist()))
            for a, b in zip(self.indptr[:-1], self.indptr[1:])
        ]

    def edge(self, e: int) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.indptr[e], self.indptr[e + 1]
        return self.indices[a:b], self.weights[a:b]

    def edge_sizes(self) -> np.ndarray:
        return np.diff(self.indptr)

    def vertex_edge_counts(self) -> np.ndarray:
        return np.bincount(self.indices, minlength=self.num_vertices)

    def incidence(self) -> sparse.csc_matrix:
        """The N x M matrix ``Q`` as scipy CSC."""
        return sparse.csc_matrix(
            (self.weights, self.indices, self.indptr), shape=(self.num_vertices, self.num_edges), copy=True
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Hypergraph):
            return NotImplemented
        return (
            self.num_vertices == other.num_vertices
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.edge_weights, other.edge_weights)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"Hypergraph(num_vertices={self.num_vertices}, num_edges={self.num_edges})"


@dataclass(frozen=True)
class HypergraphStats:
    max_edge_size: int  # E
    max_vertex_degree: int  # D
    isolated: tuple[int, ...]

    @property
    def num_isolated(self) -> int:
        return len(self.isolated)


def _check_invariants(h: Hypergraph) -> None:
    n = h.num_vertices
    if h.indptr[0] != 0 or np.any(np.diff(h.indptr) < 0) or h.indptr[-1] != len(h.indices):
        raise HypergraphError("malformed edge pointer array")
    if len(h.weights) != len(h.indices):
        raise HypergraphError("vertex and weight arrays differ in length")
    sizes = np.diff(h.indptr)
    if np.any(sizes == 0):
        raise EmptyHyperedge(f"hyperedge {int(np.flatnonzero(sizes == 0)[0])} is empty")
    if len(h.indices) and (h.indices.min() < 0 or h.indices.max() >= n):
        bad = h.indices[(h.indices < 0) | (h.indices >= n)][0]
        raise IndexOutOfRange(f"vertex index {int(bad)} outside [0, {n})")
    edge_id = np.repeat(np.arange(h.num_edges), sizes)
    order = np.lexsort((h.indices, edge_id))
    dup = (np.diff(edge_id[order]) == 0) & (np.diff(h.indices[order]) == 0)
    if np.any(dup):
        e = int(edge_id[order][np.flatnonzero(dup)[0]])
        raise DuplicateVertex(f"hyperedge {e} lists a vertex more than once")
    if not np.all(np.isfinite(h.weights)) or np.any((h.weights < 0) | (h.weights > 1)):
        raise WeightOutOfRange("vertex weights Q(v, e) must lie in [0, 1]")
    if not np.all(np.isfinite(h.edge_weights)) or np.any((h.edge_weights < 0) | (h.edge_weights > 1)):
        raise WeightOutOfRange("hyperedge weights w(e) must lie in [0, 1]")


def validate(h: Hypergraph) -> HypergraphStats:
    """Re-check the structural invariants and return ``E``, ``D`` and isolated vertices."""
    _check_invariants(h)
    sizes = h.edge_sizes()
    counts = h.vertex_edge_counts()
    return HypergraphStats(
        max_edge_size=int(sizes.max()) if len(sizes) else 0,
        max_vertex_degree=int(counts.max()) if len(counts) else 0,
        isolated=tuple(int(v) for v in np.flatnonzero(counts == 0)),
    )


def mean_pairwise_distance(X: np.ndarray, max_pairs: int = MAX_EXACT_PAIRS) -> float:
    """Mean Euclidean distance over unordered pairs of rows.

    Exact up to ``max_pairs`` pairs; above that a fixed-seed sample of
    ``max_pairs`` pairs is used.
    """
    n = X.shape[0]
    total = n * (n - 1) // 2
    if total == 0:
        return 0.0
    if total <= max_pairs:
        return float(pdist(X).mean())
    rng = np.random.default_rng(_PAIR_SAMPLE_SEED)
    i = rng.integers(0, n, size=max_pairs)
    j = rng.integers(0, n - 1, size=max_pairs)
    j = j + (j >= i)  # uniform over j != i
    return float(np.sqrt(((X[i] - X[j]) ** 2).sum(axis=1)).mean())


def build_knn_hypergraph(X, k: int = 6, gamma: float = 1.0, chunk_size: int = 1024) -> Hypergraph:
    """One hyperedge per centroid: the centroid and its ``k`` nearest neighbours.

    Member weights are ``exp(-d(v, v_c) / (gamma * dbar**2))`` with ``d`` the
    Euclidean feature distance and ``dbar`` the mean pairwise distance.
    Distance ties are broken by ascending vertex index.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("features must be a 2-D array")
    n = X.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < N, got k={k}, N={n}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite values")
    dbar = mean_pairwise_distance(X)
    if dbar == 0.0:
        raise DegenerateFeatures("all pairwise feature distances are zero")
    scale = gamma * dbar**2
    tiny = np.finfo(np.float64).tiny

    indices = np.empty((n, k + 1), dtype=np.int64)
    weights = np.empty((n, k + 1), dtype=np.float64)
    for start in range(0, n, chunk_size):
        stop = min(start + chunk_size, n)
        D = cdist(X[start:stop], X)
        rows = np.arange(stop - start)
        centroids = np.arange(start, stop)
        D[rows, centroids] = np.inf  # centroid is added explicitly below
        order = np.argsort(D, axis=1, kind="stable")[:, :k]
        dist = np.take_along_axis(D, order, axis=1)
        indices[start:stop, 0] = centroids
        indices[start:stop, 1:] = order
        weights[start:stop, 0] = 1.0
        weights[start:stop, 1:] = np.clip(np.exp(-dist / scale), tiny, 1.0)

    indptr = np.arange(0, n * (k + 1) + 1, k + 1)
    return Hypergraph.from_arrays(n, indptr, indices.ravel(), weights.ravel())


def concat_multimodal(hs: Sequence[Hypergraph]) -> Hypergraph:
    """Concatenate the hyperedge lists of several hypergraphs on the same vertices."""
    hs = list(hs)
    if not hs:
        raise ValueError("need at least one hypergraph")
    n = hs[0].num_vertices
    for h in hs[1:]:
        if h.num_vertices != n:
            raise VertexCountMismatch(f"vertex counts differ: {n} vs {h.num_vertices}")
    offsets = np.cumsum([0] + [len(h.indices) for h in hs[:-1]])
    indptr = np.concatenate([[0]] + [h.indptr[1:] + off for h, off in zip(hs, offsets)])
    return Hypergraph.from_arrays(
        n,
        indptr,
        np.concatenate([h.indices for h in hs]),
        np.concatenate([h.weights for h in hs]),
        np.concatenate([h.edge_weights for h in hs]),
    )
