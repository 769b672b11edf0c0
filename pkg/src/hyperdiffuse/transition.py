"""Symmetric generalized transition matrices on hypergraphs."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import io as spio
from scipy import sparse

from .errors import NonFiniteRho, ZeroDegreeWarning
from .hypergraph import Hypergraph, validate


@dataclass(frozen=True)
class RhoFunction:
    """Degree modulation ``rho(x) = x**sigma`` with ``rho(0) = 0``."""

    sigma: float = 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        pos = x > 0
        with np.errstate(over="ignore"):
            out[pos] = x[pos] ** self.sigma
        return out

    def max_value(self, edge_degrees, max_edge_size: int) -> float:
        """``rho_max`` for the l1-norm bound.

        For ``sigma >= 0`` this is the supremum over ``[0, E]``, i.e.
        ``E**sigma``. For ``sigma < 0`` the supremum over the interval is
        infinite, so the maximum over the achieved positive edge degrees is
        used instead.
        """
        if self.sigma >= 0:
            return float(max_edge_size) ** self.sigma if max_edge_size > 0 else 0.0
        deg = np.asarray(edge_degrees, dtype=np.float64)
        deg = deg[deg > 0]
        if deg.size == 0:
            return 0.0
        return float(deg.min() ** self.sigma)


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    matrix: sparse.csr_matrix
    vertex_degrees: np.ndarray
    edge_degrees: np.ndarray
    renormalized: bool
    rho: RhoFunction
    l1_bound: float | None = None  # sqrt(1 + rho_max E D), renormalized form only

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def __matmul__(self, other):
        return self.matrix @ other

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def build_transition(h: Hypergraph, rho: RhoFunction | None = None, renormalize: bool = True) -> TransitionMatrix:
    """Build the symmetric transition matrix of ``h``.

    With ``renormalize`` the identity is added to ``Q W rho(D_E) Q^T`` and 1
    to every vertex degree before the symmetric normalization, so isolated
    vertices receive a unit self-loop. Without it, zero-degree vertices get
    all-zero rows and a :class:`ZeroDegreeWarning` is emitted.
    """
    rho = rho or RhoFunction()
    validate(h)
    n = h.num_vertices
    Q = h.incidence()
    delta = np.asarray(Q.sum(axis=0)).ravel()
    r = rho(delta)
    if not np.all(np.isfinite(r)):
        raise NonFiniteRho(f"rho(delta) is not finite for sigma={rho.sigma}")
    coef = h.edge_weights * r
    degrees = Q @ (coef * delta)
    if renormalize:
        degrees = degrees + 1.0

    affinity = (Q @ sparse.diags(coef) @ Q.T).tocsr()
    upper = sparse.triu(affinity, format="csr")
    if renormalize:
        upper = upper + sparse.identity(n, format="csr")

    zero = degrees <= 0
    if zero.any():
        isolated = np.flatnonzero(zero).tolist()
        warnings.warn(
            f"{len(isolated)} vertices have zero degree; their rows are all zero: {isolated[:20]}"
            + (" ..." if len(isolated) > 20 else ""),
            ZeroDegreeWarning,
            stacklevel=2,
        )
    scale = np.zeros(n)
    scale[~zero] = 1.0 / np.sqrt(degrees[~zero])
    S = sparse.diags(scale)
    upper = (S @ upper @ S).tocsr()
    # mirror the strict upper triangle so stored entries are exactly symmetric
    T = (upper + sparse.triu(upper, k=1, format="csr").T).tocsr()
    T.eliminate_zeros()
    T.sort_indices()
    return TransitionMatrix(
        matrix=T,
        vertex_degrees=degrees,
        edge_degrees=delta,
        renormalized=renormalize,
        rho=rho,
        l1_bound=prop1_bound(h, rho) if renormalize else None,
    )


def l1_norm(t) -> float:
    """Induced l1 norm ``max_i sum_j |T_ij|`` (equal to the inf-norm for symmetric T)."""
    M = t.matrix if isinstance(t, TransitionMatrix) else t
    if sparse.issparse(M):
        sums = np.asarray(abs(M).sum(axis=1)).ravel()
    else:
        sums = np.abs(np.asarray(M)).sum(axis=1)
    return float(sums.max()) if sums.size else 0.0


def prop1_bound(h: Hypergraph, rho: RhoFunction | None = None) -> float:
    """Upper bound ``sqrt(1 + rho_max * E * D)`` on the l1 norm of the renormalized matrix."""
    rho = rho or RhoFunction()
    stats = validate(h)
    delta = np.asarray(h.incidence().sum(axis=0)).ravel()
    rho_max = rho.max_value(delta, stats.max_edge_size)
    return float(np.sqrt(1.0 + rho_max * stats.max_edge_size * stats.max_vertex_degree))


def export_matrix_market(t: TransitionMatrix, path) -> None:
    """Write the matrix as MatrixMarket coordinate text (symmetric storage)."""
    spio.mmwrite(str(path), t.matrix.tocoo(), symmetry="symmetric", precision=17)
