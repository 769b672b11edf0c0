"""Independent dense/exact reference computations used by the tests.

Nothing here imports the code paths it checks.
"""
from fractions import Fraction

import numpy as np

from hyperdiffuse.hypergraph import Hypergraph


def dense_Q(h: Hypergraph) -> np.ndarray:
    Q = np.zeros((h.num_vertices, h.num_edges))
    for e, edge in enumerate(h.hyperedges):
        for v, q in edge:
            Q[v, e] = q
    return Q


def rho_dense(x, sigma):
    x = np.asarray(x, dtype=float)
    return np.array([xi**sigma if xi > 0 else 0.0 for xi in x])


def dense_transition(h: Hypergraph, sigma: float = 0.0, renormalize: bool = True) -> np.ndarray:
    Q = dense_Q(h)
    w = np.asarray(h.edge_weights)
    delta = Q.sum(axis=0)
    r = rho_dense(delta, sigma)
    A = Q @ np.diag(w * r) @ Q.T
    d = np.array([sum(w[e] * Q[i, e] * delta[e] * r[e] for e in range(h.num_edges)) for i in range(h.num_vertices)])
    if renormalize:
        A = A + np.eye(h.num_vertices)
        d = d + 1
    s = np.array([1 / np.sqrt(x) if x > 0 else 0.0 for x in d])
    return np.diag(s) @ A @ np.diag(s)


def random_walk_matrix(h: Hypergraph, sigma: float = 0.0) -> np.ndarray:
    """Asymmetric two-step walk: P(u,v) = sum_e w Q(u,e) delta rho(delta) / d(u) * Q(v,e) / delta."""
    Q = dense_Q(h)
    w = np.asarray(h.edge_weights)
    delta = Q.sum(axis=0)
    r = rho_dense(delta, sigma)
    n, m = Q.shape
    d = (Q * (w * delta * r)).sum(axis=1)
    P = np.zeros((n, n))
    for u in range(n):
        for v in range(n):
            P[u, v] = sum(w[e] * Q[u, e] * delta[e] * r[e] / d[u] * Q[v, e] / delta[e] for e in range(m) if delta[e] > 0)
    return P


def dense_diffusion(T: np.ndarray, alpha: float, beta: float, t: int) -> np.ndarray:
    n = T.shape[0]
    Z = sum(alpha**tau * np.linalg.matrix_power(T, tau) for tau in range(1, t + 1)) / t
    return beta * Z + (1 - beta) * np.eye(n)


def random_hypergraph(rng, n_max=50, m_max=80, binary=False, isolated_ok=True) -> Hypergraph:
    """Random weighted hypergraph; ``isolated_ok=False`` adds a singleton edge per vertex."""
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(0, m_max + 1))
    edges, weights = [], []
    for _ in range(m):
        size = int(rng.integers(1, min(n, 8) + 1))
        members = rng.choice(n, size=size, replace=False)
        qs = np.ones(size) if binary else rng.uniform(0, 1, size)
        edges.append(list(zip(members.tolist(), qs.tolist())))
        weights.append(1.0 if binary else float(rng.uniform(0, 1)))
    if not isolated_ok:
        for v in range(n):
            edges.append([(v, 1.0)])
            weights.append(1.0)
    return Hypergraph(n, edges, weights)


def numeric_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar ``f`` w.r.t. array ``x`` (modified in place, restored)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + h
        fp = f()
        x[idx] = old - h
        fm = f()
        x[idx] = old
        g[idx] = (fp - fm) / (2 * h)
    return g


def exact_c_alpha_beta_l(alpha, beta, L, d_T) -> Fraction:
    a, b, d = Fraction(alpha), Fraction(beta), Fraction(d_T)
    return b / L * sum((a * d) ** l for l in range(1, L + 1)) + (1 - b)


def exact_mu(L_M, G_M, S_M, eta, m, T) -> Fraction:
    eta, S = Fraction(eta), Fraction(S_M)
    r = 1 + eta * S
    return 2 * eta * Fraction(L_M) * Fraction(G_M) / m * sum(r ** (t - 1) for t in range(1, T + 1))


def exact_k_mn(m, n) -> Fraction:
    return sum(Fraction(n * n, (n + i) ** 2) for i in range(1, m + 1))


def rel_err(approx, exact) -> float:
    exact = Fraction(exact)
    if exact == 0:
        return abs(float(approx))
    return float(abs(Fraction(approx) - exact) / abs(exact))
