import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import io as spio

from hyperdiffuse.errors import NonFiniteRho, ZeroDegreeWarning
from hyperdiffuse.hypergraph import Hypergraph
from hyperdiffuse.transition import (
    RhoFunction,
    build_transition,
    export_matrix_market,
    l1_norm,
    prop1_bound,
)

from oracles import dense_transition, random_hypergraph, random_walk_matrix

H3 = Hypergraph(3, [[0, 1], [1, 2]])
r15 = 1 / math.sqrt(15)


def test_h3_renormalized_by_hand():
    t = build_transition(H3)
    # d~ = (3, 5, 3); off-diagonals 1/sqrt(15)
    expected = np.array([[2 / 3, r15, 0], [r15, 3 / 5, r15], [0, r15, 2 / 3]])
    assert np.allclose(t.toarray(), expected, rtol=0, atol=1e-15)
    assert t.vertex_degrees.tolist() == [3.0, 5.0, 3.0]


def test_h3_not_renormalized():
    t = build_transition(H3, renormalize=False)
    assert t.vertex_degrees.tolist() == [2.0, 4.0, 2.0]
    assert np.allclose(t.toarray(), dense_transition(H3, renormalize=False), rtol=0, atol=1e-15)
    assert not np.allclose(t.toarray().sum(1), build_transition(H3).toarray().sum(1))
    assert t.l1_bound is None


def test_single_isolated_vertex_renormalized():
    assert build_transition(Hypergraph(1)).toarray().tolist() == [[1.0]]


def test_zero_row_renormalized_gets_self_loop():
    t = build_transition(Hypergraph(3, [[0, 1]])).toarray()
    assert t[2].tolist() == [0.0, 0.0, 1.0]


def test_isolated_vertex_not_renormalized_warns_and_zero_row():
    with pytest.warns(ZeroDegreeWarning, match="zero degree"):
        t = build_transition(Hypergraph(4, [[0, 1], [1, 2]]), renormalize=False).toarray()
    assert np.all(t[3] == 0) and np.all(t[:, 3] == 0)


def test_exactly_symmetric_storage():
    rng = np.random.default_rng(5)
    for _ in range(20):
        h = random_hypergraph(rng, n_max=30)
        T = build_transition(h, RhoFunction(rng.choice([-1, 0, 1]))).matrix
        assert (T != T.T).nnz == 0


def test_similar_to_random_walk():
    # T = D^{1/2} P D^{-1/2} for the asymmetric two-step walk P, whose rows sum to 1
    rng = np.random.default_rng(11)
    for sigma in (-0.5, 0.0, 1.0):
        h = random_hypergraph(rng, n_max=15, m_max=20, isolated_ok=False)
        P = random_walk_matrix(h, sigma)
        assert np.allclose(P.sum(1), 1.0, atol=1e-12)
        t = build_transition(h, RhoFunction(sigma), renormalize=False)
        d = t.vertex_degrees
        assert np.allclose(t.toarray(), np.sqrt(d)[:, None] * P / np.sqrt(d)[None, :], atol=1e-12)


def test_rho_zero_and_powers():
    rho = RhoFunction(-1.0)
    assert rho(np.array([0.0, 2.0, 0.5])).tolist() == [0.0, 0.5, 2.0]
    assert RhoFunction(0.0)(np.array([0.0, 3.0])).tolist() == [0.0, 1.0]


def test_rho_non_finite_raises():
    h = Hypergraph(2, [[(0, 1e-200), (1, 1e-200)]])
    with pytest.raises(NonFiniteRho):
        build_transition(h, RhoFunction(-2.0))


def test_l1_norm_identity_and_h3():
    assert l1_norm(np.eye(4)) == 1.0
    assert l1_norm(build_transition(H3)) == pytest.approx(3 / 5 + 2 * r15, rel=1e-15)
    assert l1_norm(build_transition(H3)) == pytest.approx(1.1164, abs=1e-4)


def test_prop1_bound_examples():
    assert prop1_bound(H3) == pytest.approx(math.sqrt(5), rel=1e-15)
    assert prop1_bound(Hypergraph(1, [[0]])) == pytest.approx(math.sqrt(2), rel=1e-15)
    b = prop1_bound(H3, RhoFunction(-0.5))
    assert b == pytest.approx(math.sqrt(1 + 2**-0.5 * 4), rel=1e-15)


def test_build_sets_l1_bound():
    assert build_transition(H3).l1_bound == prop1_bound(H3)


def test_matrix_market_round_trip(tmp_path):
    t = build_transition(random_hypergraph(np.random.default_rng(2), n_max=20))
    path = tmp_path / "t.mtx"
    export_matrix_market(t, path)
    back = spio.mmread(str(path)).toarray()
    assert np.array_equal(back, t.toarray())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([-1.0, -0.5, 0.0, 0.5, 1.0]))
def test_renormalized_matches_oracle_and_bound(seed, sigma):
    h = random_hypergraph(np.random.default_rng(seed), n_max=20, m_max=25)
    t = build_transition(h, RhoFunction(sigma))
    assert np.max(np.abs(t.toarray() - dense_transition(h, sigma))) <= 1e-12
    assert l1_norm(t) <= t.l1_bound + 1e-12
    # the added self-loop makes every diagonal entry positive
    assert np.all(t.matrix.diagonal() > 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_not_renormalized_matches_oracle(seed):
    h = random_hypergraph(np.random.default_rng(seed), n_max=20, m_max=25)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ZeroDegreeWarning)
        t = build_transition(h, renormalize=False)
    assert np.max(np.abs(t.toarray() - dense_transition(h, renormalize=False))) <= 1e-12
