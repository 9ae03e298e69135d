import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from anosov_lab.anosov import ToralAutomorphism
from anosov_lab.coding import MarkovGraph, build_graph, certify_crossing_set, components, enumerate_first_return_words
from anosov_lab.entropy import (LeafSegment, boundary_proximity_stats, first_return_loop_counts,
                                gurevich_entropy_truncated, leafwise_entropy, loop_equation_entropy,
                                markov_cut_count, parry_measure, perron, proximity_exact_markov,
                                pushforward_cylinder_measure)
from anosov_lab.geometry import UsageError
from anosov_lab.partition import build_partition, markov_seed, non_markov_seed

CAT = ToralAutomorphism([[2, 1], [1, 1]])
M = markov_seed(CAT)


def graph(A, stars=None, symbols=None):
    A = sparse.csr_matrix(np.asarray(A, dtype=float))
    n = A.shape[0]
    stars = np.arange(n) if stars is None else np.asarray(stars, dtype=np.int64)
    symbols = np.zeros(n, dtype=np.int64) if symbols is None else np.asarray(symbols)
    return MarkovGraph([], [(0, k + 1) for k in range(n)], symbols, A, stars)


@pytest.mark.parametrize("n", [1, 3, 7])
def test_cycle_has_zero_entropy(n):
    A = np.roll(np.eye(n), 1, axis=1)
    assert gurevich_entropy_truncated(graph(A)).value == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("k", [2, 3, 5])
def test_complete_graph(k):
    G = graph(np.ones((k, k)))
    assert gurevich_entropy_truncated(G).value == pytest.approx(math.log(k), abs=1e-9)
    ch = parry_measure(G)
    assert np.allclose(ch.P.toarray(), 1 / k) and np.allclose(ch.pi, 1 / k)
    assert ch.entropy_rate == pytest.approx(math.log(k))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2**32 - 1))
def test_perron_matches_dense_eigensolver(n, seed):
    rng = np.random.default_rng(seed)
    A = (rng.random((n, n)) < 0.5).astype(float)
    A += np.roll(np.eye(n), 1, axis=1)  # Hamiltonian cycle: irreducible
    A = np.minimum(A, 1)
    rho, v = perron(sparse.csr_matrix(A))
    ev = np.linalg.eigvals(A)
    assert rho == pytest.approx(max(abs(ev)), rel=1e-8)
    assert np.all(v > 0)
    assert np.allclose(A @ v, rho * v, atol=1e-7)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_parry_is_stationary_and_maximal(n, seed):
    rng = np.random.default_rng(seed)
    A = np.minimum(1, (rng.random((n, n)) < 0.6) + np.roll(np.eye(n), 1, axis=1))
    ch = parry_measure(graph(A))
    assert np.allclose(ch.row_sums(), 1)
    assert ch.stationarity_residual() < 1e-9
    assert ch.entropy_rate == pytest.approx(math.log(max(abs(np.linalg.eigvals(A)))), rel=1e-7)


def test_parry_rejects_reducible():
    with pytest.raises(UsageError):
        parry_measure(graph([[1, 1], [0, 1]]))


def test_loop_counts_brute_force():
    # golden-mean shift with a star at vertex 0
    A = np.array([[1, 1], [1, 0]])
    G = graph(A, stars=[0])
    f = first_return_loop_counts(G, 0, 10)
    for n in range(1, 11):
        brute = sum(1 for path in itertools.product(range(2), repeat=n - 1)
                    if all(A[a, b] for a, b in zip((0,) + path, path + (0,))) and 0 not in path)
        assert f[n] == brute


def test_loop_equation_full_shift():
    est = loop_equation_entropy(graph(np.ones((2, 2)), stars=[0]), 0, 60)
    assert est.value == pytest.approx(math.log(2), abs=1e-6)
    gm = loop_equation_entropy(graph([[1, 1], [1, 0]], stars=[0]), 0, 60)
    assert gm.value == pytest.approx(math.log((1 + 5 ** 0.5) / 2), abs=1e-6)


def test_markov_seed_graph():
    certs = certify_crossing_set(CAT, M)
    G = build_graph(enumerate_first_return_words(CAT, M, certs, 3))
    comp = next(c for c in components(G) if c.positive_entropy)
    assert gurevich_entropy_truncated(G, comp).value == pytest.approx(CAT.h_top, abs=1e-9)
    ch = parry_measure(G, comp)
    mass = pushforward_cylinder_measure(ch, G, 2)
    assert mass.sum() == pytest.approx(1)
    assert np.allclose(mass, [float(a) for a in M.areas()], atol=1e-9)
    assert loop_equation_entropy(G, int(G.stars[0]), 40).value == pytest.approx(CAT.h_top, abs=1e-4)


def test_truncation_is_lower_bound():
    P = non_markov_seed(CAT)
    certs = certify_crossing_set(CAT, P)
    words = enumerate_first_return_words(CAT, P, certs, 8)
    prev = -math.inf
    for L in (2, 4, 6, 8):
        val = gurevich_entropy_truncated(build_graph([w for w in words if w.n <= L])).value
        assert prev - 1e-12 <= val <= CAT.h_top + 1e-9
        prev = val


def test_leafwise_counts_match_oracle():
    seg = LeafSegment.unit(CAT)
    for N in (1, 2, 3, 5, 7):
        est = leafwise_entropy(CAT, M, seg, N)
        assert est.meta["pieces"] == markov_cut_count(CAT, seg, N)
    short = LeafSegment(seg.start, seg.length / 4)
    assert leafwise_entropy(CAT, M, short, 6).meta["pieces"] <= leafwise_entropy(CAT, M, seg, 6).meta["pieces"]


def test_leafwise_counts_grow_like_lambda():
    seg = LeafSegment.unit(CAT)
    c = [markov_cut_count(CAT, seg, N) for N in (8, 10, 12)]
    lam2 = float(CAT.stretch) ** 2
    assert c[1] / c[0] == pytest.approx(lam2, rel=0.02)
    assert c[2] / c[1] == pytest.approx(lam2, rel=0.02)


def test_proximity():
    grid = [0.001, 0.01, 0.05]
    rows = boundary_proximity_stats(CAT, M, grid, 20_000, 1)
    fr = [r.fraction for r in rows]
    assert fr == sorted(fr)
    for r in rows:
        exact = proximity_exact_markov(CAT, M, r.r1)
        assert abs(r.fraction - exact) < 4 * math.sqrt(exact * (1 - exact) / 20_000) + 1e-3
