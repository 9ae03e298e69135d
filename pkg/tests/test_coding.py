from fractions import Fraction

import numpy as np
import pytest
from scipy import sparse

from anosov_lab.anosov import ToralAutomorphism
from anosov_lab.coding import (CertificateList, ContradictionError, EnumerationStats, MarkovGraph,
                               StructuralViolation, build_graph, certify_crossing_set, components,
                               compose_crossings, enumerate_first_return_words, is_crossing,
                               junction_times, word_chain)
from anosov_lab.partition import build_partition, markov_seed, non_markov_seed, refine

CAT = ToralAutomorphism([[2, 1], [1, 1]])
M = markov_seed(CAT)
N = non_markov_seed(CAT)
P40 = build_partition(CAT, Fraction(3, 5), N)


def brute_first_return(partition, certs, max_len):
    """Every admissible path of length <= max_len that crosses and has no junction."""
    marked = certs.symbols
    els = partition.elements
    out = set()
    for n in range(1, max_len + 1):
        for word, cyls in refine(partition, n + 1).cylinders.items():
            if word[0] not in marked or word[-1] not in marked:
                continue
            E0, En = els[word[0]], els[word[-1]]
            for c in cyls:
                if not (c.piece.s_lo == E0.s_lo and c.piece.s_hi == E0.s_hi
                        and c.image.u_lo == En.u_lo and c.image.u_hi == En.u_hi):
                    continue
                if junction_times(CAT, partition, word, c.shifts, marked):
                    continue
                out.add((word, c.shifts))
    return out


def test_markov_seed_words_are_transitions():
    certs = certify_crossing_set(CAT, M)
    assert certs.symbols == {0, 1} and not certs.rejected
    words = enumerate_first_return_words(CAT, M, certs, 5)
    assert len(words) == M.transition_counts().sum()
    assert all(w.n == 1 and is_crossing(w, M) for w in words)


def test_certificates_span_their_element():
    certs = certify_crossing_set(CAT, P40)
    assert certs.symbols
    for c in certs:
        E = P40.elements[c.symbol]
        assert E.contains_square(c.piece)
        assert c.u_margin > 0 and c.s_margin > 0
        # the cylinder is the crossing of a full-width past strip and a full-height future strip
        nu, ns = float(CAT.frame.norm_u), float(CAT.frame.norm_s)
        assert float(c.piece.u_extent) * nu == pytest.approx(float(c.u_margin), rel=1e-9)
        assert float(c.piece.s_extent) * ns == pytest.approx(float(c.s_margin), rel=1e-9)
    with pytest.raises(ValueError):
        certify_crossing_set(CAT, P40, d_p=0)


@pytest.mark.parametrize("partition,max_len", [(N, 5), (P40, 3)])
def test_enumeration_matches_brute_force(partition, max_len):
    certs = certify_crossing_set(CAT, partition)
    stats = EnumerationStats()
    words = enumerate_first_return_words(CAT, partition, certs, max_len, stats)
    got = {w.key for w in words}
    assert got == brute_first_return(partition, certs, max_len)
    unpruned = enumerate_first_return_words(CAT, partition, certs, max_len, prune=False)
    assert {w.key for w in unpruned} == got
    assert stats.words == len(words) and sum(stats.by_length.values()) == len(words)
    assert stats.diagnostic == ""


def test_words_are_prime_crossings():
    certs = certify_crossing_set(CAT, P40)
    for w in enumerate_first_return_words(CAT, P40, certs, 5):
        assert is_crossing(w, P40)
        assert junction_times(CAT, P40, w.symbols, w.shifts, certs.symbols) == []


def test_empty_certificates_rejected():
    with pytest.raises(ValueError):
        enumerate_first_return_words(CAT, N, CertificateList([], []), 3)


def test_graph_invariants():
    certs = certify_crossing_set(CAT, P40)
    words = enumerate_first_return_words(CAT, P40, certs, 6)
    G = build_graph(words)
    assert G.n_vertices == sum(w.n for w in words)
    assert len(G.stars) == len(words)
    assert G.junction_rule_disagreements == 0
    A = G.adjacency.tocsr()
    out_deg = np.diff(A.indptr)
    in_deg = np.diff(A.tocsc().indptr)
    for v, (wi, k) in enumerate(G.vertices):
        w = words[wi]
        assert G.symbols[v] == w.symbols[k - 1]
        if k < w.n:
            assert out_deg[v] >= 1 and A[v, v + 1] == 1
        if k > 1:
            assert in_deg[v] == 1
    # every junction edge lands on a star and respects symbols
    C = A.tocoo()
    star = set(G.stars.tolist())
    for i, j in zip(C.row, C.col):
        wi, k = G.vertices[i]
        if k == words[wi].n:
            assert j in star and words[G.vertices[j][0]].symbols[0] == words[wi].symbols[-1]


def test_components_flags():
    certs = certify_crossing_set(CAT, N)
    G = build_graph(enumerate_first_return_words(CAT, N, certs, 6))
    comps = components(G)
    assert sum(c.positive_entropy for c in comps) == 1
    assert all(c.stars > 0 for c in comps if c.cyclic)


def test_structural_violation_on_starless_cycle():
    A = sparse.csr_matrix(np.array([[0, 1], [1, 0]], dtype=float))
    G = MarkovGraph([], [(0, 1), (0, 2)], np.array([0, 0]), A, np.array([], dtype=np.int64))
    with pytest.raises(StructuralViolation):
        components(G)
    assert components(G, check=False)[0].cyclic


def test_composition():
    certs = certify_crossing_set(CAT, N)
    words = enumerate_first_return_words(CAT, N, certs, 5)
    by_start = {}
    for w in words:
        by_start.setdefault(w.symbols[0], []).append(w)
    w1 = words[0]
    w2 = by_start[w1.symbols[-1]][-1]
    w3 = by_start[w2.symbols[-1]][0]
    H = compose_crossings(word_chain([w1, w2, w3]), CAT)
    E0 = N.elements[w1.symbols[0]]
    assert H.s_lo == E0.s_lo and H.s_hi == E0.s_hi
    assert w1.piece.contains_square(H)
    mismatched = next(w for w in words if w.symbols[0] != w1.symbols[-1])
    with pytest.raises(ContradictionError):
        compose_crossings(word_chain([w1, mismatched]), CAT)
    with pytest.raises(ValueError):
        compose_crossings([], CAT)
