from fractions import Fraction

import numpy as np
import pytest

from anosov_lab.anosov import ToralAutomorphism
from anosov_lab.geometry import PlanePoint
from anosov_lab.extension import rational_samples
from anosov_lab.partition import (UsPartition, build_partition, join_partitions, markov_seed, multiplicity,
                                  non_markov_seed, refine)
from oracles import brute_element

CAT = ToralAutomorphism([[2, 1], [1, 1]])


@pytest.fixture(scope="module")
def seeds():
    return markov_seed(CAT), non_markov_seed(CAT)


def test_seed_areas_and_flags(seeds):
    M, N = seeds
    assert len(M) == 2 and len(N) == 4
    for P in seeds:
        assert P.total_area() == 1
    assert M.is_markov and not N.is_markov


def test_markov_transition_matrix(seeds):
    M, _ = seeds
    T = M.transition_counts()
    # same spectrum as A: trace 3, determinant 1
    assert np.trace(T) == 3 and round(np.linalg.det(T)) == 1
    assert T.sum() == 5


@pytest.mark.parametrize("which", [0, 1])
def test_locate_agrees_with_brute_force(seeds, which):
    P = seeds[which]
    for x, y in rational_samples(200, which):
        p = CAT.point(x, y)
        hit = P.element_of(p)
        assert hit is not None
        assert brute_element(P, p) == {hit[0]}


@pytest.mark.parametrize("which,n", [(0, 1), (0, 4), (1, 2), (1, 4)])
def test_cylinders_tile_the_torus(seeds, which, n):
    P = seeds[which]
    R = refine(P, n)
    total = sum((sq.area() for sq in R.pieces()), CAT.frame.qn(0)) * abs(CAT.frame.det)
    assert total == 1


def test_markov_cylinder_count_matches_transition_matrix(seeds):
    M, _ = seeds
    T = M.transition_counts()
    for n in range(1, 7):
        # one cover component per path in the transition multigraph
        R = refine(M, n)
        assert sum(len(v) for v in R.cylinders.values()) == np.linalg.matrix_power(T, n - 1).sum()


@pytest.mark.parametrize("r", [Fraction(3, 5), Fraction(3, 10)])
def test_build_partition_diameter_and_flag(seeds, r):
    P = build_partition(CAT, r, seeds[1])
    assert P.max_diameter() <= r
    assert P.total_area() == 1
    assert not P.is_markov
    Q = build_partition(CAT, r, seeds[0])
    assert Q.is_markov and Q.max_diameter() <= r


def test_refined_partition_is_refinement(seeds):
    N = seeds[1]
    P = build_partition(CAT, Fraction(3, 5), N)
    for x, y in rational_samples(100, 3):
        p = CAT.point(x, y)
        idx, v = P.element_of(p)
        child = P.elements[idx]
        parent = N.element_of(p)[0]
        # every corner-weighted interior point of the child lies in the same parent
        for wu, ws in ((1, 1), (1, 3), (3, 1), (3, 3)):
            q = PlanePoint((child.u_lo * wu + child.u_hi * (4 - wu)) / 4,
                           (child.s_lo * ws + child.s_hi * (4 - ws)) / 4)
            assert brute_element(N, q) == {parent}


def test_json_roundtrip(seeds):
    P = build_partition(CAT, Fraction(3, 5), seeds[1])
    Q = UsPartition.from_json(CAT, P.to_json())
    assert len(Q) == len(P)
    assert all(a.same_geometry(b) for a, b in zip(P.elements, Q.elements))
    assert Q.markov_flag == P.markov_flag


def test_join_partitions(seeds):
    M, N = seeds
    J = join_partitions(M, N)
    assert J.total_area() == 1
    for x, y in rational_samples(50, 9):
        p = CAT.point(x, y)
        e = J.elements[J.element_of(p)[0]]
        c = CAT.frame.reduce(p)[0]
        assert M.element_of(p) is not None and N.element_of(p) is not None
        assert e.area() != 0


def test_multiplicity_of_seeds(seeds):
    M, N = seeds
    assert multiplicity(M) == 2
    assert 3 <= multiplicity(N) <= 4


@pytest.mark.parametrize("M", [[[3, 1], [2, 1]], [[1, 1], [1, 0]]])
def test_other_automorphisms(M):
    f = ToralAutomorphism(M)
    P = markov_seed(f)
    assert P.total_area() == 1 and P.is_markov
    assert not non_markov_seed(f).is_markov
