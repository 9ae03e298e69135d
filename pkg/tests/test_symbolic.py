from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from anosov_lab.anosov import ToralAutomorphism
from anosov_lab.extension import rational_samples
from anosov_lab.geometry import PlanePoint
from anosov_lab.partition import build_partition, markov_seed, non_markov_seed
from anosov_lab.symbolic import (BoundaryOrbitError, Orbit, Verdict, Word,
                                 cylinder_nonempty, fiber_cardinality, itinerary, project,
                                 separation_bound, symbolic_manifold, traverses)
from oracles import brute_element, brute_itinerary

CAT = ToralAutomorphism([[2, 1], [1, 1]])
M = markov_seed(CAT)
N = non_markov_seed(CAT)
P40 = build_partition(CAT, Fraction(3, 5), N)
points = st.tuples(st.fractions(0, 1, max_denominator=97), st.fractions(0, 1, max_denominator=97))


@settings(max_examples=40, deadline=None)
@given(points)
def test_itinerary_matches_exact_iteration(x):
    try:
        w = itinerary(CAT, N, x, 4, 4)
    except BoundaryOrbitError:
        return
    assert w.symbols == brute_itinerary(CAT, N, x, range(-4, 5))
    assert w.at(0) == w.symbols[4]


def test_orbit_periodicity():
    # rational points are periodic; the integer orbit must close up
    orb = Orbit(CAT, (Fraction(1, 5), Fraction(2, 5)))
    assert orb.standard(orb_period(orb)) == orb.standard(0)
    assert orb.at(-3) == CAT.apply(orb.at(0), -3)


def orb_period(orb):
    k = 1
    while orb.standard(k) != orb.standard(0):
        k += 1
    return k


@pytest.mark.parametrize("axis", ["u", "s"])
def test_markov_manifolds_are_full_sides(axis):
    for x in rational_samples(30, 1):
        li = symbolic_manifold(CAT, M, x, axis)
        assert li.depth == 0 and li.exact
        assert (li.lo, li.hi) == (li.element_lo, li.element_hi)
        assert traverses(CAT, M, x, axis).verdict == Verdict.TRAVERSES


def _same_past(part, x_pt, y_pt, depth, axis):
    step = -1 if axis == "u" else 1
    for k in range(depth + 1):
        a = brute_element(part, CAT.apply(x_pt, step * k))
        b = brute_element(part, CAT.apply(y_pt, step * k))
        if a != b:
            return False
    return True


@pytest.mark.parametrize("axis", ["u", "s"])
def test_manifold_endpoints_by_exact_orbits(axis):
    checked = 0
    for x in rational_samples(15, 4):
        try:
            li = symbolic_manifold(CAT, P40, x, axis)
        except BoundaryOrbitError:
            continue
        assert li.exact
        p = li.anchor
        shift = (lambda t: PlanePoint(p.u + t, p.s)) if axis == "u" else (lambda t: PlanePoint(p.u, p.s + t))
        depth = li.depth + 3
        # strictly inside: same symbols along the whole relevant half-orbit
        for frac in (Fraction(1, 10), Fraction(9, 10)):
            assert _same_past(P40, p, shift(li.lo * frac), depth, axis)
            assert _same_past(P40, p, shift(li.hi * frac), depth, axis)
        # just beyond an endpoint: some symbol differs
        eps = Fraction(1, 10**6)
        assert not _same_past(P40, p, shift(li.hi + eps * (li.hi - li.lo)), depth, axis)
        assert not _same_past(P40, p, shift(li.lo - eps * (li.hi - li.lo)), depth, axis)
        checked += 1
    assert checked >= 10


def test_separation_bound_holds_on_samples():
    den = 101
    delta = separation_bound(CAT, [P40], den, "u")
    for i in range(1, den, 7):
        for j in range(1, den, 11):
            p = CAT.point(Fraction(i, den), Fraction(j, den))
            for e in P40.elements:
                for m in range(-3, 4):
                    for n in range(-3, 4):
                        q = p + CAT.frame.lattice(m, n).image
                        for c in (e.u_lo, e.u_hi):
                            assert abs(q.u - c) >= delta


def test_fiber_cardinality():
    for x in rational_samples(50, 2):
        assert fiber_cardinality(CAT, P40, x, 3) == 1
    counts = {fiber_cardinality(CAT, N, CAT.frame.reduce(c)[0], 3) for e in N.elements for c in e.corners()}
    assert max(counts) <= 4 and max(counts) >= 3


def test_projection_shrinks_and_contains_point():
    x = (Fraction(2, 7), Fraction(3, 11))
    w = itinerary(CAT, N, x, 6, 6)
    proj = project(CAT, N, w)
    d = proj.diameters
    assert all(b <= a + 1e-12 for a, b in zip(d, d[1:]))
    assert d[-1] < d[0] * 0.05
    lift = Orbit(CAT, x).at(0) + N.element_of(CAT.point(*x))[1].image
    assert any(sq.contains(lift, closed=True) for sq in proj.deepest)


def test_admissibility():
    w = itinerary(CAT, N, (Fraction(1, 3), Fraction(1, 7)), 0, 5)
    assert cylinder_nonempty(CAT, N, w)
    T = M.transition_counts()
    # find a forbidden transition in the Markov seed, if any, else a forbidden 3-word
    bad = [(i, j) for i in range(2) for j in range(2) if T[i, j] == 0]
    if bad:
        assert not cylinder_nonempty(CAT, M, Word(bad[0]))
    with pytest.raises(ValueError):
        project(CAT, N, Word((0, 1), 1))


def test_boundary_orbit_rejected():
    corner = CAT.frame.reduce(N.elements[0].corners()[0])[0]
    with pytest.raises(BoundaryOrbitError):
        itinerary(CAT, N, corner, 0, 0)
