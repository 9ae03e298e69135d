from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from anosov_lab.anosov import HyperbolicityError, ToralAutomorphism, expansivity_radius
from anosov_lab.geometry import QuadraticNumber, UsSquare, qn_compare, rect_intersect_cover

mpmath.mp.dps = 60
fracs = st.fractions(min_value=-50, max_value=50, max_denominator=40)


def mp(x: QuadraticNumber):
    return (mpmath.mpf(x.p) + mpmath.mpf(x.q) * mpmath.sqrt(x.D)) / x.r


@given(fracs, fracs, fracs, fracs)
def test_field_operations_match_high_precision(a, b, c, d):
    x, y = QuadraticNumber(a, b), QuadraticNumber(c, d)
    for got, want in ((x + y, mp(x) + mp(y)), (x - y, mp(x) - mp(y)), (x * y, mp(x) * mp(y))):
        assert abs(mp(got) - want) < mpmath.mpf(10) ** -40
    if y != 0:
        assert abs(mp(x / y) - mp(x) / mp(y)) < mpmath.mpf(10) ** -30 * (1 + abs(mp(x) / mp(y)))


@given(fracs, fracs)
def test_sign_and_floor_match_high_precision(a, b):
    x = QuadraticNumber(a, b)
    v = mp(x)
    assert x.sign() == (0 if v == 0 else (1 if v > 0 else -1))
    assert x.floor() == int(mpmath.floor(v))
    lo, hi = x.bounds()
    assert mpmath.mpf(lo.numerator) / lo.denominator <= v <= mpmath.mpf(hi.numerator) / hi.denominator


@given(fracs, fracs, fracs, fracs)
def test_compare_is_antisymmetric(a, b, c, d):
    x, y = QuadraticNumber(a, b), QuadraticNumber(c, d)
    assert qn_compare(x, y) == -qn_compare(y, x)
    assert (qn_compare(x, y) == 0) == (x == y)


def test_normalised_equality():
    assert QuadraticNumber(Fraction(2, 4), Fraction(1, 2)) == QuadraticNumber(Fraction(1, 2), Fraction(2, 4))
    x = QuadraticNumber(3, 1)
    assert x * x.inverse() == 1
    assert x.norm() == 9 - 5


def test_cover_intersection_keeps_first_id():
    q = lambda v: QuadraticNumber(v)
    A = UsSquare(q(0), q(2), q(0), q(2), "a")
    B = UsSquare(q(1), q(3), q(1), q(3), "b")
    C = rect_intersect_cover(A, B)
    assert (C.u_lo, C.u_hi, C.s_lo, C.s_hi, C.id) == (1, 2, 1, 2, "a")
    assert rect_intersect_cover(A, UsSquare(q(2), q(3), q(0), q(1), "c")) is None


@pytest.mark.parametrize("M", [[[1, 0], [0, 1]], [[1, 1], [0, 1]], [[2, 0], [0, 1]], [[0, 1], [-1, 0]],
                               [[1, 1], [-1, 0]], [[2, 1], [1, 2]]])
def test_non_hyperbolic_rejected(M):
    with pytest.raises(HyperbolicityError, match="not hyperbolic"):
        ToralAutomorphism(M)


@pytest.mark.parametrize("M", [[[2, 1], [1, 1]], [[3, 1], [2, 1]], [[1, 1], [1, 0]], [[-2, 1], [1, -1]],
                               [[5, 2], [2, 1]]])
def test_eigen_data(M):
    f = ToralAutomorphism(M)
    (a, b), (c, d) = f.matrix
    for ev in (f.lam, f.mu):
        assert ev * ev - f.trace * ev + f.det == 0
    assert abs(f.lam) > 1 > abs(f.mu)
    # the eigen-frame diagonalises A exactly
    for m, n in [(1, 0), (0, 1), (3, -2)]:
        p = f.frame.to_eigen(m, n)
        img = f.frame.to_eigen(a * m + b * n, c * m + d * n)
        assert img.u == f.lam * p.u and img.s == f.mu * p.s


@pytest.mark.parametrize("M", [[[2, 1], [1, 1]], [[3, 1], [2, 1]], [[1, 1], [1, 0]]])
def test_periodic_count_brute_force(M):
    f = ToralAutomorphism(M)
    for n in (1, 2, 3):
        N = f.count_periodic(n)
        # fixed points of A^n lie on the grid (1/N) Z^2
        (a, b), (c, d) = f.matrix_power(n)
        found = sum(1 for i in range(N) for j in range(N)
                    if (a * i + b * j - i) % N == 0 and (c * i + d * j - j) % N == 0)
        assert found == N


def test_expansivity_radius_below_shortest_vector():
    f = ToralAutomorphism([[2, 1], [1, 1]])
    r0 = float(expansivity_radius(f))
    nu, ns = f.frame.norm_u, f.frame.norm_s
    shortest = min(max(abs(float(v.u)) * nu, abs(float(v.s)) * ns)
                   for m in range(-30, 31) for n in range(-30, 31) if (m, n) != (0, 0)
                   for v in [f.frame.to_eigen(m, n)])
    assert 0 < r0 <= shortest / 2 + 1e-12
    assert r0 > 0.9 * shortest / 2
