from fractions import Fraction

import pytest

from anosov_lab.anosov import ToralAutomorphism
from anosov_lab.extension import (ExtendedSystem, b_fraction, build_extension, rational_samples, shortened,
                                  shortening_detector, wilson_interval)
from anosov_lab.geometry import PlanePoint
from anosov_lab.partition import build_partition, markov_seed, non_markov_seed
from anosov_lab.symbolic import BoundaryOrbitError, symbolic_manifold

CAT = ToralAutomorphism([[2, 1], [1, 1]])


@pytest.fixture(scope="module")
def ext():
    return build_extension(CAT, 1, Fraction(3, 5), Fraction(3, 10))


def test_structure(ext):
    assert ext.Q1.total_area() == 1
    assert len(ext.Q1) > len(ext.Q0)
    # Q1 refines Q0: every Q1 element sits inside one Q0 element
    red = CAT.frame.reduce
    for e in ext.Q1.elements[:60]:
        parents = {ext.Q0.element_of(red(PlanePoint((e.u_lo * a + e.u_hi * (4 - a)) / 4,
                                                    (e.s_lo * b + e.s_hi * (4 - b)) / 4))[0])[0]
                   for a in (1, 3) for b in (1, 3)}
        assert len(parents) == 1
    sys4 = ExtendedSystem(CAT, 4, ext.Q0, ext.Q1)
    assert sys4.element_count == len(ext.Q1) + 3 * len(ext.Q0) == len(sys4.labels())
    assert sys4.partition_at(0) is ext.Q1 and sys4.partition_at(5) is ext.Q0
    x = (Fraction(1, 3), Fraction(2, 5))
    assert sys4.step(x, 3, 2) == (CAT.apply_standard(*x, 2), 1)
    with pytest.raises(ValueError):
        ExtendedSystem(CAT, 0, ext.Q0, ext.Q1)
    with pytest.raises(ValueError):
        build_extension(CAT, 1, Fraction(3, 10), Fraction(3, 5))


def test_T1_uses_fine_partition_only(ext):
    system = ExtendedSystem(CAT, 1, ext.Q0, ext.Q1)
    for x in rational_samples(10, 2):
        a = system.manifold(x, 0, "u")
        b = symbolic_manifold(CAT, ext.Q1, x, "u")
        assert (a.lo, a.hi) == (b.lo, b.hi)


def test_markov_degenerate_configuration():
    M = markov_seed(CAT)
    Q = build_partition(CAT, Fraction(3, 10), M)
    system = ExtendedSystem(CAT, 3, M, Q)
    est = b_fraction(system, 10_000, seed=1)
    assert est.value >= 0.99
    assert est.hits + est.fails + est.borderline == est.samples
    assert shortening_detector(system, 200).value == 0.0


def test_shortening_witness(ext):
    system = ExtendedSystem(CAT, 1, ext.Q0, ext.Q1)
    xs = rational_samples(100, 6)
    flags = []
    for x in xs:
        try:
            flags.append(shortened(system, x))
        except BoundaryOrbitError:
            pass
    assert any(flags) and not all(flags)


def test_wilson_interval():
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi and hi - lo == pytest.approx(0.19, abs=0.01)
    assert wilson_interval(0, 0) == (0.0, 1.0)
    assert wilson_interval(0, 10)[0] == 0.0


def test_fraction_bounds(ext):
    system = ExtendedSystem(CAT, 2, ext.Q0, ext.Q1)
    est = b_fraction(system, 100, seed=4)
    assert 0 <= est.ci[0] <= est.value <= est.ci[1] <= 1
    assert est.to_dict()["samples"] == est.samples
