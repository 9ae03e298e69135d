"""Brute-force reference computations shared by the unit tests."""
from fractions import Fraction

from anosov_lab.anosov import ToralAutomorphism
from anosov_lab.geometry import PlanePoint


def brute_element(partition, p: PlanePoint, window: int = 4):
    """Indices of the elements whose open lift contains some translate of p."""
    frame = partition.frame
    p = frame.reduce(p)[0]
    hits = set()
    for m in range(-window, window + 1):
        for n in range(-window, window + 1):
            q = p + frame.lattice(m, n).image
            for e in partition.elements:
                if e.contains(q):
                    hits.add(e.id)
    return hits


def brute_itinerary(fmap: ToralAutomorphism, partition, x, times):
    """Symbols from exact rational iteration in standard coordinates."""
    (a, b), (c, d) = fmap.matrix
    det = fmap.det
    inv = ((d * det, -b * det), (-c * det, a * det))
    out = []
    for k in times:
        X, Y = Fraction(x[0]), Fraction(x[1])
        M = (a, b, c, d) if k >= 0 else (inv[0][0], inv[0][1], inv[1][0], inv[1][1])
        for _ in range(abs(k)):
            X, Y = (M[0] * X + M[1] * Y) % 1, (M[2] * X + M[3] * Y) % 1
        hits = brute_element(partition, fmap.point(X, Y))
        assert len(hits) == 1, hits
        out.append(hits.pop())
    return tuple(out)
