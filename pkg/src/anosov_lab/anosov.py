"""Linear hyperbolic toral automorphisms with exact eigen-data."""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence

from .geometry import (EigenFrame, LatticeVector, PlanePoint, QuadraticNumber, UsSquare,
                       rational_sqrt_bounds)


class HyperbolicityError(ValueError):
    pass


class PeriodCapError(OverflowError):
    pass


def _is_square(n: int) -> bool:
    return n >= 0 and math.isqrt(n) ** 2 == n


class ToralAutomorphism:
    """The map x -> A x mod Z^2 for an integer matrix A with det ±1 and |trace| > 2.

    In eigen-coordinates the action is (u, s) -> (lam u, mu s) where ``lam`` is
    the expanding eigenvalue (possibly negative) and ``mu = det / lam``.
    """

    def __init__(self, matrix: Sequence[Sequence[int]] | Sequence[int], period_cap: int = 400):
        flat = [int(v) for row in matrix for v in (row if isinstance(row, (list, tuple)) else [row])]
        if len(flat) != 4:
            raise ValueError("matrix must have four integer entries")
        a, b, c, d = flat
        self.matrix = ((a, b), (c, d))
        self.det = a * d - b * c
        self.trace = a + d
        if self.det not in (1, -1):
            raise HyperbolicityError(f"not hyperbolic: det = {self.det} is not ±1")
        if abs(self.trace) <= 2 if self.det == 1 else self.trace == 0:
            raise HyperbolicityError(f"not hyperbolic: trace {self.trace}, det {self.det}")
        D = self.trace ** 2 - 4 * self.det
        if _is_square(D):
            raise HyperbolicityError("not hyperbolic: rational eigenvalues")
        self.D = D
        sgn = 1 if self.trace > 0 else -1
        # eigenvalue of modulus > 1 carries the sign of the trace
        self.lam = QuadraticNumber(Fraction(self.trace, 2), Fraction(sgn, 2), D)
        self.mu = QuadraticNumber(self.det, 0, D) / self.lam
        self.stretch = abs(self.lam)
        self.kappa = self.stretch.inverse()
        self.h_top = math.log(float(self.stretch))
        # b != 0 for every hyperbolic integer matrix with det ±1
        e_u = (QuadraticNumber(b, 0, D), self.lam - a)
        e_s = (QuadraticNumber(b, 0, D), self.mu - a)
        self.frame = EigenFrame(e_u, e_s)
        self.period_cap = period_cap
        self.kappa0 = self.kappa
        self.r0 = expansivity_radius(self)
        self.eps0 = self.r0
        # points on a common local leaf: d(f^k x, f^k y) = kappa^k d(x, y) <= eps0 kappa^k
        self.C0 = self.r0

    def __repr__(self) -> str:
        return f"ToralAutomorphism({[list(r) for r in self.matrix]})"

    # -- powers ----------------------------------------------------------
    def lam_pow(self, n: int) -> QuadraticNumber:
        return self.lam ** n

    def mu_pow(self, n: int) -> QuadraticNumber:
        return self.mu ** n

    def matrix_power(self, n: int) -> tuple[tuple[int, int], tuple[int, int]]:
        (a, b), (c, d) = self.matrix
        if n < 0:
            a, b, c, d = d * self.det, -b * self.det, -c * self.det, a * self.det
            n = -n
        R = ((1, 0), (0, 1))
        M = ((a, b), (c, d))
        while n:
            if n & 1:
                R = _mm(R, M)
            M = _mm(M, M)
            n >>= 1
        return R

    # -- action ----------------------------------------------------------
    def apply_cover(self, p: PlanePoint, n: int = 1) -> PlanePoint:
        """Action on the universal cover (no reduction)."""
        return PlanePoint(self.lam_pow(n) * p.u, self.mu_pow(n) * p.s)

    def apply(self, p: PlanePoint, n: int = 1) -> PlanePoint:
        """f^n(p) reduced to the standard fundamental domain [0,1)^2."""
        return self.frame.reduce(self.apply_cover(p, n))[0]

    def apply_standard(self, x, y, n: int = 1):
        """f^n on standard coordinates (rationals), reduced mod 1."""
        (a, b), (c, d) = self.matrix_power(n)
        X, Y = a * x + b * y, c * x + d * y
        return X - math.floor(X), Y - math.floor(Y)

    def apply_rect(self, sq: UsSquare, n: int = 1) -> UsSquare:
        """Image of a square in the cover: u scaled by lam^n, s by mu^n."""
        ln, mn = self.lam_pow(n), self.mu_pow(n)
        u1, u2 = sq.u_lo * ln, sq.u_hi * ln
        s1, s2 = sq.s_lo * mn, sq.s_hi * mn
        if u2 < u1:
            u1, u2 = u2, u1
        if s2 < s1:
            s1, s2 = s2, s1
        return UsSquare(u1, u2, s1, s2, sq.id)

    def lattice_image(self, v: LatticeVector, n: int = 1) -> LatticeVector:
        (a, b), (c, d) = self.matrix_power(n)
        return self.frame.lattice(a * v.m + b * v.n, c * v.m + d * v.n)

    def point(self, x, y) -> PlanePoint:
        """Eigen-coordinates of a standard-frame point."""
        return self.frame.to_eigen(Fraction(x) if not hasattr(x, "D") else x,
                                   Fraction(y) if not hasattr(y, "D") else y)

    # -- counts ----------------------------------------------------------
    def count_periodic(self, n: int) -> int:
        """Number of points of period n: |det(A^n - I)|."""
        if n < 1:
            raise ValueError("n must be positive")
        if n > self.period_cap:
            raise PeriodCapError(f"n = {n} exceeds the configured cap {self.period_cap}")
        (a, b), (c, d) = self.matrix_power(n)
        return abs((a - 1) * (d - 1) - b * c)


def _mm(X, Y):
    return ((X[0][0] * Y[0][0] + X[0][1] * Y[1][0], X[0][0] * Y[0][1] + X[0][1] * Y[1][1]),
            (X[1][0] * Y[0][0] + X[1][1] * Y[1][0], X[1][0] * Y[0][1] + X[1][1] * Y[1][1]))


def count_periodic(fmap: ToralAutomorphism, n: int) -> int:
    return fmap.count_periodic(n)


def expansivity_radius(fmap: ToralAutomorphism, window: int = 6) -> Fraction:
    """Certified rational lower bound for half the shortest nonzero lattice vector in the eigen-metric.

    The eigen-metric norm of v is max(|v_u| |e_u|, |v_s| |e_s|).  Two orbits that
    stay closer than this forever lift to a bounded orbit of the difference
    vector, which must vanish.
    """
    frame = fmap.frame
    best = None
    for m in range(-window, window + 1):
        for n in range(-window, window + 1):
            if (m, n) == (0, 0):
                continue
            v = frame.to_eigen(m, n)
            lo_u = abs(v.u).bounds()[0] * frame.norm_u_lower
            lo_s = abs(v.s).bounds()[0] * frame.norm_s_lower
            val = max(lo_u, lo_s)
            if best is None or val < best:
                best = val
    # every vector outside the window is longer than the window bound; the
    # Euclidean length is at most twice the eigen-norm, so eigen-norm >= |v|/2 >= window/2
    best = min(best, Fraction(window, 2))
    # round down to a small-denominator rational
    return Fraction(math.floor(best / 2 * 10 ** 6), 10 ** 6)
