"""Exact arithmetic in a real quadratic field and axis-aligned geometry in eigen-coordinates.

Every predicate used to build partitions, cylinders and crossing words goes
through :class:`QuadraticNumber`, whose comparisons are exact.  Floating point
is used only as a filter: when the float values of two numbers are separated
by more than their error bounds the float answer is returned, otherwise the
comparison falls back to integer arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import total_ordering
from typing import Iterator, Optional, Union

Rational = Union[int, Fraction]

_EPS = 2.0 ** -50


class UsageError(ValueError):
    """Raised when arguments are structurally incompatible (e.g. mismatched fields)."""


def _isqrt_floor(n: int) -> int:
    return math.isqrt(n)


def rational_sqrt_bounds(x: Fraction, bits: int = 64) -> tuple[Fraction, Fraction]:
    """Rational lower and upper bounds on sqrt(x) with relative gap about 2**-bits."""
    if x < 0:
        raise ValueError("negative argument")
    if x == 0:
        return Fraction(0), Fraction(0)
    scale = 1 << (2 * bits)
    num = x.numerator * scale
    den = x.denominator
    # sqrt(num/den) = sqrt(num*den)/den
    r = _isqrt_floor(num * den)
    lo = Fraction(r, den << bits)
    hi = Fraction(r + 1, den << bits)
    return lo, hi


@total_ordering
class QuadraticNumber:
    """The number (p + q*sqrt(D)) / r with integers p, q, r and r > 0.

    ``D`` is a positive non-square integer shared by every number of one
    dynamical system.  The representation is normalised (gcd(p, q, r) = 1),
    so equality is component-wise.
    """

    __slots__ = ("p", "q", "r", "D", "_f", "_err")

    def __init__(self, a: Rational = 0, b: Rational = 0, D: int = 5):
        a = Fraction(a)
        b = Fraction(b)
        r = a.denominator * b.denominator // math.gcd(a.denominator, b.denominator)
        self._set(a.numerator * (r // a.denominator), b.numerator * (r // b.denominator), r, D)

    @classmethod
    def _raw(cls, p: int, q: int, r: int, D: int) -> "QuadraticNumber":
        obj = cls.__new__(cls)
        obj._set(p, q, r, D)
        return obj

    def _set(self, p: int, q: int, r: int, D: int) -> None:
        if r < 0:
            p, q, r = -p, -q, -r
        g = math.gcd(math.gcd(p, q), r)
        if g > 1:
            p //= g
            q //= g
            r //= g
        self.p, self.q, self.r, self.D = p, q, r, D
        self._f = None
        self._err = 0.0

    # -- accessors -------------------------------------------------------
    @property
    def a(self) -> Fraction:
        return Fraction(self.p, self.r)

    @property
    def b(self) -> Fraction:
        return Fraction(self.q, self.r)

    def is_rational(self) -> bool:
        return self.q == 0

    def _float(self) -> float:
        if self._f is None:
            sd = math.sqrt(self.D)
            try:
                f = (self.p + self.q * sd) / self.r
                mag = (abs(self.p) + abs(self.q) * sd) / self.r
            except OverflowError:
                f = float(self.a) + float(self.b) * sd
                mag = abs(float(self.a)) + abs(float(self.b)) * sd
            self._f = f
            self._err = 8 * _EPS * mag + 1e-300
        return self._f

    def __float__(self) -> float:
        return self._float()

    def __repr__(self) -> str:
        return f"QuadraticNumber({self.a}, {self.b}, D={self.D})"

    def __str__(self) -> str:
        if self.q == 0:
            return str(self.a)
        return f"{self.a}{'+' if self.q > 0 else '-'}{abs(self.b)}√{self.D}"

    def __hash__(self) -> int:
        return hash((self.p, self.q, self.r, self.D))

    # -- arithmetic ------------------------------------------------------
    def _coerce(self, other) -> "QuadraticNumber":
        if isinstance(other, QuadraticNumber):
            if other.D != self.D:
                raise UsageError(f"mismatched fields: D={self.D} vs D={other.D}")
            return other
        if isinstance(other, (int, Fraction)):
            other = Fraction(other)
            return QuadraticNumber._raw(other.numerator, 0, other.denominator, self.D)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        if self.r == o.r:
            return QuadraticNumber._raw(self.p + o.p, self.q + o.q, self.r, self.D)
        return QuadraticNumber._raw(self.p * o.r + o.p * self.r, self.q * o.r + o.q * self.r,
                                    self.r * o.r, self.D)

    __radd__ = __add__

    def __neg__(self):
        return QuadraticNumber._raw(-self.p, -self.q, self.r, self.D)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return QuadraticNumber._raw(self.p * o.p + self.q * o.q * self.D,
                                    self.p * o.q + self.q * o.p, self.r * o.r, self.D)

    __rmul__ = __mul__

    def conjugate(self) -> "QuadraticNumber":
        return QuadraticNumber._raw(self.p, -self.q, self.r, self.D)

    def norm(self) -> Fraction:
        """Field norm (a + b√D)(a - b√D), an exact rational."""
        return Fraction(self.p * self.p - self.q * self.q * self.D, self.r * self.r)

    def inverse(self) -> "QuadraticNumber":
        n = self.p * self.p - self.q * self.q * self.D
        if n == 0:
            raise ZeroDivisionError("inverse of zero")
        # 1/((p+q√D)/r) = r (p - q√D) / n
        return QuadraticNumber._raw(self.r * self.p, -self.r * self.q, n, self.D)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        if o.q == 0:
            if o.p == 0:
                raise ZeroDivisionError("division by zero")
            return QuadraticNumber._raw(self.p * o.r, self.q * o.r, self.r * o.p, self.D)
        return self * o.inverse()

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        result = QuadraticNumber._raw(1, 0, 1, self.D)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __abs__(self):
        return -self if self.sign() < 0 else self

    # -- order -----------------------------------------------------------
    def sign(self) -> int:
        p, q = self.p, self.q
        if q == 0:
            return (p > 0) - (p < 0)
        if p >= 0 and q > 0:
            return 1
        if p <= 0 and q < 0:
            return -1
        f = self._float()
        if abs(f) > self._err:
            return 1 if f > 0 else -1
        t = p * p - q * q * self.D
        # t != 0 since D is not a square
        if p > 0:
            return 1 if t > 0 else -1
        return -1 if t > 0 else 1

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            return self.q == 0 and Fraction(self.p, self.r) == other
        if not isinstance(other, QuadraticNumber):
            return NotImplemented
        return (self.p, self.q, self.r, self.D) == (other.p, other.q, other.r, other.D)

    def __lt__(self, other) -> bool:
        return qn_compare(self, other) < 0

    def floor(self) -> int:
        """Exact floor."""
        n = math.floor(self._float())
        # correct by at most a couple of steps
        while self < n:
            n -= 1
        while self >= n + 1:
            n += 1
        return n

    def bounds(self, bits: int = 64) -> tuple[Fraction, Fraction]:
        """Rational lower and upper bounds."""
        if self.q == 0:
            v = Fraction(self.p, self.r)
            return v, v
        lo, hi = rational_sqrt_bounds(Fraction(self.D), bits)
        a, b = self.a, self.b
        if b > 0:
            return a + b * lo, a + b * hi
        return a + b * hi, a + b * lo

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        a, b = self.a, self.b
        return {"a_num": a.numerator, "a_den": a.denominator,
                "b_num": b.numerator, "b_den": b.denominator, "D": self.D}

    @classmethod
    def from_dict(cls, d: dict) -> "QuadraticNumber":
        return cls(Fraction(d["a_num"], d["a_den"]), Fraction(d["b_num"], d["b_den"]), d["D"])


def qn_compare(x: QuadraticNumber, y) -> int:
    """Exact three-way comparison: -1, 0 or 1."""
    if not isinstance(y, QuadraticNumber):
        y = x._coerce(y)
    elif x.D != y.D:
        raise UsageError(f"mismatched fields: D={x.D} vs D={y.D}")
    fx, fy = x._float(), y._float()
    if abs(fx - fy) > x._err + y._err:
        return -1 if fx < fy else 1
    if x.p == y.p and x.q == y.q and x.r == y.r:
        return 0
    return (x - y).sign()


def qmin(x: QuadraticNumber, y: QuadraticNumber) -> QuadraticNumber:
    return x if qn_compare(x, y) <= 0 else y


def qmax(x: QuadraticNumber, y: QuadraticNumber) -> QuadraticNumber:
    return x if qn_compare(x, y) >= 0 else y


# ---------------------------------------------------------------------------
# plane objects


@dataclass(frozen=True)
class PlanePoint:
    """A point of the universal cover in (unstable, stable) eigen-coordinates."""

    u: QuadraticNumber
    s: QuadraticNumber

    def __add__(self, other: "PlanePoint") -> "PlanePoint":
        return PlanePoint(self.u + other.u, self.s + other.s)

    def __sub__(self, other: "PlanePoint") -> "PlanePoint":
        return PlanePoint(self.u - other.u, self.s - other.s)


@dataclass(frozen=True)
class LatticeVector:
    m: int
    n: int
    image: PlanePoint = field(compare=False)


@dataclass(frozen=True)
class UsSquare:
    """Open rectangle (u_lo, u_hi) x (s_lo, s_hi) in eigen-coordinates.

    The sides u = const lie in stable leaves (stable boundaries), the sides
    s = const lie in unstable leaves (unstable boundaries).
    """

    u_lo: QuadraticNumber
    u_hi: QuadraticNumber
    s_lo: QuadraticNumber
    s_hi: QuadraticNumber
    id: Optional[int] = None

    def __post_init__(self):
        if not (self.u_lo < self.u_hi and self.s_lo < self.s_hi):
            raise ValueError("degenerate us-square")

    @property
    def u_extent(self) -> QuadraticNumber:
        return self.u_hi - self.u_lo

    @property
    def s_extent(self) -> QuadraticNumber:
        return self.s_hi - self.s_lo

    def area(self) -> QuadraticNumber:
        """Area in eigen-coordinates (multiply by the frame's |det| for Euclidean area)."""
        return self.u_extent * self.s_extent

    def translate(self, v: PlanePoint) -> "UsSquare":
        return UsSquare(self.u_lo + v.u, self.u_hi + v.u, self.s_lo + v.s, self.s_hi + v.s, self.id)

    def with_id(self, ident) -> "UsSquare":
        return UsSquare(self.u_lo, self.u_hi, self.s_lo, self.s_hi, ident)

    def contains(self, p: PlanePoint, closed: bool = False) -> bool:
        if closed:
            return (self.u_lo <= p.u <= self.u_hi) and (self.s_lo <= p.s <= self.s_hi)
        return (self.u_lo < p.u < self.u_hi) and (self.s_lo < p.s < self.s_hi)

    def contains_square(self, other: "UsSquare") -> bool:
        return (self.u_lo <= other.u_lo and other.u_hi <= self.u_hi
                and self.s_lo <= other.s_lo and other.s_hi <= self.s_hi)

    def corners(self) -> list[PlanePoint]:
        return [PlanePoint(u, s) for u in (self.u_lo, self.u_hi) for s in (self.s_lo, self.s_hi)]

    def float_box(self) -> tuple[float, float, float, float]:
        return float(self.u_lo), float(self.u_hi), float(self.s_lo), float(self.s_hi)

    def same_geometry(self, other: "UsSquare") -> bool:
        return (self.u_lo == other.u_lo and self.u_hi == other.u_hi
                and self.s_lo == other.s_lo and self.s_hi == other.s_hi)


def interval_intersect(lo1, hi1, lo2, hi2):
    """Open-interval intersection; None when empty or degenerate."""
    lo = lo1 if qn_compare(lo1, lo2) >= 0 else lo2
    hi = hi1 if qn_compare(hi1, hi2) <= 0 else hi2
    if qn_compare(lo, hi) >= 0:
        return None
    return lo, hi


def rect_intersect_cover(A: UsSquare, B: UsSquare) -> Optional[UsSquare]:
    """Intersection of two squares in the cover, or None."""
    iu = interval_intersect(A.u_lo, A.u_hi, B.u_lo, B.u_hi)
    if iu is None:
        return None
    is_ = interval_intersect(A.s_lo, A.s_hi, B.s_lo, B.s_hi)
    if is_ is None:
        return None
    return UsSquare(iu[0], iu[1], is_[0], is_[1], A.id)


# ---------------------------------------------------------------------------
# eigen-frame of an integer matrix


class EigenFrame:
    """Change of coordinates between the standard frame and an eigenbasis.

    ``e_u`` and ``e_s`` are the unstable and stable eigenvectors in standard
    coordinates, with entries in Q(√D).  A standard point y corresponds to
    (u, s) with y = u e_u + s e_s.
    """

    def __init__(self, e_u: tuple[QuadraticNumber, QuadraticNumber],
                 e_s: tuple[QuadraticNumber, QuadraticNumber]):
        self.e_u = e_u
        self.e_s = e_s
        self.D = e_u[0].D
        det = e_u[0] * e_s[1] - e_s[0] * e_u[1]
        if det == 0:
            raise ValueError("degenerate eigenbasis")
        self.det = det
        inv = det.inverse()
        # rows of the inverse matrix
        self._u_row = (e_s[1] * inv, -e_s[0] * inv)
        self._s_row = (-e_u[1] * inv, e_u[0] * inv)
        self._u_row_f = tuple(float(c) for c in self._u_row)
        self._s_row_f = tuple(float(c) for c in self._s_row)
        self._eu_f = tuple(float(c) for c in e_u)
        self._es_f = tuple(float(c) for c in e_s)
        self.norm_u_sq = e_u[0] * e_u[0] + e_u[1] * e_u[1]
        self.norm_s_sq = e_s[0] * e_s[0] + e_s[1] * e_s[1]
        self.norm_u_upper = _sqrt_upper_qn(self.norm_u_sq)
        self.norm_s_upper = _sqrt_upper_qn(self.norm_s_sq)
        self.norm_u_lower = _sqrt_lower_qn(self.norm_u_sq)
        self.norm_s_lower = _sqrt_lower_qn(self.norm_s_sq)
        self.norm_u = math.sqrt(float(self.norm_u_sq))
        self.norm_s = math.sqrt(float(self.norm_s_sq))
        self._lattice_cache: dict[tuple[int, int], LatticeVector] = {}

    def qn(self, x: Rational) -> QuadraticNumber:
        return QuadraticNumber(x, 0, self.D)

    def to_eigen(self, x: Rational, y: Rational) -> PlanePoint:
        """Eigen-coordinates of the standard point (x, y); x, y rational or QuadraticNumber."""
        ur, sr = self._u_row, self._s_row
        return PlanePoint(ur[0] * x + ur[1] * y, sr[0] * x + sr[1] * y)

    def to_standard(self, p: PlanePoint) -> tuple[QuadraticNumber, QuadraticNumber]:
        return (self.e_u[0] * p.u + self.e_s[0] * p.s, self.e_u[1] * p.u + self.e_s[1] * p.s)

    def to_eigen_float(self, x: float, y: float) -> tuple[float, float]:
        ur, sr = self._u_row_f, self._s_row_f
        return ur[0] * x + ur[1] * y, sr[0] * x + sr[1] * y

    def to_standard_float(self, u: float, s: float) -> tuple[float, float]:
        return (self._eu_f[0] * u + self._es_f[0] * s, self._eu_f[1] * u + self._es_f[1] * s)

    def lattice(self, m: int, n: int) -> LatticeVector:
        key = (m, n)
        v = self._lattice_cache.get(key)
        if v is None:
            v = LatticeVector(m, n, self.to_eigen(m, n))
            if len(self._lattice_cache) < 200000:
                self._lattice_cache[key] = v
        return v

    def eigen_norm(self, p: PlanePoint) -> float:
        """Working metric: max(|u| |e_u|, |s| |e_s|) (float, reporting only)."""
        return max(abs(float(p.u)) * self.norm_u, abs(float(p.s)) * self.norm_s)

    def lattice_in_box(self, u_lo: float, u_hi: float, s_lo: float, s_hi: float,
                       pad: float = 1e-9) -> Iterator[tuple[int, int]]:
        """Integer vectors whose eigen-image may lie in the given closed box (superset)."""
        xs, ys = [], []
        for u in (u_lo - pad, u_hi + pad):
            for s in (s_lo - pad, s_hi + pad):
                x, y = self.to_standard_float(u, s)
                xs.append(x)
                ys.append(y)
        for m in range(math.floor(min(xs)) - 1, math.ceil(max(xs)) + 2):
            for n in range(math.floor(min(ys)) - 1, math.ceil(max(ys)) + 2):
                fu, fs = self.to_eigen_float(m, n)
                if u_lo - pad <= fu <= u_hi + pad and s_lo - pad <= fs <= s_hi + pad:
                    yield m, n

    def reduce(self, p: PlanePoint) -> tuple[PlanePoint, LatticeVector]:
        """Translate p into the standard fundamental domain [0,1)^2; returns (point, shift)."""
        x, y = self.to_standard(p)
        m, n = x.floor(), y.floor()
        v = self.lattice(m, n)
        return p - v.image, v


def _sqrt_upper_qn(x: QuadraticNumber) -> Fraction:
    return rational_sqrt_bounds(x.bounds()[1])[1]


def _sqrt_lower_qn(x: QuadraticNumber) -> Fraction:
    return rational_sqrt_bounds(x.bounds()[0])[0]


def rect_intersect_torus(A: UsSquare, B: UsSquare, frame: EigenFrame,
                         window: Optional[float] = None) -> list[tuple[LatticeVector, UsSquare]]:
    """All nonempty intersections A ∩ (B + v) over lattice vectors v.

    The candidate translates are enumerated exactly from the box of offsets for
    which the two rectangles can overlap, so the result is complete.  If
    ``window`` is given, translates whose eigen-norm exceeds it are skipped.
    """
    au = A.float_box()
    bu = B.float_box()
    out = []
    for m, n in frame.lattice_in_box(au[0] - bu[1], au[1] - bu[0], au[2] - bu[3], au[3] - bu[2]):
        v = frame.lattice(m, n)
        if window is not None and frame.eigen_norm(v.image) > window:
            continue
        piece = rect_intersect_cover(A, B.translate(v.image))
        if piece is not None:
            out.append((v, piece))
    return out


def diameter(A: UsSquare, frame: EigenFrame) -> Fraction:
    """Rational upper bound on the Euclidean diameter of A.

    Uses |Δu| |e_u| + |Δs| |e_s|, which is within a factor 2 of the true
    diameter (the larger parallelogram diagonal).
    """
    du = A.u_extent.bounds()[1]
    ds = A.s_extent.bounds()[1]
    return du * frame.norm_u_upper + ds * frame.norm_s_upper


def diameter_float(A: UsSquare, frame: EigenFrame) -> float:
    """Exact-up-to-rounding Euclidean diameter (max over corner pairs)."""
    pts = [frame.to_standard_float(float(c.u), float(c.s)) for c in A.corners()]
    return max(math.dist(p, q) for p in pts for q in pts)
