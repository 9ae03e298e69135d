"""Itineraries, cylinders, symbolic stable/unstable manifolds, traversal and the coding map.

Symbolic manifolds are computed as nested intersections along one leaf.  For
points with rational standard coordinates the computation is exact: every
iterate has the same denominator q, so its distance along the leaf to any
partition side is a nonzero element of Q(√D) whose norm is at least 1/L^2,
which gives a uniform lower bound ``delta``.  A cut at depth k then lies at
distance >= |lam|^k * delta from x, and the nested intersection is final as
soon as that radius exceeds the interval.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

from .anosov import ToralAutomorphism
from .geometry import PlanePoint, QuadraticNumber, UsSquare, qmax, qmin, rect_intersect_cover
from .partition import MarkovFlag, UsPartition, diameter, pullback, _step

Schedule = Callable[[int], UsPartition]


class BoundaryOrbitError(ValueError):
    """An iterate of the point lies on the boundary of the partition."""

    def __init__(self, k: int):
        super().__init__(f"iterate f^{k}(x) lies on the partition boundary")
        self.k = k


class InadmissibleWordError(ValueError):
    pass


class DepthCapError(RuntimeError):
    pass


@dataclass(frozen=True)
class Word:
    symbols: tuple[int, ...]
    offset: int = 0

    def __post_init__(self):
        if not self.symbols:
            raise ValueError("empty word")

    def __len__(self) -> int:
        return len(self.symbols)

    def at(self, k: int) -> int:
        return self.symbols[k - self.offset]

    def shift(self, n: int = 1) -> "Word":
        return Word(self.symbols, self.offset - n)


# ---------------------------------------------------------------------------
# orbits


class Orbit:
    """Exact orbit of a torus point; rational standard points iterate with integers."""

    def __init__(self, fmap: ToralAutomorphism, x):
        self.fmap = fmap
        frame = fmap.frame
        self.rational = not isinstance(x, PlanePoint)
        self._cache: dict[int, PlanePoint] = {}
        if self.rational:
            fx, fy = Fraction(x[0]), Fraction(x[1])
            q = math.lcm(fx.denominator, fy.denominator)
            self.q = q
            self._std = {0: ((fx * q).numerator % q, (fy * q).numerator % q)}
            ur, sr = frame._u_row, frame._s_row
            self._ru = (ur[0] / q, ur[1] / q)
            self._rs = (sr[0] / q, sr[1] / q)
            (a, b), (c, d) = fmap.matrix
            self._A = (a, b, c, d)
            det = fmap.det
            self._Ai = (d * det, -b * det, -c * det, a * det)
        else:
            self.q = None
            self._cache[0] = frame.reduce(x)[0]

    def standard(self, k: int) -> tuple[int, int]:
        """Integer numerators (mod q) of f^k x; rational orbits only."""
        std = self._std
        if k in std:
            return std[k]
        step = 1 if k > 0 else -1
        j = k - step
        while j not in std:
            j -= step
        X, Y = std[j]
        M = self._A if step > 0 else self._Ai
        q = self.q
        while j != k:
            X, Y = (M[0] * X + M[1] * Y) % q, (M[2] * X + M[3] * Y) % q
            j += step
            std[j] = (X, Y)
        return X, Y

    def at(self, k: int) -> PlanePoint:
        p = self._cache.get(k)
        if p is not None:
            return p
        if self.rational:
            X, Y = self.standard(k)
            p = PlanePoint(self._ru[0] * X + self._ru[1] * Y, self._rs[0] * X + self._rs[1] * Y)
        else:
            p = self.fmap.apply(self._cache[0], k)
        self._cache[k] = p
        return p


def _element(partition: UsPartition, p: PlanePoint, k: int):
    hit = partition.element_of(p)
    if hit is None:
        raise BoundaryOrbitError(k)
    return hit


def _const_schedule(partition: UsPartition) -> Schedule:
    return lambda k: partition


def itinerary(fmap: ToralAutomorphism, partition: UsPartition, x, n_past: int, n_future: int) -> Word:
    """Symbols Q(f^k x) for -n_past <= k <= n_future."""
    orb = x if isinstance(x, Orbit) else Orbit(fmap, x)
    syms = []
    for k in range(-n_past, n_future + 1):
        idx, _ = _element(partition, orb.at(k), k)
        syms.append(idx)
    return Word(tuple(syms), -n_past)


# ---------------------------------------------------------------------------
# cylinders


def _back_transitions(partition: UsPartition):
    """Transitions for f^{-1}, computed lazily and cached on the partition."""
    cached = getattr(partition, "_back_cache", None)
    if cached is not None:
        return cached
    from .geometry import rect_intersect_torus
    from .partition import Transition
    fmap, frame = partition.fmap, partition.frame
    out = []
    for e in partition.elements:
        img = fmap.apply_rect(e, -1)
        row = []
        for j, t in enumerate(partition.elements):
            for v, piece in rect_intersect_torus(t, img, frame):
                row.append(Transition(e.id, j, frame.lattice(-v.m, -v.n), piece.with_id(j)))
        out.append(row)
    partition._back_cache = out
    return out


def _step_back(fmap, elements, img: UsSquare, off: PlanePoint, t):
    im = fmap.apply_rect(img, -1).translate(PlanePoint(-t.v.image.u, -t.v.image.s))
    new = rect_intersect_cover(im, elements[t.dst])
    if new is None:
        return None
    return new.with_id(t.dst), fmap.apply_cover(off, -1) + t.v.image


def _forward_components(partition: UsPartition, symbols: Sequence[int]):
    """(image, offset) for every cover component of [A_0 ... A_{n-1}]."""
    fmap, els = partition.fmap, partition.elements
    zero = PlanePoint(partition.frame.qn(0), partition.frame.qn(0))
    layer = [(els[symbols[0]], zero)]
    for sym in symbols[1:]:
        nxt = []
        for img, off in layer:
            for t in partition.transitions[img.id]:
                if t.dst != sym:
                    continue
                st = _step(fmap, els, img, off, t)
                if st is not None:
                    nxt.append(st)
        layer = nxt
        if not layer:
            break
    return layer


def _backward_components(partition: UsPartition, symbols_back: Sequence[int]):
    """Components of {x in A_0 : f^{-k} x in B_k}, symbols_back = (A_0, B_1, B_2, ...)."""
    fmap, els = partition.fmap, partition.elements
    zero = PlanePoint(partition.frame.qn(0), partition.frame.qn(0))
    layer = [(els[symbols_back[0]], zero)]
    back = _back_transitions(partition)
    for sym in symbols_back[1:]:
        nxt = []
        for img, off in layer:
            for t in back[img.id]:
                if t.dst != sym:
                    continue
                st = _step_back(fmap, els, img, off, t)
                if st is not None:
                    nxt.append(st)
        layer = nxt
        if not layer:
            break
    return layer


def cylinder_pieces(fmap: ToralAutomorphism, partition: UsPartition, word: Word) -> list[UsSquare]:
    """Cover components (in the lift of the time-0 element) of the cylinder of ``word``.

    Times in the word must include 0 unless the word lies entirely on one side,
    in which case the pieces live in the lift of the first symbol.
    """
    syms = word.symbols
    lo = word.offset
    hi = lo + len(syms) - 1
    if lo > 0 or hi < 0:
        comps = _forward_components(partition, syms)
        return [pullback(fmap, img, off, len(syms) - 1) for img, off in comps]
    i0 = -lo
    fw = _forward_components(partition, syms[i0:])
    bw = _backward_components(partition, tuple(reversed(syms[: i0 + 1])))
    nf, nb = len(syms) - 1 - i0, i0
    fpieces = [pullback(fmap, img, off, nf) for img, off in fw]
    bpieces = [fmap.apply_rect(img.translate(off), nb) for img, off in bw]
    out = []
    for F in fpieces:
        for B in bpieces:
            r = rect_intersect_cover(F, B)
            if r is not None:
                out.append(r)
    return out


def cylinder_nonempty(fmap: ToralAutomorphism, partition: UsPartition, word: Word) -> bool:
    return bool(_forward_components(partition, word.symbols))


# ---------------------------------------------------------------------------
# symbolic manifolds


class Verdict(str, enum.Enum):
    TRAVERSES = "traverses"
    FAILS = "fails"
    BORDERLINE = "borderline"


@dataclass(frozen=True)
class TraversalVerdict:
    verdict: Verdict
    margin: Fraction = Fraction(0)

    def __bool__(self) -> bool:
        return self.verdict == Verdict.TRAVERSES


@dataclass
class LeafInterval:
    """Symbolic manifold through ``anchor`` along ``axis`` ('u' or 's').

    ``lo``/``hi`` are offsets from the anchor of the outer (computed) interval,
    which always contains the true manifold; the true interval contains
    [max(lo, -radius), min(hi, radius)].  ``element_lo``/``element_hi`` are the
    offsets of the sides of the anchor's element.
    """
    anchor: PlanePoint
    axis: str
    lo: QuadraticNumber
    hi: QuadraticNumber
    element: int
    element_lo: QuadraticNumber
    element_hi: QuadraticNumber
    depth: int
    radius: Optional[QuadraticNumber]
    endpoint_error: Fraction = Fraction(0)
    history: list = field(default_factory=list, repr=False)

    @property
    def inner(self) -> tuple[QuadraticNumber, QuadraticNumber]:
        if self.radius is None:
            return self.lo, self.hi
        return qmax(self.lo, -self.radius), qmin(self.hi, self.radius)

    @property
    def exact(self) -> bool:
        return self.endpoint_error == 0

    def endpoint_distance(self) -> tuple[float, float]:
        """(certified lower, upper) bound on the distance from the anchor to the nearest endpoint,
        in the Euclidean length of the leaf."""
        scale = self.norm
        ilo, ihi = self.inner
        outer = min(-float(self.lo), float(self.hi)) * scale
        inner = min(-float(ilo), float(ihi)) * scale
        return inner, outer

    norm: float = 1.0

    def to_json(self) -> dict:
        return {"axis": self.axis, "lo": self.lo.to_dict(), "hi": self.hi.to_dict(),
                "lo_float": float(self.lo), "hi_float": float(self.hi),
                "element": self.element, "depth": self.depth,
                "endpoint_error": float(self.endpoint_error)}


def _partitions_in(schedule: Schedule, period: int) -> list[UsPartition]:
    seen, out = set(), []
    for k in range(period):
        p = schedule(k)
        if id(p) not in seen:
            seen.add(id(p))
            out.append(p)
    return out


_SEP_CACHE: dict = {}


def _separation_data(fmap: ToralAutomorphism, partitions: Sequence[UsPartition], axis: str):
    key = (id(fmap), tuple(id(p) for p in partitions), axis)
    hit = _SEP_CACHE.get(key)
    if hit is not None and hit[0] == [p for p in partitions]:
        return hit[1]
    frame = fmap.frame
    row = frame._u_row if axis == "u" else frame._s_row
    den_row = math.lcm(row[0].r, row[1].r)
    den_c = 1
    cbar = Fraction(0)
    ymax = Fraction(0)
    for part in partitions:
        for e in part.elements:
            sides = (e.u_lo, e.u_hi) if axis == "u" else (e.s_lo, e.s_hi)
            for c in sides:
                den_c = math.lcm(den_c, c.r)
                cbar = max(cbar, abs(c.conjugate()).bounds()[1])
            for corner in e.corners():
                for coord in frame.to_standard(corner):
                    ymax = max(ymax, abs(coord).bounds()[1])
    rbar = sum(abs(c.conjugate()).bounds()[1] for c in row)
    data = (den_row, den_c, rbar * ymax + cbar)
    _SEP_CACHE[key] = ([p for p in partitions], data)
    return data


def separation_bound(fmap: ToralAutomorphism, partitions: Sequence[UsPartition], q: int, axis: str) -> Fraction:
    """Lower bound on the leaf distance from any point with denominator q to any side.

    For axis 'u' the distance is |u(y) - c| over stable sides u = c, for 's'
    it is |s(y) - c| over unstable sides.  The difference is (P + Q sqrt D)/L
    with integers P, Q, so |norm| >= 1/L^2, and the conjugate is bounded by K
    because the lifted point lies in an element.
    """
    den_row, den_c, K = _separation_data(fmap, partitions, axis)
    L = math.lcm(den_row * q, den_c)
    return Fraction(1, L * L) / K


def _symbolic_manifold(fmap: ToralAutomorphism, schedule: Schedule, period: int, x, axis: str,
                       tolerance=0, max_depth: int = 200, stop_depth: Optional[int] = None,
                       time0_partition: Optional[UsPartition] = None) -> LeafInterval:
    orb = x if isinstance(x, Orbit) else Orbit(fmap, x)
    parts = _partitions_in(schedule, period)
    tolerance = Fraction(tolerance)
    p0 = orb.at(0)
    part0 = time0_partition or schedule(0)
    idx0, v0 = _element(part0, p0, 0)
    E0 = part0.elements[idx0]
    lift = p0 + v0.image
    if axis == "u":
        lo, hi = E0.u_lo - lift.u, E0.u_hi - lift.u
        scale, step, norm = fmap.lam, -1, fmap.frame.norm_u
    else:
        lo, hi = E0.s_lo - lift.s, E0.s_hi - lift.s
        scale, step, norm = fmap.mu.inverse(), 1, fmap.frame.norm_s
    elo, ehi = lo, hi
    all_markov = all(p.markov_flag == MarkovFlag.MARKOV for p in parts)
    delta = None
    if orb.rational and not all_markov:
        delta = separation_bound(fmap, parts, orb.q, axis)
    stretch = fmap.stretch
    history = [(0, lo, hi)]
    depth = 0
    radius = None
    err = Fraction(0)

    def error_at(depth, lo, hi):
        if all_markov:
            return None, Fraction(0)
        if delta is None:
            return None, max(abs(lo).bounds()[1], abs(hi).bounds()[1])
        rad = stretch ** (depth + 1) * delta
        e = max(Fraction(0), (abs(lo) - rad).bounds()[1], (hi - rad).bounds()[1])
        return rad, e

    radius, err = error_at(0, lo, hi)
    k = 0
    fac = scale ** 0
    while True:
        if stop_depth is None and err <= tolerance:
            break
        if stop_depth is not None and k >= stop_depth:
            break
        if k >= max_depth:
            if stop_depth is None:
                raise DepthCapError(f"tolerance {float(tolerance)} not reached at depth {max_depth}")
            break
        k += 1
        fac = fac * scale
        t = step * k
        pk = orb.at(t)
        part = schedule(t)
        idx, v = _element(part, pk, t)
        E = part.elements[idx]
        lp = pk + v.image
        if axis == "u":
            a, b = E.u_lo - lp.u, E.u_hi - lp.u
        else:
            a, b = E.s_lo - lp.s, E.s_hi - lp.s
        a, b = a * fac, b * fac
        if b < a:
            a, b = b, a
        lo, hi = qmax(lo, a), qmin(hi, b)
        history.append((k, lo, hi))
        radius, err = error_at(k, lo, hi)
    return LeafInterval(p0, axis, lo, hi, idx0, elo, ehi, k, radius, err, history, norm)


def symbolic_manifold(fmap: ToralAutomorphism, partition: UsPartition, x, axis: str = "u",
                      tolerance=0, max_depth: int = 200, depth: Optional[int] = None) -> LeafInterval:
    """W^u_Q(x) (axis 'u', backward pullbacks) or W^s_Q(x) (axis 's') through x.

    Iterates until the certified endpoint error is <= ``tolerance``; with
    ``depth`` given, stops at exactly that depth instead.
    """
    return _symbolic_manifold(fmap, _const_schedule(partition), 1, x, axis, tolerance,
                              max_depth, stop_depth=depth)


def verdict_of(li: LeafInterval) -> TraversalVerdict:
    cut = (li.lo - li.element_lo) + (li.element_hi - li.hi)
    if cut.sign() > 0:
        return TraversalVerdict(Verdict.FAILS, cut.bounds()[0])
    if li.endpoint_error == 0:
        return TraversalVerdict(Verdict.TRAVERSES, Fraction(0))
    return TraversalVerdict(Verdict.BORDERLINE, li.endpoint_error)


def traverses(fmap: ToralAutomorphism, partition: UsPartition, x, axis: str = "u",
              tolerance=0, max_depth: int = 200) -> TraversalVerdict:
    """Does the symbolic manifold join the two opposite sides of Q(x)?

    A cut certified at finite depth is final (fails); otherwise the verdict is
    'traverses' only when the certified error is zero, and 'borderline' when
    the depth cap is reached first.
    """
    try:
        li = symbolic_manifold(fmap, partition, x, axis, tolerance, max_depth)
    except DepthCapError:
        li = symbolic_manifold(fmap, partition, x, axis, depth=max_depth)
    return verdict_of(li)


# ---------------------------------------------------------------------------
# coding map


@dataclass
class Projection:
    """Nested rectangle chain realising the symmetric sub-words of a word."""
    chain: list[list[UsSquare]]
    diameters: list[float]

    @property
    def deepest(self) -> list[UsSquare]:
        return self.chain[-1]


def project(fmap: ToralAutomorphism, partition: UsPartition, word: Word) -> Projection:
    """Realise [A_{-n} ... A_n] for n = 0 .. N as exact rectangles (A_0 lift).

    ``word`` must contain time 0; N is the largest symmetric radius available.
    """
    n_max = min(-word.offset, word.offset + len(word) - 1)
    if n_max < 0:
        raise ValueError("word must contain time 0")
    chain, diams = [], []
    for n in range(n_max + 1):
        sub = Word(tuple(word.at(k) for k in range(-n, n + 1)), -n)
        pieces = cylinder_pieces(fmap, partition, sub)
        if not pieces:
            raise InadmissibleWordError(f"empty cylinder at radius {n}")
        chain.append(pieces)
        diams.append(max(float(diameter(p, partition.frame)) for p in pieces))
    return Projection(chain, diams)


def fiber_cardinality(fmap: ToralAutomorphism, partition: UsPartition, x, depth: int) -> int:
    """Number of admissible words A_{-depth} ... A_depth whose cylinder closure contains x.

    Boundary points are allowed.  The count upper-bounds the number of
    preimages of x under the coding map.
    """
    orb = x if isinstance(x, Orbit) else Orbit(fmap, x)
    frame = partition.frame
    els = partition.elements
    p0 = orb.at(0)
    starts = partition.locator.locate(p0, closed=True)
    zero = PlanePoint(frame.qn(0), frame.qn(0))
    results = set()
    for idx, v in starts:
        lift = p0 + v.image  # x in the lift of element idx
        # forward: states (image rect, offset); keep those whose closure holds f^k x
        fw = [(els[idx], zero)]
        for k in range(1, depth + 1):
            nxt = []
            for img, off in fw:
                for t in partition.transitions[img.id]:
                    st = _step(fmap, els, img, off, t)
                    if st is None:
                        continue
                    new, o = st
                    pt = fmap.apply_cover(lift, k) - o
                    if new.contains(pt, closed=True):
                        nxt.append((new, o))
            fw = nxt
        bw = [(els[idx], zero)]
        back = _back_transitions(partition)
        for k in range(1, depth + 1):
            nxt = []
            for img, off in bw:
                for t in back[img.id]:
                    st = _step_back(fmap, els, img, off, t)
                    if st is None:
                        continue
                    new, o = st
                    pt = fmap.apply_cover(lift, -k) - o
                    if new.contains(pt, closed=True):
                        nxt.append((new, o))
            bw = nxt
        for fimg, foff in fw:
            F = pullback(fmap, fimg, foff, depth)
            for bimg, boff in bw:
                B = fmap.apply_rect(bimg.translate(boff), depth)
                r = rect_intersect_cover(F, B)
                if r is not None and r.contains(lift, closed=True):
                    results.add((r.u_lo, r.u_hi, r.s_lo, r.s_hi, idx))
    return len(results)
