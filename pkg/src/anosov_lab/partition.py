"""Finite partitions of the torus into us-squares, their refinements and multiplicity."""
from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cmp_to_key
from typing import Iterable, Optional, Sequence

from .anosov import ToralAutomorphism
from .geometry import (EigenFrame, LatticeVector, PlanePoint, QuadraticNumber, UsSquare,
                       diameter, interval_intersect, qn_compare, rect_intersect_cover,
                       rect_intersect_torus)

_qkey = cmp_to_key(qn_compare)


class PartitionError(ValueError):
    """Raised when a net or a refinement does not produce a valid us-partition."""


class RefinementCapError(PartitionError):
    def __init__(self, msg: str, best: float):
        super().__init__(msg)
        self.best = best


class MarkovFlag(str, enum.Enum):
    MARKOV = "markov"
    NON_MARKOV = "non-markov"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class StableSegment:
    """Segment {u} x [s_lo, s_hi] of a stable leaf, in cover coordinates."""
    u: QuadraticNumber
    s_lo: QuadraticNumber
    s_hi: QuadraticNumber


@dataclass(frozen=True)
class UnstableSegment:
    """Segment [u_lo, u_hi] x {s} of an unstable leaf, in cover coordinates."""
    s: QuadraticNumber
    u_lo: QuadraticNumber
    u_hi: QuadraticNumber


# ---------------------------------------------------------------------------
# fundamental two-rectangle tiling


def lattice_basis(fmap: ToralAutomorphism, search: int = 12):
    """Lattice basis (w1, w2), w1 in the open first quadrant and w2 in the open second
    quadrant of the eigen-frame, with the smallest Euclidean lengths found."""
    frame = fmap.frame
    q1, q2 = [], []
    for m in range(-search, search + 1):
        for n in range(-search, search + 1):
            if (m, n) == (0, 0):
                continue
            v = frame.to_eigen(m, n)
            su, ss = v.u.sign(), v.s.sign()
            if su > 0 and ss > 0:
                q1.append((m * m + n * n, m, n))
            elif su < 0 and ss > 0:
                q2.append((m * m + n * n, m, n))
    q1.sort()
    q2.sort()
    best = None
    for l1, m1, n1 in q1[:60]:
        for l2, m2, n2 in q2[:60]:
            if abs(m1 * n2 - m2 * n1) == 1:
                key = (max(l1, l2), l1 + l2)
                if best is None or key < best[0]:
                    best = (key, (m1, n1), (m2, n2))
    if best is None:
        raise PartitionError("no quadrant-adapted lattice basis found")
    return frame.lattice(*best[1]), frame.lattice(*best[2])


def fundamental_rectangles(fmap: ToralAutomorphism) -> list[UsSquare]:
    """Two rectangles whose lattice translates tile the plane.

    With w1 = (a, b) and w2 = (-c, d) (a, b, c, d > 0) the rectangles are
    [0, a] x [0, d] and [a, a + c] x [0, b].
    """
    w1, w2 = lattice_basis(fmap)
    a, b = w1.image.u, w1.image.s
    c, d = -w2.image.u, w2.image.s
    zero = fmap.frame.qn(0)
    return [UsSquare(zero, a, zero, d, 0), UsSquare(a, a + c, zero, b, 1)]


def markov_seed_net(fmap: ToralAutomorphism):
    """Stable and unstable segments through the fixed point 0 bounding the two-rectangle tiling."""
    w1, w2 = lattice_basis(fmap)
    a, b = w1.image.u, w1.image.s
    c, d = -w2.image.u, w2.image.s
    zero = fmap.frame.qn(0)
    stable = [StableSegment(zero, -b, d)]
    unstable = [UnstableSegment(zero, zero, a + c)]
    return stable, unstable


def non_markov_net(fmap: ToralAutomorphism, offset: Fraction = Fraction(1, 37)):
    """The seed net plus two cuts whose leaves are displaced by a rational offset.

    One stable cut crosses the first rectangle at u = a/2 + offset and one
    unstable cut crosses the second rectangle at s = b/2 + offset.
    """
    offset = Fraction(offset)
    stable, unstable = markov_seed_net(fmap)
    P, Q = fundamental_rectangles(fmap)
    uc = P.u_hi / 2 + offset
    sc = Q.s_hi / 2 + offset
    if not (P.u_lo < uc < P.u_hi and Q.s_lo < sc < Q.s_hi):
        raise PartitionError("offset moves the extra cuts outside the rectangles")
    stable = stable + [StableSegment(uc, P.s_lo, P.s_hi)]
    unstable = unstable + [UnstableSegment(sc, Q.u_lo, Q.u_hi)]
    return stable, unstable


# ---------------------------------------------------------------------------
# point location


class Locator:
    """Grid index of a family of squares on the torus (standard fundamental domain)."""

    def __init__(self, frame: EigenFrame, squares: Sequence[UsSquare], pad: float = 1e-9):
        self.frame = frame
        self.squares = list(squares)
        n = max(1, len(self.squares))
        self.res = max(4, min(256, int(2 * math.sqrt(n)) + 1))
        res = self.res
        self.grid: dict[tuple[int, int], list[tuple[int, int, int]]] = defaultdict(list)
        for idx, sq in enumerate(self.squares):
            ul, uh, sl, sh = sq.float_box()
            pts = [frame.to_standard_float(u, s) for u in (ul, uh) for s in (sl, sh)]
            x0 = min(p[0] for p in pts) - pad
            x1 = max(p[0] for p in pts) + pad
            y0 = min(p[1] for p in pts) - pad
            y1 = max(p[1] for p in pts) + pad
            for i in range(math.floor(x0), math.ceil(x1)):
                for j in range(math.floor(y0), math.ceil(y1)):
                    # translate square by -(i, j) so it overlaps [0,1]^2
                    ax0, ax1 = max(0.0, x0 - i), min(1.0, x1 - i)
                    ay0, ay1 = max(0.0, y0 - j), min(1.0, y1 - j)
                    if ax0 > ax1 or ay0 > ay1:
                        continue
                    for gx in range(max(0, int(ax0 * res)), min(res - 1, int(ax1 * res)) + 1):
                        for gy in range(max(0, int(ay0 * res)), min(res - 1, int(ay1 * res)) + 1):
                            self.grid[(gx, gy)].append((idx, i, j))

    def candidates(self, x: float, y: float):
        res = self.res
        gx = min(res - 1, max(0, int(x * res)))
        gy = min(res - 1, max(0, int(y * res)))
        return self.grid.get((gx, gy), ())

    def locate(self, p: PlanePoint, closed: bool = False):
        """Squares containing the reduced point p.

        Returns a list of (index, LatticeVector v) with p + v inside square
        ``index`` (open, or closed when ``closed``).
        """
        fx, fy = self.frame.to_standard_float(float(p.u), float(p.s))
        out = []
        seen = set()
        for idx, i, j in self.candidates(fx, fy):
            if (idx, i, j) in seen:
                continue
            seen.add((idx, i, j))
            sq = self.squares[idx]
            ul, uh, sl, sh = sq.float_box()
            v = self.frame.lattice(i, j)
            fu, fs = float(p.u) + float(v.image.u), float(p.s) + float(v.image.s)
            if fu < ul - 1e-9 or fu > uh + 1e-9 or fs < sl - 1e-9 or fs > sh + 1e-9:
                continue
            q = p + v.image
            if sq.contains(q, closed=closed):
                out.append((idx, v))
        return out


# ---------------------------------------------------------------------------
# partitions


@dataclass(frozen=True)
class Transition:
    """f(E_src) meets E_dst + v; ``piece`` = (A E_src - v) ∩ E_dst in E_dst's lift."""
    src: int
    dst: int
    v: LatticeVector
    piece: UsSquare


class UsPartition:
    """Finite family of us-squares with disjoint interiors covering the torus."""

    def __init__(self, fmap: ToralAutomorphism, elements: Sequence[UsSquare],
                 stable: Sequence[StableSegment] = (), unstable: Sequence[UnstableSegment] = (),
                 markov_flag: Optional[MarkovFlag] = None, validate: bool = True,
                 name: str = ""):
        self.fmap = fmap
        self.frame = fmap.frame
        self.elements = [e.with_id(i) for i, e in enumerate(elements)]
        self.stable = list(stable)
        self.unstable = list(unstable)
        self.name = name
        self._locator: Optional[Locator] = None
        self._transitions: Optional[list[list[Transition]]] = None
        if validate:
            self.validate()
        if markov_flag is None:
            markov_flag = MarkovFlag.MARKOV if is_markov(self) else MarkovFlag.NON_MARKOV
        self.markov_flag = markov_flag

    def __len__(self) -> int:
        return len(self.elements)

    def __repr__(self) -> str:
        return f"UsPartition({len(self)} elements, {self.markov_flag.value})"

    @property
    def is_markov(self) -> bool:
        return self.markov_flag == MarkovFlag.MARKOV

    @property
    def locator(self) -> Locator:
        if self._locator is None:
            self._locator = Locator(self.frame, self.elements)
        return self._locator

    def total_area(self) -> QuadraticNumber:
        total = self.frame.qn(0)
        for e in self.elements:
            total = total + e.area()
        return total * abs(self.frame.det)

    def areas(self) -> list[QuadraticNumber]:
        d = abs(self.frame.det)
        return [e.area() * d for e in self.elements]

    def validate(self) -> None:
        one = self.frame.qn(1)
        if self.total_area() != one:
            raise PartitionError(f"total area {float(self.total_area())} != 1")
        els = self.elements
        for i, a in enumerate(els):
            for b in els[i:]:
                hits = rect_intersect_torus(a, b, self.frame)
                if a is b:
                    hits = [h for h in hits if (h[0].m, h[0].n) != (0, 0)]
                if hits:
                    raise PartitionError(f"elements {a.id} and {b.id} overlap")

    def element_of(self, p: PlanePoint):
        """(element index, lattice shift) for an interior point; None on the boundary."""
        hits = self.locator.locate(p)
        if len(hits) != 1:
            return None
        return hits[0]

    def max_diameter(self) -> Fraction:
        return max(diameter(e, self.frame) for e in self.elements)

    @property
    def transitions(self) -> list[list[Transition]]:
        """For each element, the nonempty components of its image meeting each element."""
        if self._transitions is None:
            out = []
            for e in self.elements:
                img = self.fmap.apply_rect(e, 1)
                row = []
                for j, t in enumerate(self.elements):
                    for v, piece in rect_intersect_torus(t, img, self.frame):
                        # t ∩ (img + v): the image translated by v; record -v
                        neg = self.frame.lattice(-v.m, -v.n)
                        row.append(Transition(e.id, j, neg, piece.with_id(j)))
                out.append(row)
            self._transitions = out
        return self._transitions

    def transition_counts(self):
        import numpy as np
        n = len(self)
        M = np.zeros((n, n), dtype=np.int64)
        for row in self.transitions:
            for t in row:
                M[t.src, t.dst] += 1
        return M

    def stable_sides(self) -> list[StableSegment]:
        out = []
        for e in self.elements:
            out.append(StableSegment(e.u_lo, e.s_lo, e.s_hi))
            out.append(StableSegment(e.u_hi, e.s_lo, e.s_hi))
        return out

    def unstable_sides(self) -> list[UnstableSegment]:
        out = []
        for e in self.elements:
            out.append(UnstableSegment(e.s_lo, e.u_lo, e.u_hi))
            out.append(UnstableSegment(e.s_hi, e.u_lo, e.u_hi))
        return out

    def to_json(self) -> dict:
        return {
            "matrix": [list(r) for r in self.fmap.matrix],
            "markov_flag": self.markov_flag.value,
            "name": self.name,
            "elements": [
                {"id": e.id, "u_lo": e.u_lo.to_dict(), "u_hi": e.u_hi.to_dict(),
                 "s_lo": e.s_lo.to_dict(), "s_hi": e.s_hi.to_dict(),
                 "diameter_bound": float(diameter(e, self.frame))}
                for e in self.elements
            ],
            "stable_net": [{"u": s.u.to_dict(), "s_lo": s.s_lo.to_dict(), "s_hi": s.s_hi.to_dict()}
                           for s in self.stable],
            "unstable_net": [{"s": s.s.to_dict(), "u_lo": s.u_lo.to_dict(), "u_hi": s.u_hi.to_dict()}
                             for s in self.unstable],
        }

    @classmethod
    def from_json(cls, fmap: ToralAutomorphism, doc: dict) -> "UsPartition":
        q = QuadraticNumber.from_dict
        els = [UsSquare(q(e["u_lo"]), q(e["u_hi"]), q(e["s_lo"]), q(e["s_hi"]), e["id"])
               for e in doc["elements"]]
        st = [StableSegment(q(s["u"]), q(s["s_lo"]), q(s["s_hi"])) for s in doc["stable_net"]]
        un = [UnstableSegment(q(s["s"]), q(s["u_lo"]), q(s["u_hi"])) for s in doc["unstable_net"]]
        return cls(fmap, els, st, un, MarkovFlag(doc["markov_flag"]), validate=False,
                   name=doc.get("name", ""))


# ---------------------------------------------------------------------------
# Markov property


def _union_covers(lo, hi, intervals) -> bool:
    """Does the union of closed intervals cover [lo, hi]?"""
    ivs = sorted(intervals, key=lambda t: _qkey(t[0]))
    cur = lo
    for a, b in ivs:
        if a > cur:
            break
        if b > cur:
            cur = b
        if cur >= hi:
            return True
    return cur >= hi


def _covered(frame: EigenFrame, axis: str, line, lo, hi, segments) -> bool:
    """Is the segment {line} x [lo, hi] (axis='s': stable, varying s) covered by translates
    of the given segments on the same torus leaf?"""
    ivs = []
    for seg in segments:
        if axis == "s":
            c, a, b = seg.u, seg.s_lo, seg.s_hi
            box = (float(line - c),) * 2 + (float(lo - b), float(hi - a))
        else:
            c, a, b = seg.s, seg.u_lo, seg.u_hi
            box = (float(lo - b), float(hi - a)) + (float(line - c),) * 2
        for m, n in frame.lattice_in_box(*box):
            v = frame.lattice(m, n).image
            vc, vt = (v.u, v.s) if axis == "s" else (v.s, v.u)
            if c + vc == line:
                ivs.append((a + vt, b + vt))
    return _union_covers(lo, hi, ivs)


def is_markov(partition: UsPartition) -> bool:
    """f(stable boundary) ⊆ stable boundary and f^{-1}(unstable boundary) ⊆ unstable boundary."""
    fmap, frame = partition.fmap, partition.frame
    ss = partition.stable_sides()
    us = partition.unstable_sides()
    lam, mu = fmap.lam, fmap.mu
    for seg in ss:
        a, b = seg.s_lo * mu, seg.s_hi * mu
        if b < a:
            a, b = b, a
        if not _covered(frame, "s", seg.u * lam, a, b, ss):
            return False
    lam_i, mu_i = lam.inverse(), mu.inverse()
    for seg in us:
        a, b = seg.u_lo * lam_i, seg.u_hi * lam_i
        if b < a:
            a, b = b, a
        if not _covered(frame, "u", seg.s * mu_i, a, b, us):
            return False
    return True


# ---------------------------------------------------------------------------
# construction from a net


def _uniq_sorted(vals):
    vals = sorted(vals, key=_qkey)
    out = []
    for v in vals:
        if not out or out[-1] != v:
            out.append(v)
    return out


def build_from_net(fmap: ToralAutomorphism, stable: Sequence[StableSegment],
                   unstable: Sequence[UnstableSegment], name: str = "") -> UsPartition:
    """Partition whose elements are the complementary components of a net of leaf segments.

    The two fundamental rectangles are cut into grid cells along every net
    segment and segment endpoint; cells are glued across uncovered shared
    edges.  Each glued component must be an embedded rectangle.
    """
    frame = fmap.frame
    stable, unstable = list(stable), list(unstable)
    cells: list[UsSquare] = []
    for R in fundamental_rectangles(fmap):
        ucuts = [R.u_lo, R.u_hi]
        scuts = [R.s_lo, R.s_hi]
        for seg in stable:
            box = (float(R.u_lo - seg.u), float(R.u_hi - seg.u),
                   float(R.s_lo - seg.s_hi), float(R.s_hi - seg.s_lo))
            for m, n in frame.lattice_in_box(*box):
                v = frame.lattice(m, n).image
                u = seg.u + v.u
                if R.u_lo < u < R.u_hi and interval_intersect(seg.s_lo + v.s, seg.s_hi + v.s,
                                                              R.s_lo, R.s_hi):
                    ucuts.append(u)
                    for e in (seg.s_lo + v.s, seg.s_hi + v.s):
                        if R.s_lo < e < R.s_hi:
                            scuts.append(e)
        for seg in unstable:
            box = (float(R.u_lo - seg.u_hi), float(R.u_hi - seg.u_lo),
                   float(R.s_lo - seg.s), float(R.s_hi - seg.s))
            for m, n in frame.lattice_in_box(*box):
                v = frame.lattice(m, n).image
                s = seg.s + v.s
                if R.s_lo < s < R.s_hi and interval_intersect(seg.u_lo + v.u, seg.u_hi + v.u,
                                                              R.u_lo, R.u_hi):
                    scuts.append(s)
                    for e in (seg.u_lo + v.u, seg.u_hi + v.u):
                        if R.u_lo < e < R.u_hi:
                            ucuts.append(e)
        ucuts, scuts = _uniq_sorted(ucuts), _uniq_sorted(scuts)
        for i in range(len(ucuts) - 1):
            for j in range(len(scuts) - 1):
                cells.append(UsSquare(ucuts[i], ucuts[i + 1], scuts[j], scuts[j + 1]))

    # adjacency across shared edges (any lattice translate)
    adj = defaultdict(list)  # cell -> [(other, lattice vector, covered_status)]
    for i, c1 in enumerate(cells):
        for j, c2 in enumerate(cells):
            # c2 + w adjacent to the right side of c1, or above c1
            for side in ("u", "s"):
                if side == "u":
                    box = (float(c1.u_hi - c2.u_lo),) * 2 + (float(c1.s_lo - c2.s_hi), float(c1.s_hi - c2.s_lo))
                else:
                    box = (float(c1.u_lo - c2.u_hi), float(c1.u_hi - c2.u_lo)) + (float(c1.s_hi - c2.s_lo),) * 2
                for m, n in frame.lattice_in_box(*box):
                    w = frame.lattice(m, n)
                    t = c2.translate(w.image)
                    if side == "u":
                        if t.u_lo != c1.u_hi:
                            continue
                        ov = interval_intersect(c1.s_lo, c1.s_hi, t.s_lo, t.s_hi)
                        if ov is None:
                            continue
                        full = _covered(frame, "s", c1.u_hi, ov[0], ov[1], stable)
                    else:
                        if t.s_lo != c1.s_hi:
                            continue
                        ov = interval_intersect(c1.u_lo, c1.u_hi, t.u_lo, t.u_hi)
                        if ov is None:
                            continue
                        full = _covered(frame, "u", c1.s_hi, ov[0], ov[1], unstable)
                    adj[i].append((j, w, full))
                    neg = frame.lattice(-m, -n)
                    adj[j].append((i, neg, full))

    lift: dict[int, tuple[int, int]] = {}
    comp: dict[int, int] = {}
    ncomp = 0
    for start in range(len(cells)):
        if start in comp:
            continue
        comp[start] = ncomp
        lift[start] = (0, 0)
        stack = [start]
        while stack:
            i = stack.pop()
            li = lift[i]
            for j, w, full in adj[i]:
                lj = (li[0] + w.m, li[1] + w.n)
                if full:
                    continue
                if j in comp:
                    if lift[j] != lj:
                        raise PartitionError(
                            f"complementary component {ncomp} is not a rectangle "
                            "(it wraps around the torus)")
                    continue
                comp[j] = ncomp
                lift[j] = lj
                stack.append(j)
        ncomp += 1

    # a covered edge inside a component is a slit
    for i, lst in adj.items():
        for j, w, full in lst:
            if full and comp[i] == comp[j]:
                if lift[j] == (lift[i][0] + w.m, lift[i][1] + w.n):
                    raise PartitionError(f"net segment dangles inside component {comp[i]}")

    elements = []
    for k in range(ncomp):
        members = [i for i in range(len(cells)) if comp[i] == k]
        lifted = [cells[i].translate(frame.lattice(*lift[i]).image) for i in members]
        box = UsSquare(min((c.u_lo for c in lifted), key=_qkey), max((c.u_hi for c in lifted), key=_qkey),
                       min((c.s_lo for c in lifted), key=_qkey), max((c.s_hi for c in lifted), key=_qkey))
        total = frame.qn(0)
        for c in lifted:
            total = total + c.area()
        if total != box.area():
            raise PartitionError(f"complementary component {k} is not a rectangle: {box}")
        elements.append(box)
    return UsPartition(fmap, elements, stable, unstable, name=name)


def markov_seed(fmap: ToralAutomorphism) -> UsPartition:
    st, un = markov_seed_net(fmap)
    return build_from_net(fmap, st, un, name="markov-seed")


def non_markov_seed(fmap: ToralAutomorphism, offset: Fraction = Fraction(1, 37)) -> UsPartition:
    st, un = non_markov_net(fmap, offset)
    return build_from_net(fmap, st, un, name=f"non-markov-seed({offset})")


# ---------------------------------------------------------------------------
# refinement


def join(partition_elems: Sequence[UsSquare], other: Sequence[UsSquare], frame: EigenFrame) -> list[UsSquare]:
    out = []
    for e in partition_elems:
        for f in other:
            for _, piece in rect_intersect_torus(e, f, frame):
                out.append(piece)
    return out


def join_partitions(P: UsPartition, R: UsPartition, name: str = "") -> UsPartition:
    """Common refinement of two partitions of the same map."""
    if P.fmap is not R.fmap:
        raise ValueError("partitions of different maps")
    elems = join(P.elements, R.elements, P.frame)
    out = UsPartition(P.fmap, elems, P.stable + R.stable, P.unstable + R.unstable,
                      validate=False, name=name or f"{P.name}^{R.name}")
    if out.total_area() != P.frame.qn(1):
        raise PartitionError("join does not cover the torus")
    return out


def build_partition(fmap: ToralAutomorphism, r, seed: Optional[UsPartition] = None,
                    max_depth: int = 8) -> UsPartition:
    """Us-partition with every diameter bound <= r, refining ``seed`` by
    the join of f^k(seed) for |k| <= m with m as small as possible."""
    r = Fraction(r)
    if r <= 0:
        raise ValueError("r must be positive")
    if seed is None:
        seed = markov_seed(fmap)
    if seed.max_diameter() <= r:
        return seed
    frame = fmap.frame
    elems = list(seed.elements)
    best = float(seed.max_diameter())
    for m in range(1, max_depth + 1):
        fwd = [fmap.apply_rect(e, m) for e in seed.elements]
        bwd = [fmap.apply_rect(e, -m) for e in seed.elements]
        elems = join(join(elems, fwd, frame), bwd, frame)
        d = max(diameter(e, frame) for e in elems)
        best = float(d)
        if d <= r:
            # the join of leaf-bounded partitions has the union of images of the seed net as its net
            st = [StableSegment(s.u * fmap.lam ** k, *sorted((s.s_lo * fmap.mu ** k, s.s_hi * fmap.mu ** k), key=_qkey))
                  for k in range(-m, m + 1) for s in seed.stable]
            un = [UnstableSegment(s.s * fmap.mu ** k, *sorted((s.u_lo * fmap.lam ** k, s.u_hi * fmap.lam ** k), key=_qkey))
                  for k in range(-m, m + 1) for s in seed.unstable]
            return UsPartition(fmap, elems, st, un, name=f"{seed.name}+refine({m})")
    raise RefinementCapError(f"diameter {best:.4g} > {float(r)} after {max_depth} refinements", best)


@dataclass
class Cylinder:
    """One cover component of a cylinder [A_0 ... A_{n-1}].

    ``image`` is f^{n-1} of the piece expressed in the canonical lift of
    A_{n-1}; ``offset`` is the translation with f^{n-1}(x) - offset ∈ image.
    """
    word: tuple[int, ...]
    shifts: tuple[tuple[int, int], ...]
    piece: UsSquare
    image: UsSquare
    offset: PlanePoint


def _step(fmap, elements, cyl_image: UsSquare, offset: PlanePoint, t: Transition):
    img = fmap.apply_rect(cyl_image, 1).translate(PlanePoint(-t.v.image.u, -t.v.image.s))
    new = rect_intersect_cover(img, elements[t.dst])
    if new is None:
        return None
    o = fmap.apply_cover(offset, 1) + t.v.image
    return new.with_id(t.dst), o


def pullback(fmap: ToralAutomorphism, image: UsSquare, offset: PlanePoint, k: int) -> UsSquare:
    """{x : f^k x - offset ∈ image} in the cover."""
    return fmap.apply_rect(image.translate(offset), -k)


@dataclass
class IteratedPartition:
    base: UsPartition
    n: int
    cylinders: dict[tuple[int, ...], list[Cylinder]] = field(default_factory=dict)

    def pieces(self) -> list[UsSquare]:
        return [c.piece for lst in self.cylinders.values() for c in lst]

    def words(self) -> list[tuple[int, ...]]:
        return list(self.cylinders)


def refine(partition: UsPartition, n: int) -> IteratedPartition:
    """All nonempty length-n cylinders, with one exact rectangle per cover component."""
    if n < 1:
        raise ValueError("n must be >= 1")
    fmap = partition.fmap
    els = partition.elements
    zero = PlanePoint(fmap.frame.qn(0), fmap.frame.qn(0))
    layer = [((e.id,), (), e, zero) for e in els]
    for _ in range(n - 1):
        nxt = []
        for word, shifts, img, off in layer:
            for t in partition.transitions[word[-1]]:
                st = _step(fmap, els, img, off, t)
                if st is None:
                    continue
                nxt.append((word + (t.dst,), shifts + ((t.v.m, t.v.n),), st[0], st[1]))
        layer = nxt
    out = IteratedPartition(partition, n)
    for word, shifts, img, off in layer:
        piece = pullback(fmap, img, off, n - 1).with_id(word[0])
        out.cylinders.setdefault(word, []).append(Cylinder(word, shifts, piece, img, off))
    return out


def multiplicity(family: Iterable[UsSquare] | UsPartition | IteratedPartition,
                 frame: Optional[EigenFrame] = None) -> int:
    """max over points x of the number of closures containing x (attained at corners)."""
    if isinstance(family, IteratedPartition):
        frame = family.base.frame
        squares = family.pieces()
    elif isinstance(family, UsPartition):
        frame = family.frame
        squares = family.elements
    else:
        squares = list(family)
        if frame is None:
            raise ValueError("frame required for a bare family of squares")
    if not squares:
        return 0
    loc = Locator(frame, squares)
    best = 1
    seen = set()
    for sq in squares:
        for c in sq.corners():
            p, _ = frame.reduce(c)
            key = (p.u, p.s)
            if key in seen:
                continue
            seen.add(key)
            count = len({idx for idx, _ in loc.locate(p, closed=True)})
            best = max(best, count)
    return best
