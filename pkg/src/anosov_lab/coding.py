"""Crossing certificates, first-return words and the countable Markov graph.

A path of transitions E_0 -> ... -> E_n is *crossing* when the s-interval of
E_0 is never cut along it (the time-0 piece spans E_0 in s) and its final
image spans E_n in u.  Crossing paths compose: a horizontal full strip meets a
vertical full strip in a nonempty rectangle.  A time 0 < k < n is a junction
of a crossing path when the prefix up to k is u-full and the suffix from k,
started from the full s-interval of E_k, is never cut.  First-return words
are crossing paths with no junction, i.e. the pieces between consecutive
marked times.  Words are identified by their symbols together with the
lattice shift of each transition, since an element's image may meet another
element in several components.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .anosov import ToralAutomorphism
from .geometry import PlanePoint, QuadraticNumber, UsSquare, qmax, qmin, rect_intersect_cover
from .partition import UsPartition, _step, pullback


class ContradictionError(RuntimeError):
    """Composition of crossings came out empty."""


class StructuralViolation(RuntimeError):
    """A cyclic component of the graph without a starred vertex."""


# ---------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class CrossingCertificate:
    """Depth-(d_p, d_f) cylinder around time 0 with full crossings in both directions.

    ``past``/``future`` are transition paths ((symbol, (m, n)), ...) ending /
    starting at ``symbol``.  The past image spans the element in u with
    s-height ``s_margin``; the future pullback spans it in s with u-width
    ``u_margin`` (Euclidean lengths, rational lower bounds).
    """
    symbol: int
    past: tuple
    future: tuple
    u_margin: Fraction
    s_margin: Fraction
    piece: UsSquare

    @property
    def d_p(self) -> int:
        return len(self.past)

    @property
    def d_f(self) -> int:
        return len(self.future)

    def word(self) -> tuple[int, ...]:
        return tuple(p[0] for p in self.past) + (self.symbol,) + tuple(f[0] for f in self.future)


class CertificateList(list):
    """Certificates plus the rejected cylinders and their cut witnesses."""

    def __init__(self, items=(), rejected=()):
        super().__init__(items)
        self.rejected = list(rejected)

    @property
    def symbols(self) -> set[int]:
        return {c.symbol for c in self}


def _paths_forward(partition: UsPartition, start: int, depth: int):
    """(edges, image, offset) for every component of length-(depth+1) cylinders from ``start``."""
    fmap, els = partition.fmap, partition.elements
    zero = PlanePoint(partition.frame.qn(0), partition.frame.qn(0))
    layer = [((), els[start], zero)]
    for _ in range(depth):
        nxt = []
        for edges, img, off in layer:
            for t in partition.transitions[img.id]:
                st = _step(fmap, els, img, off, t)
                if st is not None:
                    nxt.append((edges + ((t.dst, (t.v.m, t.v.n)),), st[0], st[1]))
        layer = nxt
    return layer


def _paths_backward(partition: UsPartition, start: int, depth: int):
    from .symbolic import _back_transitions, _step_back
    fmap, els = partition.fmap, partition.elements
    zero = PlanePoint(partition.frame.qn(0), partition.frame.qn(0))
    back = _back_transitions(partition)
    layer = [((), els[start], zero)]
    for _ in range(depth):
        nxt = []
        for edges, img, off in layer:
            for t in back[img.id]:
                st = _step_back(fmap, els, img, off, t)
                if st is not None:
                    nxt.append((((t.dst, (t.v.m, t.v.n)),) + edges, st[0], st[1]))
        layer = nxt
    return layer


def certify_crossing_set(fmap: ToralAutomorphism, partition: UsPartition, d_p: int = 1,
                         d_f: int = 1, tolerance=0) -> CertificateList:
    """Cylinders [A_{-d_p} .. A_{d_f}] whose past spans A_0 in u and future spans it in s.

    Every point of a certified cylinder has depth-(d_p, d_f) symbolic
    manifolds traversing A_0.  Cylinders with a margin below ``tolerance``
    are dropped; cut cylinders are kept in ``.rejected`` with the cut size.
    """
    if d_p < 1 or d_f < 1:
        raise ValueError("depths must be >= 1")
    tolerance = Fraction(tolerance)
    frame = partition.frame
    certs, rejected = [], []
    for e in partition.elements:
        fulls_f = []
        for edges, img, off in _paths_forward(partition, e.id, d_f):
            piece = pullback(fmap, img, off, d_f)
            cut = (piece.s_lo - e.s_lo) + (e.s_hi - piece.s_hi)
            if cut.sign() == 0:
                fulls_f.append((edges, piece))
            else:
                rejected.append({"symbol": e.id, "direction": "future", "path": edges,
                                 "axis": "s", "cut": float(cut)})
        fulls_p = []
        for edges, img, off in _paths_backward(partition, e.id, d_p):
            piece = fmap.apply_rect(img.translate(off), d_p)
            cut = (piece.u_lo - e.u_lo) + (e.u_hi - piece.u_hi)
            if cut.sign() == 0:
                fulls_p.append((edges, piece))
            else:
                rejected.append({"symbol": e.id, "direction": "past", "path": edges,
                                 "axis": "u", "cut": float(cut)})
        for pe, pp in fulls_p:
            s_margin = pp.s_extent.bounds()[0] * frame.norm_s_lower
            for fe, fp in fulls_f:
                u_margin = fp.u_extent.bounds()[0] * frame.norm_u_lower
                if min(u_margin, s_margin) < tolerance or min(u_margin, s_margin) <= 0:
                    continue
                piece = rect_intersect_cover(pp, fp)
                certs.append(CrossingCertificate(e.id, pe, fe, u_margin, s_margin, piece))
    return CertificateList(certs, rejected)


# ---------------------------------------------------------------------------
# first-return words


@dataclass(frozen=True)
class FirstReturnWord:
    """A_0 ... A_n with the lattice shift of each transition.

    ``piece`` is the time-0 witness (spans A_0 in s); ``image`` is its n-th
    iterate in the lift of A_n, spanning A_n in u, with f^n(x) - offset in image.
    """
    symbols: tuple[int, ...]
    shifts: tuple[tuple[int, int], ...]
    piece: UsSquare = field(compare=False, repr=False)
    image: UsSquare = field(compare=False, repr=False)
    offset: PlanePoint = field(compare=False, repr=False)

    @property
    def n(self) -> int:
        return len(self.symbols) - 1

    def __len__(self) -> int:
        return len(self.symbols)

    @property
    def key(self):
        return self.symbols, self.shifts


class _Pieces:
    """Preimages f^{-j}(side) of unstable sides lying inside element interiors.

    An s-interval in element E can only be cut j steps later if the strip it
    spans meets such a piece of depth j, which is what the search prunes on.
    """

    def __init__(self, partition: UsPartition, depth: int, pad: float = 1e-9):
        fmap, frame = partition.fmap, partition.frame
        els = partition.elements
        boxes = np.array([e.float_box() for e in els])
        ul, uh, sl, sh = boxes.T
        R = 5
        mn = np.array([(m, n) for m in range(-R, R + 1) for n in range(-R, R + 1)])
        V = np.array([frame.to_eigen_float(m, n) for m, n in mn])
        lam, mu = float(fmap.lam), float(fmap.mu)
        sides = set()
        for e in els:
            for s in (e.s_lo, e.s_hi):
                sides.add((s, e.u_lo, e.u_hi))
        sides = list(sides)
        per = defaultdict(list)
        for s, a, b in sides:
            sf, af, bf = float(s), float(a), float(b)
            for j in range(1, depth + 1):
                s1 = sf * mu ** -j
                u1, u2 = sorted((af * lam ** -j, bf * lam ** -j))
                # move the segment next to the unit square before the translate search
                x, y = frame.to_standard_float((u1 + u2) / 2, s1)
                base = (math.floor(x), math.floor(y))
                bu, bs = frame.to_eigen_float(*base)
                s1, u1, u2 = s1 - bs, u1 - bu, u2 - bu
                S = s1 + V[:, 1][None, :]
                ok = ((S > sl[:, None] - pad) & (S < sh[:, None] + pad)
                      & (u1 + V[:, 0][None, :] < uh[:, None] + pad)
                      & (u2 + V[:, 0][None, :] > ul[:, None] - pad))
                for ei, vi in zip(*np.nonzero(ok)):
                    sv = S[0, vi]
                    if min(sv - sl[ei], sh[ei] - sv) < 1e-7:
                        m, n = mn[vi]
                        exact = s * fmap.mu ** -j + frame.lattice(int(m) - base[0], int(n) - base[1]).image.s
                        e = els[ei]
                        if not (e.s_lo < exact < e.s_hi):
                            continue
                    per[ei].append((j, sv, u1 + V[vi, 0], u2 + V[vi, 0]))
        self.by_element = {k: np.array(v) for k, v in per.items()}
        self.pad = pad

    def may_cut(self, elem: int, u_lo: float, u_hi: float, c_lo: float, c_hi: float, within: int) -> bool:
        arr = self.by_element.get(elem)
        if arr is None:
            return False
        pad = self.pad
        hit = ((arr[:, 0] <= within) & (arr[:, 1] > c_lo - pad) & (arr[:, 1] < c_hi + pad)
               & (arr[:, 2] < u_hi + pad) & (arr[:, 3] > u_lo - pad))
        return bool(hit.any())


@dataclass
class EnumerationStats:
    states: int = 0
    pruned: int = 0
    words: int = 0
    by_length: dict = field(default_factory=dict)
    diagnostic: str = ""


def _contained(lo, hi, E_lo, E_hi) -> bool:
    return not (lo < E_lo) and not (E_hi < hi)


def enumerate_first_return_words(fmap: ToralAutomorphism, partition: UsPartition,
                                 certificates: Sequence[CrossingCertificate], max_len: int,
                                 stats: Optional[EnumerationStats] = None,
                                 prune: bool = True) -> list[FirstReturnWord]:
    """All first-return words with 1 <= n <= max_len, by depth-first search over exact strips.

    State along a path: the u-interval image U of A_0, the s-interval S of the
    piece (must stay uncut), and the oldest surviving junction candidate c.
    Later candidates contain earlier ones, so all are dead exactly when the
    oldest is; a path with a candidate that provably cannot die within the
    remaining steps is abandoned (``prune=False`` explores every path).
    """
    if not certificates:
        raise ValueError("empty certificate list")
    marked = {c.symbol for c in certificates}
    els = partition.elements
    trans = partition.transitions
    lam, mu = fmap.lam, fmap.mu
    pieces = _Pieces(partition, max_len)
    stats = stats if stats is not None else EnumerationStats()
    found = []

    def step_interval(lo, hi, scale, shift):
        a, b = lo * scale - shift, hi * scale - shift
        return (a, b) if not (b < a) else (b, a)

    for start in sorted(marked):
        E0 = els[start]
        stack = [(0, start, E0.u_lo, E0.u_hi, E0.s_lo, E0.s_hi, None, ())]
        while stack:
            t, cur, Ul, Uh, Sl, Sh, cand, path = stack.pop()
            stats.states += 1
            for tr in trans[cur]:
                E = els[tr.dst]
                vu, vs = tr.v.image.u, tr.v.image.s
                Sl2, Sh2 = step_interval(Sl, Sh, mu, vs)
                if not _contained(Sl2, Sh2, E.s_lo, E.s_hi):
                    continue
                a, b = step_interval(Ul, Uh, lam, vu)
                Ul2, Uh2 = qmax(a, E.u_lo), qmin(b, E.u_hi)
                if not (Ul2 < Uh2):
                    continue
                c2 = None
                if cand is not None:
                    cl, ch = step_interval(cand[0], cand[1], mu, vs)
                    if _contained(cl, ch, E.s_lo, E.s_hi):
                        c2 = (cl, ch)
                t2 = t + 1
                path2 = path + ((tr.dst, (tr.v.m, tr.v.n)),)
                full = Ul2 == E.u_lo and Uh2 == E.u_hi and tr.dst in marked
                if full:
                    if c2 is None:
                        found.append((start, path2))
                        c2 = (E.s_lo, E.s_hi)
                if t2 >= max_len:
                    continue
                if prune and c2 is not None and not pieces.may_cut(
                        tr.dst, float(Ul2), float(Uh2), float(c2[0]), float(c2[1]), max_len - t2):
                    stats.pruned += 1
                    continue
                stack.append((t2, tr.dst, Ul2, Uh2, Sl2, Sh2, c2, path2))
    words = [_realise(fmap, partition, start, path) for start, path in found]
    words.sort(key=lambda w: (w.n, w.symbols, w.shifts))
    stats.words = len(words)
    for w in words:
        stats.by_length[w.n] = stats.by_length.get(w.n, 0) + 1
    if not words:
        stats.diagnostic = f"no first-return word of length <= {max_len}"
    return words


def _realise(fmap, partition, start, path) -> FirstReturnWord:
    els = partition.elements
    frame = partition.frame
    img = els[start]
    off = PlanePoint(frame.qn(0), frame.qn(0))
    for dst, (m, n) in path:
        v = frame.lattice(m, n)
        im = fmap.apply_rect(img, 1).translate(PlanePoint(-v.image.u, -v.image.s))
        img = rect_intersect_cover(im, els[dst]).with_id(dst)
        off = fmap.apply_cover(off, 1) + v.image
    piece = pullback(fmap, img, off, len(path)).with_id(start)
    return FirstReturnWord((start,) + tuple(p[0] for p in path), tuple(p[1] for p in path),
                           piece, img, off)


def is_crossing(word: FirstReturnWord, partition: UsPartition) -> bool:
    """Time-0 piece spans A_0 in s and the final image spans A_n in u."""
    E0, En = partition.elements[word.symbols[0]], partition.elements[word.symbols[-1]]
    return (word.piece.s_lo == E0.s_lo and word.piece.s_hi == E0.s_hi
            and word.image.u_lo == En.u_lo and word.image.u_hi == En.u_hi)


def junction_times(fmap: ToralAutomorphism, partition: UsPartition, symbols, shifts,
                   marked: Optional[set] = None) -> list[int]:
    """Times 0 < k < n at which a path splits into two crossing paths."""
    n = len(symbols) - 1
    out = []
    for k in range(1, n):
        if marked is not None and symbols[k] not in marked:
            continue
        pre = _realise(fmap, partition, symbols[0], tuple(zip(symbols[1:k + 1], shifts[:k])))
        Ek = partition.elements[symbols[k]]
        if not (pre.image.u_lo == Ek.u_lo and pre.image.u_hi == Ek.u_hi):
            continue
        suf = _realise(fmap, partition, symbols[k], tuple(zip(symbols[k + 1:], shifts[k:])))
        if suf.piece.s_lo == Ek.s_lo and suf.piece.s_hi == Ek.s_hi:
            out.append(k)
    return out


# ---------------------------------------------------------------------------
# composition of crossings


def compose_crossings(chain: Sequence[tuple[UsSquare, int, PlanePoint]], fmap: ToralAutomorphism) -> UsSquare:
    """Time-0 rectangle of points following each crossing piece in turn.

    ``chain`` holds (H_i, n_i, o_i): H_i spans its first element in s and
    f^{n_i}(H_i) - o_i spans the next piece's element in u.  Returns the
    exact intersection of f^{-(n_1+...+n_{i-1})} H_i, checked to span the
    first element in s and to end spanning the last element in u.
    """
    if not chain:
        raise ValueError("empty chain")
    H0, n0, o0 = chain[0]
    img = fmap.apply_rect(H0, n0).translate(PlanePoint(-o0.u, -o0.s))
    off = o0
    total = n0
    for H, n, o in chain[1:]:
        cut = rect_intersect_cover(img, H)
        if cut is None:
            raise ContradictionError(f"empty composition after {total} steps")
        img = fmap.apply_rect(cut, n).translate(PlanePoint(-o.u, -o.s))
        off = fmap.apply_cover(off, n) + o
        total += n
    witness = pullback(fmap, img, off, total)
    if not (witness.s_lo == H0.s_lo and witness.s_hi == H0.s_hi):
        raise ContradictionError("composition does not span the first piece in s")
    last = chain[-1][0]
    full = fmap.apply_rect(last, chain[-1][1]).translate(PlanePoint(-chain[-1][2].u, -chain[-1][2].s))
    if not (img.u_lo == full.u_lo and img.u_hi == full.u_hi):
        raise ContradictionError("composition does not span the last element in u")
    return witness


def word_chain(words: Sequence[FirstReturnWord]):
    return [(w.piece, w.n, w.offset) for w in words]


# ---------------------------------------------------------------------------
# graph


@dataclass
class MarkovGraph:
    words: list[FirstReturnWord]
    vertices: list[tuple[int, int]]          # (word index, k), 1 <= k <= n
    symbols: np.ndarray                      # vertex -> partition element A_{k-1}
    adjacency: sparse.csr_matrix
    stars: np.ndarray                        # vertex indices of (w, 1)
    junction_rule_disagreements: int = 0

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def to_json(self) -> dict:
        A = self.adjacency.tocoo()
        return {"words": [{"symbols": list(w.symbols), "shifts": [list(s) for s in w.shifts]}
                          for w in self.words],
                "vertices": [[int(w), int(k)] for w, k in self.vertices],
                "symbols": [int(s) for s in self.symbols],
                "stars": [int(s) for s in self.stars],
                "edges": [[int(i), int(j)] for i, j in zip(A.row, A.col)],
                "junction_rule_disagreements": self.junction_rule_disagreements}


def build_graph(words: Sequence[FirstReturnWord]) -> MarkovGraph:
    """Vertices (w, k), chain edges inside each word, junction edges w -> w'.

    Junctions use the symbol rule (last symbol of w = first of w').  The
    concatenation rule asks that A_0..A_{n-1} B_0 be a first-return word,
    which is w itself once the symbols match, so the two rules are compared
    and any disagreement counted.
    """
    words = list(words)
    vertices, syms, stars = [], [], []
    first = {}
    for wi, w in enumerate(words):
        first[wi] = len(vertices)
        stars.append(len(vertices))
        for k in range(1, w.n + 1):
            vertices.append((wi, k))
            syms.append(w.symbols[k - 1])
    keys = {w.key for w in words}
    by_start = defaultdict(list)
    for wi, w in enumerate(words):
        by_start[w.symbols[0]].append(wi)
    rows, cols = [], []
    disagree = 0
    for wi, w in enumerate(words):
        base = first[wi]
        for k in range(1, w.n):
            rows.append(base + k - 1)
            cols.append(base + k)
        last = base + w.n - 1
        for wj in by_start[w.symbols[-1]]:
            # concatenation rule: A_0 .. A_{n-1} B_0 with the same shifts is w
            concat_ok = (w.symbols[:-1] + (words[wj].symbols[0],), w.shifts) in keys
            if not concat_ok:
                disagree += 1
                continue
            rows.append(last)
            cols.append(first[wj])
    n = len(vertices)
    A = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    A.sum_duplicates()
    return MarkovGraph(words, vertices, np.array(syms, dtype=np.int64), A,
                       np.array(stars, dtype=np.int64), disagree)


@dataclass
class Component:
    vertices: np.ndarray
    stars: int
    cyclic: bool
    positive_entropy: bool = False
    id: int = 0


def components(graph: MarkovGraph, check: bool = True) -> list[Component]:
    """Strongly connected components, flagged by star count and cyclicity."""
    n = graph.n_vertices
    if n == 0:
        return []
    ncomp, labels = csgraph.connected_components(graph.adjacency, directed=True, connection="strong")
    star = np.zeros(n, dtype=bool)
    star[graph.stars] = True
    A = graph.adjacency.tocoo()
    internal = np.zeros(ncomp, dtype=np.int64)
    same = labels[A.row] == labels[A.col]
    np.add.at(internal, labels[A.row[same]], 1)
    out = []
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(ncomp + 1))
    for c in range(ncomp):
        verts = order[bounds[c]:bounds[c + 1]]
        cyclic = internal[c] > 0
        comp = Component(verts, int(star[verts].sum()), bool(cyclic), id=c)
        if cyclic and check and comp.stars == 0:
            raise StructuralViolation(f"cyclic component {c} ({len(verts)} vertices) has no star")
        # a finite strongly connected graph with a cycle has positive entropy
        # iff it is not a single cycle: more edges than vertices
        comp.positive_entropy = bool(cyclic and internal[c] > len(verts))
        out.append(comp)
    return out
