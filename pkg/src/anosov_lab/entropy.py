"""Entropy of the truncated graph, Parry measure, leafwise entropy and boundary proximity."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .anosov import ToralAutomorphism
from .coding import Component, MarkovGraph
from .geometry import PlanePoint, QuadraticNumber, UsageError
from .partition import UsPartition
from .symbolic import BoundaryOrbitError, DepthCapError, Orbit, symbolic_manifold


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, residual: float):
        super().__init__(f"{msg} (residual {residual:.3g})")
        self.residual = residual


class PerturbationError(ValueError):
    """A segment endpoint lies on a boundary orbit; move it slightly."""


@dataclass
class EntropyEstimate:
    value: float
    kind: str  # lower_bound_truncation | loop_equation_root | leafwise_empirical
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        v = self.value if math.isfinite(self.value) else None
        return {"value": v, "kind": self.kind, **self.meta}


@dataclass
class MarkovChainMeasure:
    vertices: np.ndarray
    P: sparse.csr_matrix
    pi: np.ndarray
    rho: float

    @property
    def entropy_rate(self) -> float:
        P = self.P.tocoo()
        p = P.data
        return float(-np.sum(self.pi[P.row] * p * np.log(p)))

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.P.sum(axis=1)).ravel()

    def stationarity_residual(self) -> float:
        return float(np.max(np.abs(self.P.T @ self.pi - self.pi)))


def _sub(graph: MarkovGraph, component: Optional[Component]):
    A = graph.adjacency
    if component is None:
        return A.tocsr().astype(float), np.arange(graph.n_vertices)
    v = component.vertices
    return A[v][:, v].tocsr().astype(float), v


def perron(A: sparse.spmatrix, tol: float = 1e-10, max_iter: int = 2_000_000,
           transpose: bool = False) -> tuple[float, np.ndarray]:
    """Perron root and positive eigenvector of an irreducible nonnegative matrix.

    Power iteration on A + I (aperiodic even when A is periodic) stopped by the
    Collatz-Wielandt bracket min (Mx)_i/x_i <= rho(M) <= max (Mx)_i/x_i.
    """
    M = (A.T if transpose else A).tocsr()
    n = M.shape[0]
    x = np.ones(n)
    lo = hi = 0.0
    for it in range(max_iter):
        y = M @ x + x
        ratio = y / x
        lo, hi = ratio.min(), ratio.max()
        if hi - lo <= tol * lo:
            rho = 0.5 * (lo + hi) - 1.0
            return rho, y / y.sum()
        x = y / y.sum()
        # entries decaying to zero indicate a reducible input
        if it % 1000 == 999 and x.min() <= 0:
            break
    raise ConvergenceError("power iteration did not converge", (hi - lo) / max(lo, 1e-300))


def gurevich_entropy_truncated(graph: MarkovGraph, component: Optional[Component] = None,
                               tol: float = 1e-10, max_len: Optional[int] = None) -> EntropyEstimate:
    """log of the spectral radius of the (component of the) truncated graph."""
    A, verts = _sub(graph, component)
    meta = {"vertices": int(len(verts)), "max_len": max_len,
            "component": None if component is None else component.id}
    if A.nnz == 0 or (component is not None and not component.cyclic):
        return EntropyEstimate(-math.inf, "lower_bound_truncation", meta)
    if component is None:
        ncomp, labels = csgraph.connected_components(A, directed=True, connection="strong")
        best = -math.inf
        for c in range(ncomp):
            idx = np.nonzero(labels == c)[0]
            sub = A[idx][:, idx]
            if sub.nnz == 0:
                continue
            rho, _ = perron(sub, tol)
            best = max(best, math.log(rho))
        return EntropyEstimate(best, "lower_bound_truncation", meta)
    rho, _ = perron(A, tol)
    return EntropyEstimate(math.log(rho), "lower_bound_truncation", meta)


def first_return_loop_counts(graph: MarkovGraph, star: int, max_loop_len: int) -> np.ndarray:
    """f_n = number of loops star -> star of length n not visiting star in between."""
    A = graph.adjacency.tocsr().astype(float)
    AT = A.T.tocsr()
    v = np.zeros(graph.n_vertices)
    v[star] = 1.0
    f = np.zeros(max_loop_len + 1)
    for n in range(1, max_loop_len + 1):
        v = AT @ v
        f[n] = v[star]
        v[star] = 0.0
    return f


def loop_equation_entropy(graph: MarkovGraph, star: int, max_loop_len: int) -> EntropyEstimate:
    """-log z* with sum_n f_n z^n = 1 (bisection on (0, 1) to 1e-12)."""
    f = first_return_loop_counts(graph, star, max_loop_len)
    meta = {"star": int(star), "max_loop_len": max_loop_len, "loops": float(f.sum())}
    if f.sum() == 0:
        return EntropyEstimate(-math.inf, "loop_equation_root", meta)
    n = np.arange(len(f))

    def F(z):
        return float(np.sum(f * z ** n)) - 1.0

    if F(1.0) <= 0:
        # at most one loop in total: z* = 1
        return EntropyEstimate(0.0 if F(1.0) == 0 else -math.inf, "loop_equation_root", meta)
    lo, hi = 0.0, 1.0
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if F(mid) < 0:
            lo = mid
        else:
            hi = mid
    z = 0.5 * (lo + hi)
    return EntropyEstimate(-math.log(z), "loop_equation_root", {**meta, "z": z})


def parry_measure(graph: MarkovGraph, component: Optional[Component] = None,
                  tol: float = 1e-12) -> MarkovChainMeasure:
    """Maximal-entropy Markov chain p_ij = A_ij r_j / (rho r_i), pi ~ l r."""
    A, verts = _sub(graph, component)
    ncomp, _ = csgraph.connected_components(A, directed=True, connection="strong")
    if ncomp != 1 or A.nnz == 0:
        raise UsageError("parry_measure needs an irreducible component with a cycle")
    rho, r = perron(A, tol)
    _, l = perron(A, tol, transpose=True)
    C = A.tocoo()
    data = C.data * r[C.col] / (rho * r[C.row])
    P = sparse.csr_matrix((data, (C.row, C.col)), shape=A.shape)
    # renormalise rows against residual rounding
    rs = np.asarray(P.sum(axis=1)).ravel()
    P = sparse.diags(1.0 / rs) @ P
    pi = l * r
    pi = pi / pi.sum()
    return MarkovChainMeasure(verts, P.tocsr(), pi, rho)


def pushforward_cylinder_measure(chain: MarkovChainMeasure, graph: MarkovGraph,
                                 n_elements: int) -> np.ndarray:
    """Mass of each partition element: stationary mass of vertices carrying its symbol."""
    masses = np.zeros(n_elements)
    np.add.at(masses, graph.symbols[chain.vertices], chain.pi)
    return masses


# ---------------------------------------------------------------------------
# leafwise entropy


@dataclass(frozen=True)
class LeafSegment:
    """Unstable segment {start + t e_u : 0 <= t <= length} in eigen-coordinates."""
    start: PlanePoint
    length: QuadraticNumber | Fraction

    @classmethod
    def unit(cls, fmap: ToralAutomorphism, x=(Fraction(1, 3), Fraction(1, 7)), euclidean=1):
        """Segment of Euclidean length ``euclidean`` (rounded down to a rational u-length)."""
        L = Fraction(euclidean) / fmap.frame.norm_u_upper
        return cls(fmap.point(*x), L)


def leaf_pieces(fmap: ToralAutomorphism, partition: UsPartition, segment: LeafSegment, N: int):
    """Cut the segment into its pieces meeting distinct length-N cylinders.

    Returns a list of (word, shifts) per piece, ordered along the segment.
    Exact: pieces are followed through the transitions of the partition.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    frame = partition.frame
    els = partition.elements
    p0, v0 = frame.reduce(segment.start)
    u0, s0 = p0.u, p0.s
    u1 = u0 + segment.length
    # depth 1: elements met by the segment, via lattice translates
    pieces = []
    for e in els:
        for m, n in frame.lattice_in_box(float(e.u_lo - u1), float(e.u_hi - u0),
                                         float(e.s_lo - s0), float(e.s_hi - s0)):
            v = frame.lattice(m, n)
            s = s0 + v.image.s
            if not (e.s_lo < s < e.s_hi):
                if s == e.s_lo or s == e.s_hi:
                    raise PerturbationError("segment lies on an unstable side")
                continue
            a, b = u0 + v.image.u, u1 + v.image.u
            lo = a if e.u_lo < a else e.u_lo
            hi = b if b < e.u_hi else e.u_hi
            if not (lo < hi):
                continue
            if a == e.u_lo or a == e.u_hi or b == e.u_lo or b == e.u_hi:
                raise PerturbationError("segment endpoint on a stable side")
            pieces.append(((e.id,), (), lo, hi, s, a, b))
    lam, mu = fmap.lam, fmap.mu
    for _ in range(N - 1):
        nxt = []
        for word, shifts, lo, hi, s, a, b in pieces:
            E = word[-1]
            L1, H1, S1 = lo * lam, hi * lam, s * mu
            A1, B1 = a * lam, b * lam
            if H1 < L1:
                L1, H1, A1, B1 = H1, L1, B1, A1
            for t in partition.transitions[E]:
                T = els[t.dst]
                vu, vs = t.v.image.u, t.v.image.s
                ss = S1 - vs
                if not (T.s_lo < ss < T.s_hi):
                    if ss == T.s_lo or ss == T.s_hi:
                        raise PerturbationError("segment image lies on an unstable side")
                    continue
                l2, h2 = L1 - vu, H1 - vu
                lo2 = l2 if T.u_lo < l2 else T.u_lo
                hi2 = h2 if h2 < T.u_hi else T.u_hi
                if not (lo2 < hi2):
                    continue
                a2, b2 = A1 - vu, B1 - vu
                for end in (a2, b2):
                    if (end == T.u_lo or end == T.u_hi) and lo2 <= end <= hi2:
                        raise PerturbationError("segment endpoint on a boundary orbit")
                nxt.append((word + (t.dst,), shifts + ((t.v.m, t.v.n),), lo2, hi2, ss, a2, b2))
        pieces = nxt
    return [(w, sh) for w, sh, *_ in pieces]


def leafwise_entropy(fmap: ToralAutomorphism, partition: UsPartition, segment: LeafSegment,
                     N: int) -> EntropyEstimate:
    """(1/N) log #{length-N cylinders meeting the segment}."""
    pieces = leaf_pieces(fmap, partition, segment, N)
    count = len(set(pieces))
    return EntropyEstimate(math.log(count) / N, "leafwise_empirical",
                           {"N": N, "cylinders": count, "pieces": len(pieces)})


def markov_cut_count(fmap: ToralAutomorphism, segment: LeafSegment, N: int) -> int:
    """Pieces of the segment cut by f^{-(N-1)} of the stable net segment {u = 0, s in [-b, d]}.

    Independent lattice-point count for the two-rectangle Markov seed, whose
    stable boundary is that segment: a point (u, s0) of the leaf is a cut iff
    (u, s0) - w lies on the segment for a lattice vector w, i.e. w_u = u and
    s0 - w_s lies in mu^{-(N-1)} [-b, d].
    """
    from .partition import lattice_basis
    frame = fmap.frame
    (w1, w2) = lattice_basis(fmap)
    b, d = float(w1.image.s), float(w2.image.s)
    m_ = float(fmap.mu) ** -(N - 1)
    I = sorted((-b * m_, d * m_))
    u0, s0 = float(segment.start.u), float(segment.start.s)
    u1 = u0 + float(segment.length)
    lo_s, hi_s = s0 - I[1], s0 - I[0]
    count = 0
    # lattice points (m, n) = x e_u + y e_s with x in (u0, u1), y in (lo_s, hi_s)
    corners = [frame.to_standard_float(x, y) for x in (u0, u1) for y in (lo_s, hi_s)]
    mlo = math.floor(min(c[0] for c in corners)) - 1
    mhi = math.ceil(max(c[0] for c in corners)) + 1
    ur, sr = frame._u_row_f, frame._s_row_f
    for m in range(mlo, mhi + 1):
        # u(m, n) = ur0 m + ur1 n in (u0, u1)
        if ur[1] > 0:
            nlo, nhi = (u0 - ur[0] * m) / ur[1], (u1 - ur[0] * m) / ur[1]
        else:
            nlo, nhi = (u1 - ur[0] * m) / ur[1], (u0 - ur[0] * m) / ur[1]
        for n in range(math.floor(nlo) - 1, math.ceil(nhi) + 2):
            fu = ur[0] * m + ur[1] * n
            fs = sr[0] * m + sr[1] * n
            if u0 < fu < u1 and lo_s < fs < hi_s:
                count += 1
    return count + 1


# ---------------------------------------------------------------------------
# boundary proximity


def proximity_exact_markov(fmap: ToralAutomorphism, partition: UsPartition, r1: float) -> float:
    """Lebesgue measure of {x : leaf distance to the stable sides of Q(x) < r1} (Markov case)."""
    if not partition.is_markov:
        raise UsageError("exact proximity formula needs a Markov partition")
    nu = fmap.frame.norm_u
    det = abs(float(fmap.frame.det))
    total = 0.0
    for e in partition.elements:
        w = float(e.u_extent)
        total += det * float(e.s_extent) * min(w, 2 * r1 / nu)
    return total


@dataclass
class ProximityRow:
    r1: float
    fraction: float
    hits: int
    borderline: int
    samples: int
    skipped: int
    inconclusive: bool = False


def boundary_proximity_stats(fmap: ToralAutomorphism, partition: UsPartition,
                             r1_grid: Sequence[float], sample_count: int, seed: int = 0,
                             borderline_cap: float = 0.05, max_depth: int = 200) -> list[ProximityRow]:
    """Sampled fraction of points within leaf distance r1 of an endpoint of W^u_Q(x)."""
    from .extension import rational_samples
    pts = rational_samples(sample_count, seed)
    inner, outer = [], []
    skipped = 0
    for x in pts:
        try:
            li = symbolic_manifold(fmap, partition, x, "u", max_depth=max_depth)
        except DepthCapError:
            li = symbolic_manifold(fmap, partition, x, "u", depth=max_depth)
        except BoundaryOrbitError:
            skipped += 1
            continue
        lo_d, hi_d = li.endpoint_distance()
        inner.append(lo_d)
        outer.append(hi_d)
    inner, outer = np.array(inner), np.array(outer)
    rows = []
    n = len(inner)
    for r1 in r1_grid:
        sure = int(np.sum(outer < r1))
        border = int(np.sum((outer >= r1) & (inner < r1)))
        rows.append(ProximityRow(float(r1), sure / max(1, n), sure, border, n, skipped,
                                 border / max(1, n) > borderline_cap))
    return rows
