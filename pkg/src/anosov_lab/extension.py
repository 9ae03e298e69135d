"""Periodic extension M x Z/T with a fine partition on level 0 and a coarse one elsewhere."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .anosov import ToralAutomorphism
from .partition import UsPartition, build_partition, join_partitions, non_markov_seed
from .symbolic import (BoundaryOrbitError, DepthCapError, LeafInterval, Orbit, Verdict,
                       _symbolic_manifold, verdict_of)


class InconclusiveError(RuntimeError):
    pass


@dataclass
class ExtendedSystem:
    fmap: ToralAutomorphism
    T: int
    Q0: UsPartition
    Q1: UsPartition

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")

    @property
    def element_count(self) -> int:
        return len(self.Q1) + (self.T - 1) * len(self.Q0)

    def step(self, x, level: int, n: int = 1):
        """f_T^n(x, level) on standard rational coordinates."""
        return self.fmap.apply_standard(x[0], x[1], n), (level + n) % self.T

    def partition_at(self, level: int) -> UsPartition:
        return self.Q1 if level % self.T == 0 else self.Q0

    def schedule(self, level: int):
        """Partition used at time t along the orbit of (x, level)."""
        return lambda t: self.partition_at(level + t)

    def labels(self):
        """Elements of Q_T as (level, element id)."""
        out = [(0, e.id) for e in self.Q1.elements]
        for lev in range(1, self.T):
            out.extend((lev, e.id) for e in self.Q0.elements)
        return out

    def manifold(self, x, level: int, axis: str, tolerance=0, max_depth: int = 200) -> LeafInterval:
        return _symbolic_manifold(self.fmap, self.schedule(level), self.T, x, axis,
                                  tolerance, max_depth)


def build_extension(fmap: ToralAutomorphism, T: int, r0_coarse, r1_fine,
                    seed: Optional[UsPartition] = None, fine_seed: Optional[UsPartition] = None,
                    max_depth: int = 8) -> ExtendedSystem:
    """Q0 refines ``seed`` to diameter r0; Q1 is the join of Q0 with a refinement of
    ``fine_seed`` to diameter r1, so Q1 refines Q0.

    A dynamical refinement of the same seed would add no past cuts (its
    extra sides are images of sides Q0 already sees at other times), so the
    fine seed defaults to a non-Markov net with a different offset.
    """
    if Fraction(r1_fine) >= Fraction(r0_coarse):
        raise ValueError("r1_fine must be smaller than r0_coarse")
    if seed is None:
        seed = non_markov_seed(fmap)
    if fine_seed is None:
        fine_seed = non_markov_seed(fmap, FINE_OFFSET)
    Q0 = build_partition(fmap, r0_coarse, seed, max_depth)
    Q1 = join_partitions(Q0, build_partition(fmap, r1_fine, fine_seed, max_depth))
    return ExtendedSystem(fmap, T, Q0, Q1)


FINE_OFFSET = Fraction(-1, 23)


def wilson_interval(k: int, n: int, z: float = 1.96) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = k / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


def rational_samples(count: int, seed: int, denominator: int = 1_000_003) -> list[tuple[Fraction, Fraction]]:
    """Uniform grid points (i/q, j/q), an exact stand-in for Lebesgue samples."""
    rng = np.random.default_rng(seed)
    ij = rng.integers(1, denominator, size=(count, 2))
    return [(Fraction(int(i), denominator), Fraction(int(j), denominator)) for i, j in ij]


@dataclass
class FractionEstimate:
    value: float
    ci: tuple[float, float]
    hits: int
    fails: int
    borderline: int
    skipped: int
    samples: int

    @property
    def borderline_rate(self) -> float:
        return self.borderline / max(1, self.samples)

    def to_dict(self) -> dict:
        return {"value": self.value, "ci_low": self.ci[0], "ci_high": self.ci[1],
                "hits": self.hits, "fails": self.fails, "borderline": self.borderline,
                "skipped": self.skipped, "samples": self.samples}


def _estimate(hits, fails, border, skipped, cap):
    n = hits + fails + border
    if n and border / n > cap:
        raise InconclusiveError(f"borderline rate {border / n:.3f} exceeds cap {cap}")
    return FractionEstimate(hits / n if n else 0.0, wilson_interval(hits, n), hits, fails,
                            border, skipped, n)


def b_fraction(system: ExtendedSystem, sample_count: int, tolerance=0, seed: int = 0,
               max_depth: int = 200, borderline_cap: float = 0.05) -> FractionEstimate:
    """Sampled measure of B_T = {both symbolic manifolds traverse Q_T(x, k)}.

    Lebesgue on the base times uniform levels.  Samples whose orbit hits the
    partition boundary (a null set) are skipped and counted.
    """
    rng = np.random.default_rng([seed, 1])
    levels = rng.integers(0, system.T, size=sample_count)
    pts = rational_samples(sample_count, seed)
    hits = fails = border = skipped = 0
    for x, lev in zip(pts, levels):
        orb = Orbit(system.fmap, x)
        verdicts = []
        try:
            for axis in ("u", "s"):
                try:
                    li = system.manifold(orb, int(lev), axis, tolerance, max_depth)
                except DepthCapError:
                    li = _symbolic_manifold(system.fmap, system.schedule(int(lev)), system.T, orb,
                                            axis, stop_depth=max_depth)
                verdicts.append(verdict_of(li).verdict)
        except BoundaryOrbitError:
            skipped += 1
            continue
        if Verdict.FAILS in verdicts:
            fails += 1
        elif all(v == Verdict.TRAVERSES for v in verdicts):
            hits += 1
        else:
            border += 1
    return _estimate(hits, fails, border, skipped, borderline_cap)


def shortened(system: ExtendedSystem, x, max_depth: int = 200) -> bool:
    """Is the level-0 unstable manifold strictly shorter than W^u_{Q0}(x)?

    The level-0 schedule uses Q1 at times -nT (n >= 1) and Q0 at every other
    time including 0, so the comparison isolates cuts made by the fine
    partition in the past.
    """
    fmap, T, Q0, Q1 = system.fmap, system.T, system.Q0, system.Q1
    orb = x if isinstance(x, Orbit) else Orbit(fmap, x)
    sched = lambda t: Q1 if (t != 0 and t % T == 0) else Q0
    mixed = _symbolic_manifold(fmap, sched, T + 1, orb, "u", 0, max_depth,
                               time0_partition=Q0)
    base = _symbolic_manifold(fmap, lambda t: Q0, 1, orb, "u", 0, max_depth)
    return mixed.lo != base.lo or mixed.hi != base.hi


def shortening_detector(system: ExtendedSystem, sample_count: int, seed: int = 0,
                        max_depth: int = 200) -> FractionEstimate:
    """Fraction of level-0 samples whose unstable manifold is shortened by the fine level."""
    pts = rational_samples(sample_count, seed)
    hits = fails = skipped = 0
    for x in pts:
        try:
            if shortened(system, x, max_depth):
                hits += 1
            else:
                fails += 1
        except BoundaryOrbitError:
            skipped += 1
    return _estimate(hits, fails, 0, skipped, 1.0)


def extension_table(fmap: ToralAutomorphism, Ts: Sequence[int], r0_coarse, r1_fine,
                    sample_count: int, seed: int = 0, base_seed: Optional[UsPartition] = None):
    """Per-T rows (T, B_T fraction, CI, borderline rate, shortening fraction)."""
    rows = []
    ext = build_extension(fmap, 1, r0_coarse, r1_fine, base_seed)
    for T in Ts:
        system = ExtendedSystem(fmap, T, ext.Q0, ext.Q1)
        b = b_fraction(system, sample_count, seed=seed)
        s = shortening_detector(system, sample_count, seed=seed)
        rows.append({"T": T, "b_fraction": b.value, "b_ci_low": b.ci[0], "b_ci_high": b.ci[1],
                     "borderline_rate": b.borderline_rate, "shortening": s.value,
                     "shortening_ci_low": s.ci[0], "shortening_ci_high": s.ci[1]})
    return rows
