"""Counting how an unstable segment is cut, and how often orbits pass near sides.

On the Markov partition the pieces of a segment under the join of f^{-k}Q
are counted exactly and checked against a lattice-point count.  The count
grows like C lambda^N with C below 1, so (1/N) log(count) reaches log(lambda)
slowly.
"""
import math

from anosov_lab.anosov import ToralAutomorphism
from anosov_lab.entropy import (LeafSegment, boundary_proximity_stats, leafwise_entropy, markov_cut_count,
                                proximity_exact_markov)
from anosov_lab.partition import markov_seed

f = ToralAutomorphism([[2, 1], [1, 1]])
P = markov_seed(f)
seg = LeafSegment.unit(f)
print(" N   pieces   oracle   (1/N) log   count / lambda^N")
for N in (1, 2, 4, 8, 12):
    est = leafwise_entropy(f, P, seg, N)
    print(f"{N:2d}  {est.meta['pieces']:7d}  {markov_cut_count(f, seg, N):7d}   {est.value:.4f}"
          f"      {est.meta['pieces'] / float(f.stretch) ** N:.4f}")
print(f"log lambda = {f.h_top:.4f}")

print("\n r1      Monte Carlo  exact")
for row in boundary_proximity_stats(f, P, [0.001, 0.01, 0.1], 20_000, 0):
    print(f"{row.r1:<7}  {row.fraction:.4f}       {proximity_exact_markov(f, P, row.r1):.4f}")
