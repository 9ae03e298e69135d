"""Entropy from a non-Markov partition.

The seed net is shifted off the Markov net, so no refinement of it is
Markov.  First-return words still give a countable graph whose truncations
approach log(lambda) from below.
"""
import time
from fractions import Fraction

import numpy as np

from anosov_lab.anosov import ToralAutomorphism
from anosov_lab.coding import (EnumerationStats, build_graph, certify_crossing_set, components,
                               enumerate_first_return_words)
from anosov_lab.entropy import gurevich_entropy_truncated, parry_measure, pushforward_cylinder_measure
from anosov_lab.partition import build_partition, non_markov_seed

f = ToralAutomorphism([[2, 1], [1, 1]])
P = build_partition(f, Fraction(3, 10), non_markov_seed(f))
print(f"partition: {P}, diameter bound {float(P.max_diameter()):.3f}")

certs = certify_crossing_set(f, P)
print(f"{len(certs)} crossing certificates on {len(certs.symbols)} symbols, {len(certs.rejected)} cut cylinders")

t = time.perf_counter()
stats = EnumerationStats()
words = enumerate_first_return_words(f, P, certs, 12, stats)
print(f"{len(words)} words up to length 12 in {time.perf_counter() - t:.1f}s ({stats.pruned} branches pruned)")

print(" L  vertices  entropy        gap")
for L in (2, 4, 6, 8, 10, 12):
    G = build_graph([w for w in words if w.n <= L])
    comps = components(G)
    pos = [c for c in comps if c.positive_entropy]
    h = gurevich_entropy_truncated(G, pos[0]).value if pos else float("nan")
    print(f"{L:2d}  {G.n_vertices:8d}  {h:.10f}  {f.h_top - h:.2e}   positive components: {len(pos)}")

chain = parry_measure(G, pos[0])
mass = pushforward_cylinder_measure(chain, G, len(P))
dev = np.max(np.abs(mass - [float(a) for a in P.areas()]))
print(f"max |pushforward - area| over {len(P)} elements: {dev:.2e}")
