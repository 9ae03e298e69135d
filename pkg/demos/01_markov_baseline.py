"""Cat map on its two-rectangle Markov partition.

Every transition is already a crossing, so the first-return words are the
five transitions and the graph is the transition graph itself.  The Parry
measure of that graph pushes forward to Lebesgue measure on the partition.
"""
import numpy as np

from anosov_lab.anosov import ToralAutomorphism
from anosov_lab.coding import build_graph, certify_crossing_set, components, enumerate_first_return_words
from anosov_lab.entropy import gurevich_entropy_truncated, parry_measure, pushforward_cylinder_measure
from anosov_lab.partition import markov_seed

f = ToralAutomorphism([[2, 1], [1, 1]])
P = markov_seed(f)
print(f"{f}: lambda = {float(f.lam):.6f}, h_top = {f.h_top:.10f}")
print(f"partition: {P}, transition counts\n{P.transition_counts()}")

certs = certify_crossing_set(f, P)
words = enumerate_first_return_words(f, P, certs, 6)
print(f"{len(words)} first-return words:", [w.symbols for w in words])

G = build_graph(words)
comp = next(c for c in components(G) if c.positive_entropy)
h = gurevich_entropy_truncated(G, comp).value
print(f"Gurevich entropy {h:.10f} (error {abs(h - f.h_top):.1e})")

chain = parry_measure(G, comp)
mass = pushforward_cylinder_measure(chain, G, len(P))
areas = np.array([float(a) for a in P.areas()])
print("Parry pushforward:", np.round(mass, 10), " element areas:", np.round(areas, 10))
