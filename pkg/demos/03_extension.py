"""Periodic extension with a fine partition on one level out of T.

B_T is the set where both symbolic manifolds traverse their element.  For
T = 1 the fine partition cuts the manifolds at every time; as T grows the
fine cuts become rare in the past and future, and the shortening detector
(how often level 0 sees a fine cut that the coarse partition does not) decays.
"""
from fractions import Fraction

from anosov_lab.anosov import ToralAutomorphism
from anosov_lab.extension import extension_table

f = ToralAutomorphism([[2, 1], [1, 1]])
rows = extension_table(f, [1, 2, 4, 8], Fraction(3, 5), Fraction(3, 10), 300, seed=0)
print(" T   B_T    95% CI          borderline  shortening")
for r in rows:
    print(f"{r['T']:2d}  {r['b_fraction']:.3f}  [{r['b_ci_low']:.3f}, {r['b_ci_high']:.3f}]"
          f"  {r['borderline_rate']:.3f}       {r['shortening']:.3f}")
