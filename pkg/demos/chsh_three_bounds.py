"""The three ceilings of the CHSH statistic.

E = |C(a,b) + C(a2,b) + C(a,b2) - C(a2,b2)| obeys three different bounds
depending on what you allow:

  2          for anything with a master probability over the four
             counterfactual outcomes (drawn at random below, exactly);
  2*sqrt(2)  for the singlet law (reached at the standard angles);
  4          algebraically, reached by the mixture model whose correlator
             is -sgn(a.b), at a configuration where three overlaps are
             negative and one positive.
"""

import math

from lhvlab import MasterProb16, RandomStream, chsh_analytic, chsh_mc, planar_setting

stream = RandomStream(2)
worst = max(MasterProb16.random(stream).chsh_value() for _ in range(2000))
print(f"2000 random master probabilities: max E = {float(worst):.4f}  (bound 2, exact)")

optimal = (planar_setting(0.0), planar_setting(90.0),
           planar_setting(45.0), planar_setting(315.0))
rep = chsh_analytic("singlet", *optimal)
print(f"singlet at 0/90/45/-45 deg:       E = {rep.E:.6f}  (2*sqrt(2) = {2*math.sqrt(2):.6f})")

fig = (planar_setting(0.0), planar_setting(90.0),
       planar_setting(225.0), planar_setting(135.0))
rep = chsh_analytic("mixed", *fig)
mc = chsh_mc("mixed", *fig, 100_000, RandomStream(3))
print(f"sign-rule mixture:                E = {rep.E}  analytic, {mc.E} from MC")

for p in (0.25, 0.5, 0.75, 1.0):
    rep = chsh_analytic("tb-ext2", *optimal, p=p)
    print(f"damped extension p={p:<5}          E = {rep.E:.4f}"
          f"  ({'violates' if rep.exceeds_bell else 'respects'} the bound of 2)")
