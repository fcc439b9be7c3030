"""Entropy and area growth of the test family in the round 3-sphere."""

import math

from mcflab import Ambient
from mcflab.functionals import equivalence_check, li_yau_check
from mcflab.shapes import clifford_torus, equator, geodesic_sphere

family = {f"geodesic sphere {k}": geodesic_sphere(math.pi / k, 3) for k in (6, 4, 3)}
family.update({"equator": equator(3), "clifford torus": clifford_torus(32)})
rep = equivalence_check(list(family.values()))
for name, lam, kap, ratio in zip(family, rep.details["lambda"], rep.details["kappa"], rep.details["ratio"]):
    print(f"{name:22s} lambda={lam:.4f} kappa={kap:.4f} lambda/kappa={ratio:.4f}")
print("spread", rep.details["spread"], "violations", rep.violations)
ly = li_yau_check(Ambient.sphere3(), n_samples=1000)
print(f"Li-Yau constants on S^3: c_low={ly.c_low:.4f} c_up={ly.c_up:.4f}")
