"""Frozen, independently computed expected values (see ``gen_oracles.py``).

TORUS1D: (delta, t, L, value) of the 1-D periodic heat kernel, from the
Jacobi theta function. SPHERE3: (theta, t, value) of the unit S^3 kernel,
from an 80-digit spectral sum. TORUS_BALL: (r, volume) of geodesic balls in
the unit 3-torus, from midpoint counting on a 1200^3 grid (error < 1e-5).
"""

import math

TORUS1D = [
    (0.3, 0.01, 1.0, 0.29733922162601695),
    (0.1, 0.2, 1.0, 1.0006024705967939),
    (0.45, 1.0, 1.0, 0.99999999999999999),
    (0.0, 0.05, 1.0, 1.2785669994156844),
    (0.7, 0.3, 2.0, 0.46956621621175696),
    (1.9, 0.02, 2.0, 1.760326633821497),
]
SPHERE3 = [
    (0.0, 0.02, 8.0970365579104516),
    (0.0, 0.3, 0.18441305670027029),
    (0.0, 1.5, 0.052914546739882797),
    (1e-3, 0.02, 8.0969366950754378),
    (1e-3, 0.3, 0.18441293375827449),
    (1e-3, 1.5, 0.052914545610570638),
    (0.5, 0.02, 0.37102628995001971),
    (0.5, 0.3, 0.15615737104247466),
    (0.5, 1.5, 0.052638107702007155),
    (math.pi / 2, 0.02, 5.1252192187303619e-13),
    (math.pi / 2, 0.3, 0.037062030961447293),
    (math.pi / 2, 1.5, 0.050659658012866661),
    (3.0, 0.02, 2.386324763311885e-47),
    (3.0, 0.3, 0.0016295933450923918),
    (3.0, 1.5, 0.048434693797285011),
    (math.pi, 0.02, 1.0492960056682726e-50),
    (math.pi, 0.3, 0.0015268721379671864),
    (math.pi, 1.5, 0.048412239752269264),
]
TORUS_BALL = [
    (0.6, 0.7979659953703704),
    (0.75, 0.9875911296296296),
]
