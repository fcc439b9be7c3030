"""Regenerate the frozen values in ``oracles.py``.

Independent of the package: mpmath theta functions and high-precision
spectral sums for the kernels, brute-force grid counting for the torus
ball volume. Run with ``python3 tests/gen_oracles.py``.
"""

import mpmath as mp
import numpy as np

mp.mp.dps = 80


def torus1d(delta, t, L):
    q = mp.e ** (-4 * mp.pi**2 * t / L**2)
    return mp.jtheta(3, mp.pi * delta / L, q) / L


def sphere3(theta, t):
    theta = mp.mpf(theta)
    if theta == 0:
        term = lambda j: j * j * mp.e ** (-(j * j - 1) * t)  # noqa: E731
    elif abs(theta - mp.pi) < mp.mpf("1e-30"):
        term = lambda j: (-1) ** (j + 1) * j * j * mp.e ** (-(j * j - 1) * t)  # noqa: E731
    else:
        term = lambda j: j * mp.sin(j * theta) / mp.sin(theta) * mp.e ** (-(j * j - 1) * t)  # noqa: E731
    # explicit sum: terms past j = 400 are below e^{-3000} for t >= 0.02
    return mp.fsum(term(j) for j in range(1, 401)) / (2 * mp.pi**2)


def torus_ball_volume(r, n=300):
    # octant [0, 1/2]^3 of the unit torus around the origin, midpoint grid
    c = (np.arange(n) + 0.5) / (2 * n)
    count = 0
    for x in c:
        count += int(np.count_nonzero(x * x + c[:, None] ** 2 + c[None, :] ** 2 < r * r))
    return 8 * count / (2 * n) ** 3


if __name__ == "__main__":
    print("TORUS1D = [")
    for d, t, L in [(0.3, 0.01, 1.0), (0.1, 0.2, 1.0), (0.45, 1.0, 1.0), (0.0, 0.05, 1.0), (0.7, 0.3, 2.0), (1.9, 0.02, 2.0)]:
        print(f"    ({d!r}, {t!r}, {L!r}, {mp.nstr(torus1d(mp.mpf(d), mp.mpf(t), mp.mpf(L)), 17)}),")
    print("]")
    print("SPHERE3 = [")
    for th, thtxt in [(0, "0.0"), (1e-3, "1e-3"), (0.5, "0.5"), (mp.pi / 2, "math.pi / 2"), (3.0, "3.0"), (mp.pi, "math.pi")]:
        for t in ["0.02", "0.3", "1.5"]:
            print(f"    ({thtxt}, {t}, {mp.nstr(sphere3(th, mp.mpf(t)), 17)}),")
    print("]")
    print("TORUS_BALL = [")
    for r in (0.6, 0.75):
        print(f"    ({r!r}, {torus_ball_volume(r, 600)!r}),")
    print("]")
