"""Model ambient manifolds: Euclidean space, flat tori and the unit round 3-sphere.

Points are plain float arrays in the ambient chart. Flat-torus coordinates live
in the fundamental domain ``[0, L_i)``; the round sphere is stored extrinsically
as unit vectors of R^4. All geometric functions broadcast over leading axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, special
from scipy.stats import qmc

EUCLIDEAN = "euclidean"
TORUS = "torus"
SPHERE3 = "sphere3"

_KINDS = (EUCLIDEAN, TORUS, SPHERE3)


@dataclass(frozen=True)
class Ambient:
    """One of the three model ambients.

    Use the constructors :meth:`euclidean`, :meth:`torus` and :meth:`sphere3`
    (or :func:`parse_ambient`) rather than building instances by hand.
    """

    kind: str
    dim: int
    periods: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown ambient kind {self.kind!r}")
        if self.dim < 2:
            raise ValueError("ambient dimension must be at least 2")
        if self.kind == TORUS:
            if self.periods is None or len(self.periods) != self.dim:
                raise ValueError("flat torus needs one period per axis")
            if not all(p > 0 and math.isfinite(p) for p in self.periods):
                raise ValueError("flat torus periods must be strictly positive")
        elif self.periods is not None:
            raise ValueError("periods only apply to a flat torus")
        if self.kind == SPHERE3 and self.dim != 3:
            raise ValueError("the round sphere ambient is S^3")

    @classmethod
    def euclidean(cls, n: int = 3) -> "Ambient":
        return cls(EUCLIDEAN, int(n))

    @classmethod
    def torus(cls, periods) -> "Ambient":
        periods = tuple(float(p) for p in periods)
        return cls(TORUS, len(periods), periods)

    @classmethod
    def sphere3(cls) -> "Ambient":
        return cls(SPHERE3, 3)

    @property
    def chart_dim(self) -> int:
        return 4 if self.kind == SPHERE3 else self.dim

    @property
    def is_compact(self) -> bool:
        return self.kind != EUCLIDEAN

    @property
    def period_array(self) -> np.ndarray:
        return np.asarray(self.periods, dtype=float)

    def spec(self) -> str:
        """Inverse of :func:`parse_ambient`."""
        if self.kind == EUCLIDEAN:
            return f"euclidean{self.dim}"
        if self.kind == SPHERE3:
            return "sphere3"
        return "torus:" + ",".join(repr(p) for p in self.periods)

    def point(self, coords) -> np.ndarray:
        """Validate ``coords`` and return them as a point of this ambient.

        Torus coordinates are wrapped into the fundamental domain; sphere
        coordinates must already have unit norm.
        """
        x = np.array(coords, dtype=float)
        if x.shape[-1:] != (self.chart_dim,):
            raise ValueError(
                f"expected coordinates of length {self.chart_dim}, got shape {x.shape}"
            )
        if not np.all(np.isfinite(x)):
            raise ValueError("point coordinates must be finite")
        if self.kind == TORUS:
            x = wrap(self, x)
        elif self.kind == SPHERE3:
            norms = np.linalg.norm(x, axis=-1)
            if np.any(np.abs(norms - 1.0) > 1e-12):
                raise ValueError("points of the round sphere must have unit norm")
        return x


def parse_ambient(text: str) -> Ambient:
    """Parse ``euclidean3``, ``torus:Lx,Ly,Lz`` or ``sphere3``."""
    s = text.strip().lower()
    if s == "sphere3":
        return Ambient.sphere3()
    if s.startswith("euclidean"):
        rest = s[len("euclidean"):] or "3"
        try:
            return Ambient.euclidean(int(rest))
        except ValueError:
            raise ValueError(f"cannot parse ambient {text!r}") from None
    if s.startswith("torus:"):
        try:
            periods = [float(p) for p in s[len("torus:"):].split(",")]
        except ValueError:
            raise ValueError(f"cannot parse ambient {text!r}") from None
        return Ambient.torus(periods)
    raise ValueError(f"cannot parse ambient {text!r}")


def wrap(ambient: Ambient, x: np.ndarray) -> np.ndarray:
    """Reduce torus coordinates into ``[0, L_i)``."""
    L = ambient.period_array
    y = np.mod(x, L)
    # np.mod can return L itself for tiny negative inputs
    return np.where(y >= L, y - L, y)


def nearest_image(ambient: Ambient, delta: np.ndarray) -> np.ndarray:
    """Shortest lattice representative of a torus displacement."""
    L = ambient.period_array
    return delta - L * np.round(delta / L)


def _check_dims(ambient: Ambient, *arrays):
    for a in arrays:
        if a.shape[-1:] != (ambient.chart_dim,):
            raise ValueError(
                f"expected points with {ambient.chart_dim} coordinates, got shape {a.shape}"
            )


def sphere_angle(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Angle between unit vectors, stable at 0 and pi."""
    a = np.linalg.norm(x - y, axis=-1)
    b = np.linalg.norm(x + y, axis=-1)
    return 2.0 * np.arctan2(a, b)


def geodesic_distance(ambient: Ambient, x, y) -> np.ndarray:
    """Geodesic distance between points (broadcasting over leading axes)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_dims(ambient, x, y)
    if ambient.kind == EUCLIDEAN:
        return np.linalg.norm(x - y, axis=-1)
    if ambient.kind == TORUS:
        return np.linalg.norm(nearest_image(ambient, x - y), axis=-1)
    return sphere_angle(x, y)


def euclidean_ball_volume(n: int, r):
    return math.pi ** (n / 2) / special.gamma(n / 2 + 1) * np.asarray(r, dtype=float) ** n


def _disk_rect_area(rho: float, a: float, b: float) -> float:
    """Area of the disk of radius ``rho`` inside the box ``[-a, a] x [-b, b]``."""
    if rho <= 0.0:
        return 0.0
    if a > b:
        a, b = b, a

    def G(u):
        u = min(u, rho)
        return 0.5 * (u * math.sqrt(max(rho * rho - u * u, 0.0)) + rho * rho * math.asin(u / rho))

    u_hi = min(a, rho)
    if rho <= b:
        quarter = G(u_hi)
    else:
        u_star = math.sqrt(rho * rho - b * b)
        if a <= u_star:
            quarter = a * b
        else:
            quarter = b * u_star + G(u_hi) - G(u_star)
    return 4.0 * quarter


def _torus_ball_volume_3d(L, r: float) -> float:
    a, b, c = (0.5 * p for p in L)
    zmax = min(r, c)
    kinks = sorted(
        {
            z
            for z in (
                math.sqrt(max(r * r - a * a, 0.0)),
                math.sqrt(max(r * r - b * b, 0.0)),
                math.sqrt(max(r * r - a * a - b * b, 0.0)),
            )
            if 0.0 < z < zmax
        }
    )

    def slab(z):
        return _disk_rect_area(math.sqrt(max(r * r - z * z, 0.0)), a, b)

    val, _ = integrate.quad(slab, 0.0, zmax, points=kinks or None, epsabs=1e-14, epsrel=1e-13, limit=200)
    return 2.0 * val


def ball_volume_estimate(ambient: Ambient, x, r: float, n_points: int = 2**16, seed: int = 0):
    """Geodesic ball volume and an error bound, as ``(volume, error)``.

    Exact closed forms have zero error. Flat tori beyond the injectivity
    radius use an exact one-dimensional reduction in dimensions 2 and 3 and a
    scrambled Sobol estimate otherwise (error from replicate spread).
    """
    x = np.asarray(x, dtype=float)
    _check_dims(ambient, x)
    if not r > 0:
        raise ValueError("ball radius must be positive")
    n = ambient.dim
    if ambient.kind == EUCLIDEAN:
        return float(euclidean_ball_volume(n, r)), 0.0
    if ambient.kind == SPHERE3:
        if r >= math.pi:
            return 2.0 * math.pi**2, 0.0
        return math.pi * (2.0 * r - math.sin(2.0 * r)), 0.0
    L = ambient.periods
    total = float(np.prod(L))
    if r <= 0.5 * min(L):
        return float(euclidean_ball_volume(n, r)), 0.0
    if r >= 0.5 * math.sqrt(sum(p * p for p in L)):
        return total, 0.0
    if n == 2:
        return _disk_rect_area(r, 0.5 * L[0], 0.5 * L[1]), 0.0
    if n == 3:
        return _torus_ball_volume_3d(L, r), 1e-12 * total
    reps = []
    Larr = np.asarray(L)
    m = int(round(math.log2(n_points)))
    for k in range(8):
        u = qmc.Sobol(n, scramble=True, seed=seed + k).random_base2(m)
        d = np.linalg.norm((u - 0.5) * Larr, axis=1)
        reps.append(total * np.mean(d <= r))
    reps = np.array(reps)
    return float(reps.mean()), float(3.0 * reps.std(ddof=1) / math.sqrt(len(reps)))


def ball_volume(ambient: Ambient, x, r: float) -> float:
    """Volume of the geodesic ball ``B_r(x)``."""
    return ball_volume_estimate(ambient, x, r)[0]


@dataclass(frozen=True)
class AmbientMetadata:
    diameter: float
    injectivity_radius: float
    volume: float
    ricci_nonnegative: bool
    sectional_nonnegative_and_ricci_parallel: bool


def ambient_metadata(ambient: Ambient) -> AmbientMetadata:
    if ambient.kind == EUCLIDEAN:
        return AmbientMetadata(math.inf, math.inf, math.inf, True, True)
    if ambient.kind == TORUS:
        L = ambient.period_array
        return AmbientMetadata(
            diameter=float(0.5 * np.linalg.norm(L)),
            injectivity_radius=float(0.5 * L.min()),
            volume=float(np.prod(L)),
            ricci_nonnegative=True,
            sectional_nonnegative_and_ricci_parallel=True,
        )
    return AmbientMetadata(math.pi, math.pi, 2.0 * math.pi**2, True, True)


@dataclass(frozen=True)
class Isometry:
    """Rigid motion ``x -> matrix @ x + translation`` of an ambient.

    Flat tori accept translations only (followed by wrapping); the sphere
    accepts orthogonal 4x4 matrices only.
    """

    ambient: Ambient
    matrix: Optional[np.ndarray] = field(default=None, compare=False)
    translation: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        d = self.ambient.chart_dim
        if self.matrix is not None:
            Q = np.asarray(self.matrix, dtype=float)
            if Q.shape != (d, d):
                raise ValueError(f"isometry matrix must be {d}x{d}")
            if np.max(np.abs(Q.T @ Q - np.eye(d))) > 1e-12:
                raise ValueError("isometry matrix is not orthogonal")
            if self.ambient.kind == TORUS:
                raise ValueError("flat-torus isometries are translations")
            object.__setattr__(self, "matrix", Q)
        if self.translation is not None:
            b = np.asarray(self.translation, dtype=float)
            if b.shape != (d,):
                raise ValueError(f"translation must have length {d}")
            if self.ambient.kind == SPHERE3:
                raise ValueError("sphere isometries are orthogonal matrices")
            object.__setattr__(self, "translation", b)

    @classmethod
    def translate(cls, ambient: Ambient, b) -> "Isometry":
        return cls(ambient, translation=b)

    @classmethod
    def rotate(cls, ambient: Ambient, Q) -> "Isometry":
        return cls(ambient, matrix=Q)

    def __call__(self, x):
        return apply_isometry(self, x)


def apply_isometry(iso: Isometry, x, ambient: Optional[Ambient] = None) -> np.ndarray:
    if ambient is not None and ambient != iso.ambient:
        raise ValueError("isometry and point belong to different ambients")
    x = np.asarray(x, dtype=float)
    _check_dims(iso.ambient, x)
    y = x
    if iso.matrix is not None:
        y = y @ iso.matrix.T
    if iso.translation is not None:
        y = y + iso.translation
    if iso.ambient.kind == TORUS:
        y = wrap(iso.ambient, y)
    elif iso.ambient.kind == SPHERE3:
        y = y / np.linalg.norm(y, axis=-1, keepdims=True)
    return y


def random_points(ambient: Ambient, n: int, rng: np.random.Generator, box: float = 1.0) -> np.ndarray:
    """Uniform samples (Euclidean: uniform in the cube ``[-box, box]^n``)."""
    d = ambient.chart_dim
    if ambient.kind == EUCLIDEAN:
        return rng.uniform(-box, box, size=(n, d))
    if ambient.kind == TORUS:
        return rng.uniform(0.0, 1.0, size=(n, d)) * ambient.period_array
    g = rng.standard_normal((n, 4))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def random_rotation(d: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    # re-orthonormalize once more for 1e-12 orthogonality
    q, r = np.linalg.qr(q)
    return q * np.sign(np.diag(r))


def exp_map_sphere(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Geodesic from ``x`` with initial tangent velocity ``v`` on S^3, at unit time."""
    s = np.linalg.norm(v, axis=-1, keepdims=True)
    safe = np.where(s > 0, s, 1.0)
    y = np.cos(s) * x + np.sin(s) * v / safe
    return y / np.linalg.norm(y, axis=-1, keepdims=True)


def tangent_basis_sphere(x: np.ndarray) -> np.ndarray:
    """Orthonormal basis (3, 4) of the tangent space of S^3 at ``x``."""
    M = np.concatenate([x[None, :], np.eye(4)], axis=0).T
    q, _ = np.linalg.qr(M)
    return q[:, 1:4].T
