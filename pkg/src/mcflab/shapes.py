"""Built-in test surfaces: icospheres, flat torus slices, and S^3 shapes.

Each generator returns a validated :class:`~mcflab.surface.SurfaceMesh`. The
``perturb`` option displaces vertices along the unit normal by
``amp * cos(mode * u)``-type profiles (see :func:`perturb_profile`).
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .ambient import SPHERE3, TORUS, Ambient
from .surface import SurfaceMesh

_PHI = (1.0 + math.sqrt(5.0)) / 2.0

_ICO_V = np.array(
    [
        [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
        [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
        [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
    ],
    dtype=float,
)
_ICO_F = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


def unit_icosphere(level: int):
    """Vertices on the unit sphere of R^3 and outward-oriented triangles."""
    v = _ICO_V / np.linalg.norm(_ICO_V, axis=1, keepdims=True)
    f = _ICO_F.copy()
    for _ in range(level):
        m = f.shape[0]
        pairs = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        uniq, inv = np.unique(np.sort(pairs, axis=1), axis=0, return_inverse=True)
        inv = inv.ravel()
        mids = 0.5 * (v[uniq[:, 0]] + v[uniq[:, 1]])
        mids /= np.linalg.norm(mids, axis=1, keepdims=True)
        nv = v.shape[0]
        v = np.concatenate([v, mids])
        a, b, c = nv + inv[:m], nv + inv[m : 2 * m], nv + inv[2 * m :]
        f = np.concatenate(
            [
                np.stack([f[:, 0], a, c], 1),
                np.stack([f[:, 1], b, a], 1),
                np.stack([f[:, 2], c, b], 1),
                np.stack([a, b, c], 1),
            ]
        )
    return v, f


def _harmonic(u: np.ndarray, mode: int) -> np.ndarray:
    """``Re((u_0 + i u_1)^mode)`` for unit directions ``u`` of R^3."""
    return np.real((u[:, 0] + 1j * u[:, 1]) ** mode)


def icosphere(ambient: Ambient, radius: float = 1.0, level: int = 3, center=None, perturb: Optional[tuple] = None) -> SurfaceMesh:
    """Round sphere of ``radius`` in Euclidean 3-space or a 3-torus."""
    if ambient.kind == SPHERE3 or ambient.dim != 3:
        raise ValueError("icosphere lives in a 3-dimensional Euclidean space or torus")
    u, f = unit_icosphere(level)
    r = radius * np.ones(u.shape[0])
    if perturb:
        amp, mode = perturb
        r = r + amp * _harmonic(u, int(mode))
    if center is None:
        center = 0.5 * ambient.period_array if ambient.kind == TORUS else np.zeros(3)
    return SurfaceMesh(ambient, np.asarray(center, float) + r[:, None] * u, f)


def torus_slice(ambient: Ambient, height: float = 0.0, k: int = 32, perturb: Optional[tuple] = None) -> SurfaceMesh:
    """The flat 2-torus ``{x_3 = height}`` of a 3-torus on a ``k x k`` grid.

    ``perturb = (amp, mode)`` adds ``amp * cos(2 pi mode x_1 / L_1)`` to the height.
    """
    if ambient.kind != TORUS or ambient.dim != 3:
        raise ValueError("torus_slice needs a flat 3-torus")
    Lx, Ly, _ = ambient.periods
    i, j = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    x = i.ravel() * Lx / k
    y = j.ravel() * Ly / k
    z = np.full(x.shape, float(height))
    if perturb:
        amp, mode = perturb
        z = z + amp * np.cos(2.0 * math.pi * int(mode) * x / Lx)
    idx = lambda a, b: (a % k) * k + (b % k)  # noqa: E731
    ii, jj = i.ravel(), j.ravel()
    t1 = np.stack([idx(ii, jj), idx(ii + 1, jj), idx(ii + 1, jj + 1)], 1)
    t2 = np.stack([idx(ii, jj), idx(ii + 1, jj + 1), idx(ii, jj + 1)], 1)
    return SurfaceMesh(ambient, np.stack([x, y, z], 1), np.concatenate([t1, t2]))


def _sphere_mesh(verts: np.ndarray, f: np.ndarray) -> SurfaceMesh:
    verts = verts / np.linalg.norm(verts, axis=1, keepdims=True)
    return SurfaceMesh(Ambient.sphere3(), verts, f)


def equator(level: int = 4, perturb: Optional[tuple] = None) -> SurfaceMesh:
    """Totally geodesic 2-sphere ``{x_4 = 0}`` of S^3."""
    u, f = unit_icosphere(level)
    w = np.zeros(u.shape[0])
    if perturb:
        amp, mode = perturb
        w = amp * _harmonic(u, int(mode))
    return _sphere_mesh(np.column_stack([u, w]), f)


def geodesic_sphere(theta0: float, level: int = 4, perturb: Optional[tuple] = None) -> SurfaceMesh:
    """Geodesic sphere of radius ``theta0`` about the pole ``e_4`` of S^3."""
    if not 0.0 < theta0 < math.pi:
        raise ValueError("geodesic sphere radius must lie in (0, pi)")
    u, f = unit_icosphere(level)
    th = np.full(u.shape[0], float(theta0))
    if perturb:
        amp, mode = perturb
        th = th + amp * _harmonic(u, int(mode))
    return _sphere_mesh(np.column_stack([np.sin(th)[:, None] * u, np.cos(th)]), f)


def clifford_torus(k: int = 64, perturb: Optional[tuple] = None) -> SurfaceMesh:
    """Minimal Clifford torus ``(cos u, sin u, cos v, sin v) / sqrt 2`` on a ``k x k`` grid."""
    i, j = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    u = 2.0 * math.pi * i.ravel() / k
    v = 2.0 * math.pi * j.ravel() / k
    a = np.full(u.shape, 1.0 / math.sqrt(2.0))
    if perturb:
        amp, mode = perturb
        # normal direction (cos u, sin u, -cos v, -sin v)/sqrt 2 is a rotation of the radii
        a = a + amp * np.cos(int(mode) * u) / math.sqrt(2.0)
    b = np.sqrt(np.maximum(1.0 - a * a, 0.0))
    pts = np.stack([a * np.cos(u), a * np.sin(u), b * np.cos(v), b * np.sin(v)], 1)
    idx = lambda p, q: (p % k) * k + (q % k)  # noqa: E731
    ii, jj = i.ravel(), j.ravel()
    t1 = np.stack([idx(ii, jj), idx(ii + 1, jj), idx(ii + 1, jj + 1)], 1)
    t2 = np.stack([idx(ii, jj), idx(ii + 1, jj + 1), idx(ii, jj + 1)], 1)
    return _sphere_mesh(pts, np.concatenate([t1, t2]))


def make_shape(spec: str, ambient: Ambient, perturb: Optional[tuple] = None) -> SurfaceMesh:
    """Build a shape from ``name:arg,arg`` text.

    ``icosphere:R,level``, ``slice:height,k``, ``equator:level``,
    ``clifford:k`` and ``geodesic-sphere:theta0,level``.
    """
    name, _, rest = spec.strip().partition(":")
    args = [a for a in rest.split(",") if a.strip()] if rest else []
    try:
        if name == "icosphere":
            R = float(args[0]) if args else 1.0
            level = int(args[1]) if len(args) > 1 else 3
            return icosphere(ambient, R, level, perturb=perturb)
        if name == "slice":
            h = float(args[0]) if args else 0.0
            k = int(args[1]) if len(args) > 1 else 32
            return torus_slice(ambient, h, k, perturb=perturb)
        if ambient.kind != SPHERE3 and name in ("equator", "clifford", "geodesic-sphere"):
            raise ValueError(f"shape {name!r} lives in sphere3")
        if name == "equator":
            return equator(int(args[0]) if args else 4, perturb=perturb)
        if name == "clifford":
            return clifford_torus(int(args[0]) if args else 64, perturb=perturb)
        if name == "geodesic-sphere":
            th = float(args[0]) if args else math.pi / 3
            level = int(args[1]) if len(args) > 1 else 4
            return geodesic_sphere(th, level, perturb=perturb)
    except (IndexError, TypeError) as exc:
        raise ValueError(f"cannot parse shape {spec!r}: {exc}") from None
    raise ValueError(f"unknown shape {name!r}")
