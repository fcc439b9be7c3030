"""Heat-kernel F-functional, entropy, area growth and the two-sided bound checks.

``F_{x,t}(S) = t^{(n-m)/2} int_S H(x, y, t) dy`` for a surface (``m = 2``) in
an ``n``-dimensional ambient. The entropy is its supremum over centres and
scales; the area growth bound is ``sup area(S cap B_r(x)) / r^2``.

Both suprema are found in two stages: a coarse screen over candidate centres
(every mesh vertex plus a background lattice) and a log-spaced grid of scales,
then derivative-free local ascent from the best few candidates using the exact
quadrature. The coarse screen replaces the kernel by a finely tabulated copy
(radial on Euclidean space and S^3, a separable three-axis table on the torus)
so that one matrix product covers every scale at once.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .ambient import (
    EUCLIDEAN,
    SPHERE3,
    TORUS,
    Ambient,
    ambient_metadata,
    ball_volume,
    exp_map_sphere,
    geodesic_distance,
    nearest_image,
    random_points,
    tangent_basis_sphere,
    wrap,
)
from .heat_kernel import DEFAULT_KERNEL, KernelConfig, heat_kernel_array, sphere3_kernel, torus1d_kernel
from .surface import SurfaceMesh, mean_curvature

SURFACE_DIM = 2
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SearchConfig:
    """Windows and resolutions for the entropy and area-growth searches.

    ``None`` windows take the defaults ``t in [(2h)^2, D^2]`` and
    ``r in [2h, D]`` with ``h`` the longest mesh edge and ``D`` the ambient
    diameter (``4 * extent`` of the mesh in Euclidean space).
    """

    t_min: Optional[float] = None
    t_max: Optional[float] = None
    n_t: int = 48
    r_min: Optional[float] = None
    r_max: Optional[float] = None
    lattice: int = 8
    quad_order: int = 6
    tol: float = 1e-6
    n_starts: int = 3
    threads: int = 1

    def __post_init__(self):
        if self.n_t < 2:
            raise ValueError("n_t must be at least 2")
        if not 1 <= self.lattice <= 16:
            raise ValueError("lattice must be between 1 and 16 points per axis")


class FValue(NamedTuple):
    value: float
    trusted: bool


def mesh_scale(mesh: SurfaceMesh) -> float:
    """Mesh size ``h``: the longest edge."""
    return mesh.max_edge


def _codim_power(ambient: Ambient) -> float:
    return 0.5 * (ambient.dim - SURFACE_DIM)


def _f_exact(ambient: Ambient, pts, w, x, t, kcfg) -> float:
    vals, _, _ = heat_kernel_array(ambient, x, pts, t, kcfg)
    return float(t ** _codim_power(ambient) * np.dot(w, vals))


def f_functional(mesh: SurfaceMesh, x, t: float, quad_order: int = 6, kernel_cfg: KernelConfig = DEFAULT_KERNEL) -> FValue:
    """``F_{x,t}`` of the mesh by triangle quadrature.

    The value is flagged untrusted when ``sqrt(t) < 2 h``: the kernel is then
    not resolved by the mesh.
    """
    x = mesh.ambient.point(x)
    pts, w = mesh.quadrature(quad_order)
    val = _f_exact(mesh.ambient, pts, w, x, t, kernel_cfg)
    return FValue(val, math.sqrt(t) >= 2.0 * mesh_scale(mesh))


# ---------------------------------------------------------------------------
# candidate centres


def _gram_schmidt(vectors: np.ndarray, start: Optional[np.ndarray] = None, count: int = 4, cut: float = 0.3) -> np.ndarray:
    """Orthonormalise ``vectors`` in order, skipping those nearly dependent on
    the ones already kept (and on the optional unit rows ``start``)."""
    kept = [] if start is None else [row for row in np.atleast_2d(start)]
    out = []
    for v in vectors:
        r = v.astype(float).copy()
        for q in kept:
            r -= np.dot(r, q) * q
        n = np.linalg.norm(r)
        if n > cut * np.linalg.norm(v):
            kept.append(r / n)
            out.append(r / n)
            if len(out) == count:
                break
    return np.array(out)


def mesh_frame(mesh: SurfaceMesh) -> Optional[np.ndarray]:
    """Orthonormal frame of R^4 built from the vertices of a mesh in S^3.

    Rotating the mesh rotates the frame, which makes the searches below
    rotation-equivariant. ``None`` for flat ambients.
    """
    if mesh.ambient.kind != SPHERE3:
        return None
    v = mesh.vertices
    stride = max(1, v.shape[0] // 64)
    # coordinate axes only complete the frame for meshes in a great 2-sphere
    return _gram_schmidt(np.vstack([v[::stride], np.eye(4)]), count=4)


def background_lattice(mesh: SurfaceMesh, per_axis: int) -> np.ndarray:
    """Ambient points screened in addition to the mesh vertices.

    Torus lattices are anchored at vertex 0 and sphere lattices expressed in
    :func:`mesh_frame`, so that isometric meshes get isometric lattices;
    Euclidean lattices fill the padded bounding box.
    """
    amb = mesh.ambient
    k = per_axis
    if amb.kind == SPHERE3:
        g = max(1, k // 2 - 1)
        r = np.arange(-g, g + 1)
        grid = np.stack(np.meshgrid(r, r, r, r, indexing="ij"), -1).reshape(-1, 4)
        grid = grid[np.max(np.abs(grid), axis=1) == g].astype(float)
        grid = grid / np.linalg.norm(grid, axis=1, keepdims=True)
        return grid @ mesh_frame(mesh)
    if amb.kind == TORUS:
        axes = [(np.arange(k) + 0.5) * L / k for L in amb.periods]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, amb.dim)
        return wrap(amb, grid + mesh.vertices[0])
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    pad = 0.1 * (hi - lo).max()
    axes = [np.linspace(a - pad, b + pad, k) for a, b in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, amb.dim)


def _candidates(mesh: SurfaceMesh, cfg: SearchConfig) -> np.ndarray:
    return np.concatenate([mesh.vertices, background_lattice(mesh, cfg.lattice)])


def _vertex_weights(mesh: SurfaceMesh) -> np.ndarray:
    return mean_curvature(mesh).areas


# ---------------------------------------------------------------------------
# coarse screen with tabulated kernels


def _chunks(n: int, size: int):
    size = max(1, size)
    return [slice(s, min(n, s + size)) for s in range(0, n, size)]


def map_ordered(fn, items, threads: int = 1) -> list:
    """``[fn(i) for i in items]``, optionally on a thread pool; results keep input order."""
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _radial_distances(ambient: Ambient, c: np.ndarray, p: np.ndarray) -> np.ndarray:
    if ambient.kind == SPHERE3:
        chord = np.sqrt(np.maximum(2.0 - 2.0 * (c @ p.T), 0.0))
        return 2.0 * np.arcsin(np.minimum(chord / 2.0, 1.0))
    d2 = np.sum(c * c, 1)[:, None] + np.sum(p * p, 1)[None, :] - 2.0 * (c @ p.T)
    return np.sqrt(np.maximum(d2, 0.0))


def _radial_table(ambient: Ambient, r: np.ndarray, ts: np.ndarray, kcfg) -> np.ndarray:
    out = np.empty((r.size, ts.size))
    for k, t in enumerate(ts):
        if ambient.kind == SPHERE3:
            out[:, k] = sphere3_kernel(r, t, kcfg)[0]
        else:
            out[:, k] = (4.0 * math.pi * t) ** (-ambient.dim / 2) * np.exp(-r * r / (4.0 * t))
    return out


def coarse_f(mesh: SurfaceMesh, centers: np.ndarray, ts: np.ndarray, kcfg: KernelConfig = DEFAULT_KERNEL, threads: int = 1) -> np.ndarray:
    """Approximate ``F`` at every (centre, scale) pair, shape (C, len(ts)).

    Vertex-lumped weights; the kernel is linearly interpolated from a table
    with spacing ``sqrt(min ts) / 3``.
    """
    amb = mesh.ambient
    pts = mesh.vertices
    w = _vertex_weights(mesh)
    ts = np.asarray(ts, float)
    step = math.sqrt(ts.min()) / 3.0
    out = np.empty((centers.shape[0], ts.size))
    P = pts.shape[0]
    if amb.kind in (EUCLIDEAN, SPHERE3):
        rmax = math.pi if amb.kind == SPHERE3 else float(
            np.max(np.linalg.norm(centers[:, None, :] - pts[None, :1, :], axis=2))
            + np.max(np.linalg.norm(pts - pts[:1], axis=1))
        )
        B = int(math.ceil(rmax / step)) + 2
        table = _radial_table(amb, np.arange(B) * step, ts, kcfg)
        def radial_chunk(sl):
            c = centers[sl]
            u = _radial_distances(amb, c, pts) / step
            i = np.minimum(np.floor(u).astype(np.int64), B - 2)
            f = u - i
            rows = np.arange(c.shape[0])[:, None] * B
            W = np.bincount((rows + i).ravel(), weights=(w * (1.0 - f)).ravel(), minlength=c.shape[0] * B)
            W += np.bincount((rows + i + 1).ravel(), weights=(w * f).ravel(), minlength=c.shape[0] * B)
            return W.reshape(c.shape[0], B) @ table

        slices = _chunks(centers.shape[0], 2_000_000 // P)
        for sl, val in zip(slices, map_ordered(radial_chunk, slices, threads)):
            out[sl] = val
    else:
        L = amb.period_array
        M = [int(math.ceil(0.5 * Li / step)) + 2 for Li in L]
        steps = [0.5 * Li / (m - 2) for Li, m in zip(L, M)]
        per_axis = []
        for a in range(3):
            grid = np.arange(M[a]) * steps[a]
            per_axis.append(np.stack([torus1d_kernel(grid, t, L[a], kcfg.truncation_tol / 3.0)[0] for t in ts], 1))
        table = np.einsum("it,jt,kt->ijkt", *per_axis).reshape(-1, ts.size)
        size = M[0] * M[1] * M[2]
        def torus_chunk(sl):
            c = centers[sl]
            n = c.shape[0]
            d = np.abs(nearest_image(amb, c[:, None, :] - pts[None, :, :]))
            idx = []
            frac = []
            for a in range(3):
                u = d[..., a] / steps[a]
                i = np.minimum(np.floor(u).astype(np.int64), M[a] - 2)
                idx.append(i)
                frac.append(u - i)
            base = np.arange(n)[:, None] * size
            W = np.zeros(n * size)
            for b0 in (0, 1):
                for b1 in (0, 1):
                    for b2 in (0, 1):
                        flat = base + ((idx[0] + b0) * M[1] + (idx[1] + b1)) * M[2] + (idx[2] + b2)
                        wt = w * (frac[0] if b0 else 1.0 - frac[0]) * (frac[1] if b1 else 1.0 - frac[1]) * (frac[2] if b2 else 1.0 - frac[2])
                        W += np.bincount(flat.ravel(), weights=wt.ravel(), minlength=n * size)
            return W.reshape(n, size) @ table

        slices = _chunks(centers.shape[0], min(1_000_000 // P, 40_000_000 // size))
        for sl, val in zip(slices, map_ordered(torus_chunk, slices, threads)):
            out[sl] = val
    return out * ts[None, :] ** _codim_power(amb)


# ---------------------------------------------------------------------------
# local ascent


def golden_max(fun, a: float, b: float, tol: float = 1e-7, max_iter: int = 200):
    """Golden-section maximisation on ``[a, b]``; returns ``(x, f(x))``."""
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = fun(x1), fun(x2)
    it = 0
    while abs(b - a) > tol and it < max_iter:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = fun(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = fun(x1)
        it += 1
    return (x1, f1) if f1 >= f2 else (x2, f2)


def _move(ambient: Ambient, x: np.ndarray, direction: np.ndarray, step: float) -> np.ndarray:
    if ambient.kind == SPHERE3:
        return exp_map_sphere(x, step * direction)
    y = x + step * direction
    return wrap(ambient, y) if ambient.kind == TORUS else y


def _directions(ambient: Ambient, x: np.ndarray, frame: Optional[np.ndarray] = None) -> np.ndarray:
    if ambient.kind == SPHERE3:
        if frame is None:
            return tangent_basis_sphere(x)
        basis = _gram_schmidt(frame, start=x, count=3)
        return basis if basis.shape[0] == 3 else tangent_basis_sphere(x)
    return np.eye(ambient.dim)


def coordinate_ascent(ambient: Ambient, fun, x0, step0: float, step_min: float, max_evals: int = 4000, frame=None):
    """Compass search over centres: try +-step along each direction, halve on failure.

    Sphere directions are the tangential parts of ``frame`` when given.
    """
    x = np.array(x0, float)
    fx = fun(x)
    step = step0
    evals = 1
    while step >= step_min and evals < max_evals:
        improved = False
        for e in _directions(ambient, x, frame):
            for s in (step, -step):
                y = _move(ambient, x, e, s)
                fy = fun(y)
                evals += 1
                if fy > fx + 1e-13 * max(1.0, abs(fx)):
                    x, fx, improved = y, fy, True
                    break
        if not improved:
            step *= 0.5
    return x, fx


# ---------------------------------------------------------------------------
# entropy


@dataclass
class EntropyReport:
    lam: float
    argmax_x: np.ndarray
    argmax_t: float
    t_window: tuple
    grid_spec: dict
    trusted: bool
    boundary_sup: bool
    coarse_lam: float = float("nan")

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "argmax_x": [float(v) for v in self.argmax_x],
            "argmax_t": self.argmax_t,
            "t_window": list(self.t_window),
            "grid_spec": self.grid_spec,
            "trusted": self.trusted,
            "boundary_sup": self.boundary_sup,
        }


def default_t_window(mesh: SurfaceMesh, cfg: SearchConfig) -> tuple:
    h = mesh_scale(mesh)
    t_min = cfg.t_min if cfg.t_min is not None else (2.0 * h) ** 2
    if cfg.t_max is not None:
        t_max = cfg.t_max
    elif mesh.ambient.is_compact:
        t_max = ambient_metadata(mesh.ambient).diameter ** 2
    else:
        t_max = (4.0 * mesh.extent()) ** 2
    return float(t_min), float(t_max)


def _rank(values: np.ndarray) -> np.ndarray:
    """Flat indices by decreasing value; near-ties broken by index so that
    isometric inputs (equal up to rounding) rank identically."""
    v = np.asarray(values, float).ravel()
    scale = np.max(np.abs(v)) or 1.0
    return np.lexsort((np.arange(v.size), -np.round(v / scale, 9)))


def _select_starts(centers, values, ts, n_starts, ambient, sep):
    order = _rank(values)
    starts = []
    for flat in order:
        ci, ti = np.unravel_index(flat, values.shape)
        x = centers[ci]
        if all(geodesic_distance(ambient, x, s[0]) > sep for s in starts):
            starts.append((x, ti))
        if len(starts) >= n_starts:
            break
    return starts


def entropy(mesh: SurfaceMesh, search_cfg: SearchConfig = SearchConfig(), kernel_cfg: KernelConfig = DEFAULT_KERNEL) -> EntropyReport:
    """Supremum of ``F_{x,t}`` over centres and ``t`` in the search window."""
    amb = mesh.ambient
    t_min, t_max = default_t_window(mesh, search_cfg)
    if not 0.0 < t_min < t_max:
        raise ValueError(f"empty t window [{t_min}, {t_max}]")
    ts = np.geomspace(t_min, t_max, search_cfg.n_t)
    centers = _candidates(mesh, search_cfg)
    frame = mesh_frame(mesh)
    coarse = coarse_f(mesh, centers, ts, kernel_cfg, search_cfg.threads)

    pts, w = mesh.quadrature(search_cfg.quad_order)
    lo, hi = math.log(t_min), math.log(t_max)
    dlog = (hi - lo) / (search_cfg.n_t - 1)

    def F(x, logt):
        return _f_exact(amb, pts, w, x, math.exp(logt), kernel_cfg)

    best = (-math.inf, None, None)
    sep = 2.0 * mesh_scale(mesh)
    for x, ti in _select_starts(centers, coarse, ts, search_cfg.n_starts, amb, sep):
        logt = math.log(ts[ti])
        fx = F(x, logt)
        while True:
            a, b = max(lo, logt - dlog), min(hi, logt + dlog)
            logt, _ = golden_max(lambda s: F(x, s), a, b, tol=1e-7)
            # keep the bracket end when the maximum sits on the window boundary
            for edge in (lo, hi):
                if abs(logt - edge) < 1e-6 and F(x, edge) >= F(x, logt):
                    logt = edge
            st = math.sqrt(math.exp(logt))
            x, fnew = coordinate_ascent(amb, lambda y: F(y, logt), x, 0.5 * st, 1e-5 * st, frame=frame)
            gain = fnew - fx
            fx = fnew
            if gain < search_cfg.tol:
                break
        if fx > best[0]:
            best = (fx, x, math.exp(logt))

    lam, x_best, t_best = best
    h = mesh_scale(mesh)
    spec = {"n_t": search_cfg.n_t, "lattice": search_cfg.lattice, "quad_order": search_cfg.quad_order, "n_centers": int(centers.shape[0])}
    return EntropyReport(
        lam=float(lam),
        argmax_x=np.asarray(x_best),
        argmax_t=float(t_best),
        t_window=(t_min, t_max),
        grid_spec=spec,
        trusted=bool(t_best >= (2.0 * h) ** 2 * (1.0 - 1e-9)),
        boundary_sup=bool(t_best >= t_max * (1.0 - 1e-9)),
        coarse_lam=float(coarse.max()),
    )


# ---------------------------------------------------------------------------
# area growth


@dataclass
class AreaGrowthReport:
    kappa: float
    argmax_center: np.ndarray
    argmax_radius: float
    radius_window: tuple
    grid_spec: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "argmax_center": [float(v) for v in self.argmax_center],
            "argmax_radius": self.argmax_radius,
            "radius_window": list(self.radius_window),
            "grid_spec": self.grid_spec,
        }


def default_r_window(mesh: SurfaceMesh, cfg: SearchConfig) -> tuple:
    h = mesh_scale(mesh)
    r_min = cfg.r_min if cfg.r_min is not None else 2.0 * h
    if cfg.r_max is not None:
        r_max = cfg.r_max
    elif mesh.ambient.is_compact:
        r_max = ambient_metadata(mesh.ambient).diameter
    else:
        r_max = 4.0 * mesh.extent()
    return float(r_min), float(r_max)


@dataclass(frozen=True)
class BallQuadrature:
    """Quadrature points with the data needed to smooth ball membership.

    Each point stands for a cell of area ``w`` (a disc of radius
    ``rho = sqrt(w / pi)``) lying in its triangle's plane ``frame``.
    """

    points: np.ndarray
    weights: np.ndarray
    frames: np.ndarray
    rho: np.ndarray


def ball_quadrature(mesh: SurfaceMesh, order: int = 6) -> BallQuadrature:
    pts, w = mesh.quadrature(order)
    c = mesh.corners
    e1 = c[:, 1] - c[:, 0]
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = c[:, 2] - c[:, 0]
    e2 -= np.sum(e2 * e1, axis=1, keepdims=True) * e1
    e2 /= np.linalg.norm(e2, axis=1, keepdims=True)
    k = pts.shape[0] // c.shape[0]
    frames = np.repeat(np.stack([e1, e2], axis=1), k, axis=0)
    return BallQuadrature(pts, w, frames, np.sqrt(w / math.pi))


def _radial_direction(ambient: Ambient, pts: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Unit gradient of ``geodesic_distance(x, .)`` at ``pts`` (zero at ``x``)."""
    if ambient.kind == SPHERE3:
        g = -(x[None, :] - (pts @ x)[:, None] * pts)
    elif ambient.kind == TORUS:
        g = nearest_image(ambient, pts - x[None, :])
    else:
        g = pts - x[None, :]
    n = np.linalg.norm(g, axis=1, keepdims=True)
    return np.where(n > 0, g / np.where(n > 0, n, 1.0), 0.0)


def ball_ratio(ambient: Ambient, quad: BallQuadrature, x, r_min: float, r_max: float):
    """``max_r area(S cap B_r(x)) / r^2`` over ``r in [r_min, r_max]`` and its radius.

    A point at distance ``d`` counts fully once ``r >= d + hw`` and linearly in
    between ``d - hw`` and ``d + hw``, where ``hw = rho |grad_S d|`` is the
    radial half-extent of its cell. Cells cut transversally by the sphere
    ``dB_r`` are thus split in proportion, while cells lying along it
    (``grad_S d = 0``) switch sharply. The smoothed area ``A(r)`` is piecewise
    linear, so the supremum is found exactly from its knots and the
    stationary points of each piece.
    """
    x = np.asarray(x, float)
    d = geodesic_distance(ambient, quad.points, x)
    g = _radial_direction(ambient, quad.points, x)
    t0 = np.sum(quad.frames[:, 0] * g, axis=1)
    t1 = np.sum(quad.frames[:, 1] * g, axis=1)
    hw = quad.rho * np.sqrt(t0 * t0 + t1 * t1)
    hw = np.where(d > 0, hw, quad.rho)
    w = quad.weights
    ramp = hw > 1e-15
    a, b = d - hw, d + hw
    slope_w = np.where(ramp, w / np.where(ramp, 2.0 * hw, 1.0), 0.0)

    ar, sr = a[ramp], slope_w[ramp]
    oa = np.argsort(ar, kind="stable")
    ob = np.argsort(b, kind="stable")
    zero = np.zeros(1)
    ka = ar[oa]
    s1a = np.concatenate([zero, np.cumsum(sr[oa])])
    s2a = np.concatenate([zero, np.cumsum((sr * ar)[oa])])
    kb = b[ob]
    full = np.concatenate([zero, np.cumsum(w[ob])])
    s1b = np.concatenate([zero, np.cumsum(slope_w[ob])])
    s2b = np.concatenate([zero, np.cumsum((slope_w * a)[ob])])

    def pieces(r):
        ia = np.searchsorted(ka, r, side="right")
        ib = np.searchsorted(kb, r, side="right")
        beta = s1a[ia] - s1b[ib]
        alpha = full[ib] - (s2a[ia] - s2b[ib])
        return alpha, beta

    knots = np.concatenate([ka, kb, [r_min, r_max]])
    knots = np.unique(knots[(knots >= r_min) & (knots <= r_max)])
    alpha, beta = pieces(knots)
    vals = (alpha + beta * knots) / knots**2
    # interior maximum of (alpha + beta r) / r^2 at r = -2 alpha / beta
    nxt = np.append(knots[1:], r_max)
    with np.errstate(divide="ignore", invalid="ignore"):
        rs = np.where((alpha < 0) & (beta > 0), -2.0 * alpha / beta, knots)
    rs = np.clip(rs, knots, nxt)
    vals_s = (alpha + beta * rs) / rs**2
    k1, k2 = int(np.argmax(vals)), int(np.argmax(vals_s))
    if vals_s[k2] > vals[k1]:
        return float(vals_s[k2]), float(rs[k2])
    return float(vals[k1]), float(knots[k1])


def _coarse_kappa(mesh, centers, r_min, r_max, threads=1):
    amb = mesh.ambient
    pts, w = mesh.quadrature(1)
    step = min(mesh_scale(mesh) / 4.0, r_min / 8.0)
    nb = int(math.ceil(r_max / step)) + 1
    edges = (np.arange(nb) + 1) * step
    valid = (edges >= r_min) & (edges <= r_max + step)
    out = np.empty(centers.shape[0])
    P = pts.shape[0]

    def chunk(sl):
        c = centers[sl]
        d = geodesic_distance(amb, pts[None, :, :], c[:, None, :])
        b = np.minimum((d / step).astype(np.int64), nb - 1)
        keep = d <= r_max
        rows = np.arange(c.shape[0])[:, None] * nb
        H = np.bincount((rows + b)[keep], weights=np.broadcast_to(w, d.shape)[keep], minlength=c.shape[0] * nb)
        cum = np.cumsum(H.reshape(c.shape[0], nb), axis=1)
        return np.max(np.where(valid, cum / edges**2, 0.0), axis=1)

    slices = _chunks(centers.shape[0], 2_000_000 // P)
    for sl, val in zip(slices, map_ordered(chunk, slices, threads)):
        out[sl] = val
    return out


def area_growth(mesh: SurfaceMesh, search_cfg: SearchConfig = SearchConfig()) -> AreaGrowthReport:
    """Supremum of ``area(S cap B_r(x)) / r^2`` over centres and radii in the window."""
    amb = mesh.ambient
    r_min, r_max = default_r_window(mesh, search_cfg)
    if not 0.0 < r_min < r_max:
        raise ValueError(f"empty radius window [{r_min}, {r_max}]")
    centers = _candidates(mesh, search_cfg)
    frame = mesh_frame(mesh)
    coarse = _coarse_kappa(mesh, centers, r_min, r_max, search_cfg.threads)
    quad = ball_quadrature(mesh, search_cfg.quad_order)

    best = (-math.inf, None, None)
    order = _rank(coarse)
    starts = []
    h = mesh_scale(mesh)
    for ci in order:
        if all(geodesic_distance(amb, centers[ci], s) > 2.0 * h for s in starts):
            starts.append(centers[ci])
        if len(starts) >= search_cfg.n_starts:
            break
    for x0 in starts:
        x, val = coordinate_ascent(amb, lambda y: ball_ratio(amb, quad, y, r_min, r_max)[0], x0, h, 1e-4 * h, frame=frame)
        if val > best[0]:
            best = (val, x, ball_ratio(amb, quad, x, r_min, r_max)[1])
    spec = {"lattice": search_cfg.lattice, "quad_order": search_cfg.quad_order, "n_centers": int(centers.shape[0])}
    return AreaGrowthReport(float(best[0]), np.asarray(best[1]), float(best[2]), (r_min, r_max), spec)


# ---------------------------------------------------------------------------
# two-sided bound checks


@dataclass
class BoundCheckReport:
    c_low: float
    c_up: float
    eps: Optional[float]
    samples: str
    violations: int
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def as_dict(self) -> dict:
        return {
            "c_low": self.c_low,
            "c_up": self.c_up,
            "eps": self.eps,
            "samples": self.samples,
            "violations": self.violations,
            "details": self.details,
        }


def equivalence_check(
    meshes: Sequence[SurfaceMesh],
    t_window: Optional[tuple] = None,
    radius_window: Optional[tuple] = None,
    search_cfg: SearchConfig = SearchConfig(),
    kernel_cfg: KernelConfig = DEFAULT_KERNEL,
    bracket: tuple = (1e-3, 1e3),
    max_spread: float = 50.0,
) -> BoundCheckReport:
    """Entropy versus area growth over a family of surfaces in one closed ambient.

    ``c_low``/``c_up`` are the smallest and largest ratios ``lambda / kappa``;
    a violation is a non-finite or non-positive value, a ratio outside
    ``bracket``, or a spread ``c_up / c_low`` of ``max_spread`` or more.
    """
    if not meshes:
        raise ValueError("equivalence check needs at least one mesh")
    amb = meshes[0].ambient
    if any(m.ambient != amb for m in meshes):
        raise ValueError("all meshes must share one ambient")
    if not amb.is_compact:
        raise ValueError("equivalence of entropy and area growth is stated for closed ambients")
    cfg = search_cfg
    if t_window is not None:
        cfg = _replace(cfg, t_min=t_window[0], t_max=t_window[1])
    if radius_window is not None:
        cfg = _replace(cfg, r_min=radius_window[0], r_max=radius_window[1])
    lams, kaps = [], []
    for m in meshes:
        lams.append(entropy(m, cfg, kernel_cfg).lam)
        kaps.append(area_growth(m, cfg).kappa)
    lams = np.array(lams)
    kaps = np.array(kaps)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = lams / kaps
    bad = ~np.isfinite(ratios) | (lams <= 0) | (kaps <= 0) | (ratios < bracket[0]) | (ratios > bracket[1])
    violations = int(np.sum(bad))
    c_low = float(np.min(ratios))
    c_up = float(np.max(ratios))
    spread = c_up / c_low if c_low > 0 else math.inf
    if not spread < max_spread:
        violations += 1
    return BoundCheckReport(
        c_low,
        c_up,
        None,
        f"{len(meshes)} meshes in {amb.spec()}",
        violations,
        {"lambda": lams.tolist(), "kappa": kaps.tolist(), "ratio": ratios.tolist(), "spread": spread},
    )


def _replace(cfg: SearchConfig, **kw) -> SearchConfig:
    from dataclasses import replace

    return replace(cfg, **kw)


def li_yau_check(
    ambient: Ambient,
    n_samples: int = 1000,
    t_window: tuple = (0.01, 4.0),
    eps: float = 0.5,
    seed: int = 0,
    diagonal_fraction: float = 0.1,
    kernel_cfg: KernelConfig = DEFAULT_KERNEL,
) -> BoundCheckReport:
    """Scan the Gaussian two-sided heat kernel bounds on a closed ambient.

    ``R_low = H V_x(sqrt t)^{1/2} V_y(sqrt t)^{1/2} e^{d^2/3t}`` must stay
    positive and ``R_up = H V_x^{1/2} V_y^{1/2} e^{d^2/((4+eps) t)}`` finite;
    ``c_low = min R_low`` and ``c_up = max R_up``.
    """
    meta = ambient_metadata(ambient)
    if not (ambient.is_compact and meta.ricci_nonnegative):
        raise ValueError("Li-Yau scan needs a closed ambient with non-negative Ricci curvature")
    rng = np.random.default_rng(seed)
    xs = random_points(ambient, n_samples, rng)
    ys = random_points(ambient, n_samples, rng)
    n_diag = int(round(diagonal_fraction * n_samples))
    ys[:n_diag] = xs[:n_diag]
    ts = np.exp(rng.uniform(math.log(t_window[0]), math.log(t_window[1]), n_samples))
    d = geodesic_distance(ambient, xs, ys)
    r_low = np.empty(n_samples)
    r_up = np.empty(n_samples)
    vol_cache: dict = {}
    for k in range(n_samples):
        t = float(ts[k])
        H, _, _ = heat_kernel_array(ambient, xs[k], ys[k], t, kernel_cfg)
        # homogeneous ambients: the ball volume does not depend on the centre
        r = math.sqrt(t)
        if r not in vol_cache:
            vol_cache[r] = ball_volume(ambient, xs[k], r)
        V = vol_cache[r]
        base = float(H) * V
        r_low[k] = base * math.exp(d[k] ** 2 / (3.0 * t))
        r_up[k] = base * math.exp(d[k] ** 2 / ((4.0 + eps) * t))
    violations = int(np.sum(~(r_low > 0)) + np.sum(~np.isfinite(r_up)))
    return BoundCheckReport(
        float(r_low.min()),
        float(r_up.max()),
        eps,
        f"{n_samples} samples, t in [{t_window[0]}, {t_window[1]}], seed {seed}",
        violations,
        {
            "diagonal_min_r_low": float(r_low[:n_diag].min()) if n_diag else None,
            "argmin_low": {"d": float(d[np.argmin(r_low)]), "t": float(ts[np.argmin(r_low)])},
            "argmax_up": {"d": float(d[np.argmax(r_up)]), "t": float(ts[np.argmax(r_up)])},
        },
    )

