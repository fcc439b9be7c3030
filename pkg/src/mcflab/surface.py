"""Closed oriented triangle meshes living in a model ambient.

Geometry is always computed on *unwrapped* triangle corners: on a flat torus
every triangle carries integer lattice offsets per corner so that its three
corners form a small Euclidean triangle in the universal cover. On the round
sphere the mesh is the chordal polyhedron in R^4 with unit-norm vertices.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .ambient import SPHERE3, TORUS, Ambient, wrap


class MeshValidationError(ValueError):
    """The mesh violates closedness, orientation, non-degeneracy or chart rules."""


MIN_TRIANGLE_AREA = 1e-14


def _bincount_rows(idx: np.ndarray, vals: np.ndarray, n: int) -> np.ndarray:
    """Index-ordered scatter-add of ``vals`` (m, d) into ``n`` rows."""
    return np.stack([np.bincount(idx, weights=vals[:, k], minlength=n) for k in range(vals.shape[1])], axis=1)


class SurfaceMesh:
    """Validated closed triangle mesh. Treat instances as immutable."""

    def __init__(self, ambient: Ambient, vertices, triangles, lifts=None, validate: bool = True):
        self.ambient = ambient
        v = np.array(vertices, dtype=float)
        f = np.array(triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != ambient.chart_dim:
            raise MeshValidationError(f"vertices must be an (N, {ambient.chart_dim}) array")
        if f.ndim != 2 or f.shape[1] != 3 or f.shape[0] == 0:
            raise MeshValidationError("triangles must be a non-empty (M, 3) integer array")
        if f.min() < 0 or f.max() >= v.shape[0]:
            raise MeshValidationError("triangle references a vertex index out of range")
        if ambient.kind == TORUS:
            v = wrap(ambient, v)
            if lifts is None:
                lifts = self._nearest_lifts(ambient, v, f)
            lifts = np.asarray(lifts, dtype=np.int64)
        else:
            lifts = None
        self.vertices = v
        self.triangles = f
        self.lifts = lifts
        self.vertices.setflags(write=False)
        self.triangles.setflags(write=False)
        if validate:
            self.validate()

    @staticmethod
    def _nearest_lifts(ambient: Ambient, v: np.ndarray, f: np.ndarray) -> np.ndarray:
        L = ambient.period_array
        c = v[f]
        off = -np.round((c - c[:, :1, :]) / L).astype(np.int64)
        off[:, 0, :] = 0
        return off

    # -- structure ---------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @cached_property
    def corners(self) -> np.ndarray:
        """Unwrapped triangle corners, shape (M, 3, chart_dim)."""
        c = self.vertices[self.triangles]
        if self.lifts is not None:
            c = c + self.lifts * self.ambient.period_array
        return c

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted vertex pairs (E, 2)."""
        f = self.triangles
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    @cached_property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.edges.shape[0] + self.n_triangles

    def validate(self) -> None:
        f = self.triangles
        directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        if np.any(directed[:, 0] == directed[:, 1]):
            bad = int(np.flatnonzero(np.any(f == np.roll(f, 1, axis=1), axis=1))[0])
            raise MeshValidationError(f"triangle {bad} repeats a vertex")
        und = np.sort(directed, axis=1)
        keys, counts = np.unique(und, axis=0, return_counts=True)
        if np.any(counts == 1):
            bnd = [tuple(int(i) for i in k) for k in keys[counts == 1]]
            raise MeshValidationError(f"mesh is not closed; boundary edges {bnd}")
        if np.any(counts > 2):
            bad = [tuple(int(i) for i in k) for k in keys[counts > 2]]
            raise MeshValidationError(f"non-manifold edges shared by more than two triangles {bad}")
        dkeys, dcounts = np.unique(directed, axis=0, return_counts=True)
        if np.any(dcounts > 1):
            bad = [tuple(int(i) for i in k) for k in dkeys[dcounts > 1]]
            raise MeshValidationError(f"inconsistent orientation along edges {bad}")
        areas = self.triangle_areas
        if np.any(areas <= MIN_TRIANGLE_AREA):
            bad = int(np.argmin(areas))
            raise MeshValidationError(f"degenerate triangle {bad} with area {areas[bad]:.3e}")
        if self.ambient.kind == TORUS:
            c = self.corners
            diam = np.max(np.linalg.norm(c[:, [0, 1, 2]] - c[:, [1, 2, 0]], axis=2), axis=1)
            limit = 0.5 * self.ambient.period_array.min()
            if np.any(diam >= limit):
                bad = int(np.argmax(diam))
                raise MeshValidationError(
                    f"triangle {bad} spans {diam[bad]:.4g} >= half the shortest period; use a finer mesh"
                )
        if self.ambient.kind == SPHERE3:
            err = np.abs(np.linalg.norm(self.vertices, axis=1) - 1.0)
            if np.any(err > 1e-12):
                bad = int(np.argmax(err))
                raise MeshValidationError(f"vertex {bad} is off the unit sphere by {err[bad]:.3e}")

    # -- metric quantities -------------------------------------------------

    @cached_property
    def triangle_areas(self) -> np.ndarray:
        c = self.corners
        a = c[:, 1] - c[:, 0]
        b = c[:, 2] - c[:, 0]
        aa = np.einsum("ij,ij->i", a, a)
        bb = np.einsum("ij,ij->i", b, b)
        ab = np.einsum("ij,ij->i", a, b)
        return 0.5 * np.sqrt(np.maximum(aa * bb - ab * ab, 0.0))

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        """Per-triangle edge lengths (M, 3); column k is opposite corner k."""
        c = self.corners
        return np.linalg.norm(c[:, [2, 0, 1]] - c[:, [1, 2, 0]], axis=2)

    @property
    def max_edge(self) -> float:
        return float(self.edge_lengths.max())

    @property
    def min_edge(self) -> float:
        return float(self.edge_lengths.min())

    def triangle_quality(self) -> np.ndarray:
        """``4 sqrt(3) area / sum(edge^2)``: 1 for equilateral, 0 when degenerate."""
        el = self.edge_lengths
        return 4.0 * np.sqrt(3.0) * self.triangle_areas / np.sum(el * el, axis=1)

    def extent(self) -> float:
        """Largest chart distance from the vertex centroid (Euclidean meshes)."""
        c = self.vertices.mean(axis=0)
        return float(np.max(np.linalg.norm(self.vertices - c, axis=1)))

    def with_vertices(self, vertices, lifts=None, validate: bool = True) -> "SurfaceMesh":
        return SurfaceMesh(self.ambient, vertices, self.triangles, lifts=lifts, validate=validate)

    @cached_property
    def _quad_cache(self) -> dict:
        return {}

    def quadrature(self, order: int = 6):
        """Cached :func:`quadrature_points`."""
        if order not in self._quad_cache:
            self._quad_cache[order] = quadrature_points(self, order)
        return self._quad_cache[order]


def total_area(mesh: SurfaceMesh) -> float:
    return float(np.sum(mesh.triangle_areas))


# ---------------------------------------------------------------------------
# mean curvature


@dataclass(frozen=True)
class CurvatureField:
    vectors: np.ndarray  # (V, chart_dim) mean curvature vector per vertex
    areas: np.ndarray  # (V,) mixed Voronoi area
    fallback: np.ndarray  # (V,) True where the barycentric area was used

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.vectors, axis=1)

    def h2_integral(self) -> float:
        """Area-weighted ``sum_i A_i |H_i|^2``."""
        return float(np.sum(self.areas * np.einsum("ij,ij->i", self.vectors, self.vectors)))


def _cotangent_data(mesh: SurfaceMesh):
    c = mesh.corners
    f = mesh.triangles
    nv = mesh.n_vertices
    area2 = 2.0 * mesh.triangle_areas
    # cot at corner k from the two edges leaving it
    cots = np.empty((f.shape[0], 3))
    for k in range(3):
        a = c[:, (k + 1) % 3] - c[:, k]
        b = c[:, (k + 2) % 3] - c[:, k]
        cots[:, k] = np.einsum("ij,ij->i", a, b) / area2

    lap = np.zeros((f.shape[0], 3, c.shape[2]))
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        w = 0.5 * cots[:, k][:, None]
        d = c[:, j] - c[:, i]
        lap[:, i] += w * d
        lap[:, j] -= w * d
    L = _bincount_rows(f.ravel(), lap.reshape(-1, c.shape[2]), nv)

    # mixed Voronoi areas
    el2 = mesh.edge_lengths**2
    tri_area = mesh.triangle_areas
    obtuse = cots < 0.0
    any_obtuse = obtuse.any(axis=1)
    mixed = np.empty((f.shape[0], 3))
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        # edge (k,i) is opposite j, edge (k,j) is opposite i
        mixed[:, k] = (el2[:, j] * cots[:, j] + el2[:, i] * cots[:, i]) / 8.0
    mixed = np.where(any_obtuse[:, None], np.where(obtuse, 0.5, 0.25) * tri_area[:, None], mixed)
    A = np.bincount(f.ravel(), weights=mixed.ravel(), minlength=nv)
    bary = np.bincount(f.ravel(), weights=np.repeat(tri_area / 3.0, 3), minlength=nv)
    return L, A, bary


def mean_curvature(mesh: SurfaceMesh) -> CurvatureField:
    """Cotangent mean curvature vectors with mixed Voronoi areas.

    ``H_i = (1 / 2A_i) sum_j (cot a_ij + cot b_ij) (x_j - x_i)``, so a round
    sphere has ``H`` pointing at its centre. On S^3 the chordal vector is
    corrected by ``+2 x`` and projected onto the tangent space of S^3.
    """
    L, A, bary = _cotangent_data(mesh)
    fallback = A <= MIN_TRIANGLE_AREA
    A = np.where(fallback, bary, A)
    H = L / A[:, None]
    if mesh.ambient.kind == SPHERE3:
        x = mesh.vertices
        H = H + 2.0 * x
        H = H - np.einsum("ij,ij->i", H, x)[:, None] * x
    return CurvatureField(H, A, fallback)


def _cross4(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Row-wise vector of R^4 orthogonal to ``a, b, c`` (cofactor expansion)."""
    p = lambda i, j: b[:, i] * c[:, j] - b[:, j] * c[:, i]  # noqa: E731
    p01, p02, p03, p12, p13, p23 = p(0, 1), p(0, 2), p(0, 3), p(1, 2), p(1, 3), p(2, 3)
    return np.stack(
        [
            a[:, 1] * p23 - a[:, 2] * p13 + a[:, 3] * p12,
            -(a[:, 0] * p23 - a[:, 2] * p03 + a[:, 3] * p02),
            a[:, 0] * p13 - a[:, 1] * p03 + a[:, 3] * p01,
            -(a[:, 0] * p12 - a[:, 1] * p02 + a[:, 2] * p01),
        ],
        axis=1,
    )


def vertex_normals(mesh: SurfaceMesh) -> np.ndarray:
    """Area-weighted unit normals of the surface inside the ambient (V, chart_dim).

    In S^3 the normal is taken within the tangent space of S^3 at the vertex.
    """
    c = mesh.corners
    e1 = c[:, 1] - c[:, 0]
    e2 = c[:, 2] - c[:, 0]
    if mesh.ambient.kind == SPHERE3:
        centroid = c.mean(axis=1)
        n = _cross4(centroid, e1, e2)
        n *= (2.0 * mesh.triangle_areas / np.maximum(np.linalg.norm(n, axis=1), 1e-300))[:, None]
    else:
        n = np.cross(e1, e2)
    acc = _bincount_rows(mesh.triangles.ravel(), np.repeat(n, 3, axis=0), mesh.n_vertices)
    if mesh.ambient.kind == SPHERE3:
        x = mesh.vertices
        acc -= np.einsum("ij,ij->i", acc, x)[:, None] * x
    return acc / np.linalg.norm(acc, axis=1, keepdims=True)


def normal_curvature(mesh: SurfaceMesh) -> CurvatureField:
    """:func:`mean_curvature` with each vector projected on the vertex normal.

    The cotangent vector carries a tangential residual on irregular meshes;
    its normal part is the velocity of the discrete flow. Since the
    cotangent vector is the area gradient, ``d(area)/dt = -sum A_i |P_N H_i|^2``
    still holds exactly for this velocity.
    """
    field = mean_curvature(mesh)
    n = vertex_normals(mesh)
    hn = np.einsum("ij,ij->i", field.vectors, n)[:, None] * n
    return CurvatureField(hn, field.areas, field.fallback)


# ---------------------------------------------------------------------------
# refinement and quadrature


def refine(mesh: SurfaceMesh, project=None) -> SurfaceMesh:
    """1-to-4 midpoint subdivision (sphere midpoints pushed back to S^3).

    ``project`` optionally maps the new midpoints (K, chart_dim) onto the
    smooth surface being approximated, e.g. a round sphere; without it the
    refined mesh has exactly the area of its parent in flat ambients.
    """
    f = mesh.triangles
    c = mesh.corners
    nv = mesh.n_vertices
    pairs = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    mids = np.concatenate([0.5 * (c[:, 0] + c[:, 1]), 0.5 * (c[:, 1] + c[:, 2]), 0.5 * (c[:, 2] + c[:, 0])])
    keys = np.sort(pairs, axis=1)
    uniq, first, inv = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inv = inv.ravel()
    new_pts = mids[first]
    if project is not None:
        new_pts = np.asarray(project(new_pts), dtype=float)
    if mesh.ambient.kind == SPHERE3:
        new_pts = new_pts / np.linalg.norm(new_pts, axis=1, keepdims=True)
    verts = np.concatenate([mesh.vertices, new_pts])
    m = f.shape[0]
    m01 = nv + inv[:m]
    m12 = nv + inv[m : 2 * m]
    m20 = nv + inv[2 * m :]
    tris = np.concatenate(
        [
            np.stack([f[:, 0], m01, m20], axis=1),
            np.stack([f[:, 1], m12, m01], axis=1),
            np.stack([f[:, 2], m20, m12], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ]
    )
    try:
        return SurfaceMesh(mesh.ambient, verts, tris)
    except MeshValidationError as exc:
        raise MeshValidationError(f"refinement produced an invalid mesh ({exc}); start from a finer mesh") from exc


_A4 = 0.445948490915965
_W4A = 0.223381589678011
_B4 = 0.091576213509771
_W4B = 0.109951743655322

_RULES = {
    1: (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])),
    3: (np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]), np.full(3, 1 / 3)),
    6: (
        np.array(
            [
                [1 - 2 * _A4, _A4, _A4],
                [_A4, 1 - 2 * _A4, _A4],
                [_A4, _A4, 1 - 2 * _A4],
                [1 - 2 * _B4, _B4, _B4],
                [_B4, 1 - 2 * _B4, _B4],
                [_B4, _B4, 1 - 2 * _B4],
            ]
        ),
        np.array([_W4A, _W4A, _W4A, _W4B, _W4B, _W4B]),
    ),
}


def triangle_rule(order: int):
    """Barycentric nodes and unit-sum weights of the supported rules."""
    if order not in _RULES:
        raise ValueError(f"unsupported quadrature order {order}; use 1, 3 or 6")
    bary, w = _RULES[order]
    return bary, w / w.sum()


def quadrature_points(mesh: SurfaceMesh, order: int = 6):
    """Quadrature nodes mapped into the ambient and their weights.

    Weights on each triangle sum to its (flat, unwrapped or chordal) area.
    Returns ``(points (Q, chart_dim), weights (Q,))``.
    """
    bary, w = triangle_rule(order)
    pts = np.einsum("qk,fkd->fqd", bary, mesh.corners).reshape(-1, mesh.ambient.chart_dim)
    wts = (mesh.triangle_areas[:, None] * w[None, :]).ravel()
    if mesh.ambient.kind == TORUS:
        pts = wrap(mesh.ambient, pts)
    elif mesh.ambient.kind == SPHERE3:
        pts = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    return pts, wts


# ---------------------------------------------------------------------------
# OFF input/output


def save_mesh(mesh: SurfaceMesh, path) -> None:
    """Write an OFF file; coordinates use 17 significant digits."""
    lines = ["OFF", f"{mesh.n_vertices} {mesh.n_triangles} 0"]
    lines += [" ".join(f"{c:.17g}" for c in row) for row in mesh.vertices]
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_mesh(path, ambient: Ambient) -> SurfaceMesh:
    """Read and validate an OFF file whose coordinates are in ``ambient``'s chart."""
    text = Path(path).read_text(encoding="utf-8")
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.append(line.split())
    if not tokens or tokens[0][0] != "OFF":
        raise MeshValidationError(f"{path}: missing OFF header")
    head = tokens[0][1:] or tokens[1]
    body = tokens[1:] if tokens[0][1:] else tokens[2:]
    try:
        nv, nf = int(head[0]), int(head[1])
    except (IndexError, ValueError):
        raise MeshValidationError(f"{path}: malformed vertex/face counts") from None
    if len(body) < nv + nf:
        raise MeshValidationError(f"{path}: expected {nv} vertices and {nf} faces, file is truncated")
    d = ambient.chart_dim
    try:
        verts = np.array([[float(x) for x in row[:d]] for row in body[:nv]])
    except ValueError:
        raise MeshValidationError(f"{path}: non-numeric vertex coordinate") from None
    if verts.shape != (nv, d) or any(len(row) != d for row in body[:nv]):
        raise MeshValidationError(f"{path}: each vertex needs exactly {d} coordinates")
    faces = []
    for k, row in enumerate(body[nv : nv + nf]):
        if row[0] != "3" or len(row) < 4:
            raise MeshValidationError(f"{path}: face {k} is not a triangle")
        faces.append([int(x) for x in row[1:4]])
    return SurfaceMesh(ambient, verts, np.array(faces, dtype=np.int64))


