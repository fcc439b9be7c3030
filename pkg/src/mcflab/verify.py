"""Checks of the monotonicity and limit statements along recorded flows.

* :func:`f_monotonicity_check`: ``F_{x,s}(M_{t2}) <= F_{x,s+(t2-t1)}(M_{t1})``
  over sampled centres and scales. With ``k`` the backward heat kernel the
  weighted integral ``Z(t)`` is the same quantity, so a single F-form covers both.
* :func:`entropy_monotonicity_check`: ``lambda`` non-increasing along a run.
* :func:`almost_monotonicity_fit`: the smallest ``C >= 1`` with
  ``lambda(t2) <= C lambda(t1) + C (t2 - t1) A_0``.
* :func:`harnack_diagnostic`: the Harnack form of the backward kernel on a mesh.
* :func:`minimal_limit_diagnostic`: is the end of a run consistent with a
  minimal limit?
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .ambient import SPHERE3, TORUS, Ambient, ambient_metadata, exp_map_sphere, wrap
from .flow import FlowSeries
from .functionals import _f_exact
from .heat_kernel import DEFAULT_KERNEL, KernelConfig, heat_kernel_array
from .surface import SurfaceMesh, normal_curvature, vertex_normals

SURFACE_DIM = 2


def _require_monotone_ambient(ambient: Ambient) -> None:
    if not ambient_metadata(ambient).sectional_nonnegative_and_ricci_parallel:
        raise ValueError(
            f"{ambient.spec()} lacks non-negative sectional curvature with parallel Ricci; "
            "use the almost-monotonicity fit instead"
        )


@dataclass
class MonotonicityReport:
    records: List[dict]
    worst_violation: float
    n_pairs: int
    tol: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "worst_violation": self.worst_violation,
            "n_pairs": self.n_pairs,
            "tol": self.tol,
            "passed": self.passed,
        }


def trusted_scale_window(meshes: Sequence[SurfaceMesh]) -> tuple:
    """``[(2h)^2, s_max]`` with ``h`` the largest edge over all meshes.

    ``s_max`` is the squared ambient diameter on closed ambients and the
    squared mesh extent in Euclidean space.
    """
    h = max(m.max_edge for m in meshes)
    amb = meshes[0].ambient
    hi = ambient_metadata(amb).diameter ** 2 if amb.is_compact else max(m.extent() for m in meshes) ** 2
    return (2.0 * h) ** 2, hi


def sample_centres_scales(meshes: Sequence[SurfaceMesh], n_samples: int, seed: int, s_window: Optional[tuple] = None, spread: float = 1.0):
    """Deterministic sample of ``(x, s)``: ``x`` a vertex of the first mesh moved
    by up to ``spread * sqrt(s)`` inside the ambient, ``s`` log-uniform in the window."""
    rng = np.random.default_rng(seed)
    lo, hi = s_window or trusted_scale_window(meshes)
    ss = np.exp(rng.uniform(math.log(lo), math.log(hi), n_samples))
    mesh = meshes[0]
    idx = rng.integers(0, mesh.n_vertices, n_samples)
    offsets = rng.uniform(-1.0, 1.0, (n_samples, mesh.ambient.chart_dim))
    xs = []
    for k in range(n_samples):
        x = mesh.vertices[idx[k]]
        v = spread * math.sqrt(ss[k]) * offsets[k]
        if mesh.ambient.kind == SPHERE3:
            v = v - np.dot(v, x) * x
            xs.append(exp_map_sphere(x, v))
        elif mesh.ambient.kind == TORUS:
            xs.append(wrap(mesh.ambient, x + v))
        else:
            xs.append(x + v)
    return np.array(xs), ss


def f_monotonicity_check(
    times: Sequence[float],
    meshes: Sequence[SurfaceMesh],
    n_samples: int = 20,
    seed: int = 0,
    tol: float = 1e-2,
    s_window: Optional[tuple] = None,
    quad_order: int = 6,
    kernel_cfg: KernelConfig = DEFAULT_KERNEL,
    samples=None,
) -> MonotonicityReport:
    """Check ``F_{x,s}(M_{t2}) <= F_{x,s+(t2-t1)}(M_{t1})`` over every recorded pair.

    ``slack = lhs - rhs``; the relative violation of a pair is
    ``max(0, slack) / rhs`` and the check passes when the worst one is at most ``tol``.
    """
    if len(meshes) < 2 or len(times) != len(meshes):
        raise ValueError("need at least two recorded meshes with their times")
    amb = meshes[0].ambient
    _require_monotone_ambient(amb)
    xs, ss = samples if samples is not None else sample_centres_scales(meshes, n_samples, seed, s_window)
    quads = [m.quadrature(quad_order) for m in meshes]
    records = []
    worst = 0.0
    for i in range(len(meshes)):
        for j in range(i + 1, len(meshes)):
            dt = times[j] - times[i]
            if dt <= 0:
                raise ValueError("recorded times must increase")
            for x, s in zip(xs, ss):
                lhs = _f_exact(amb, *quads[j], x, s, kernel_cfg)
                rhs = _f_exact(amb, *quads[i], x, s + dt, kernel_cfg)
                slack = lhs - rhs
                rel = max(0.0, slack) / rhs if rhs > 0 else (math.inf if slack > 0 else 0.0)
                worst = max(worst, rel)
                records.append({"t1": times[i], "t2": times[j], "s": float(s), "lhs": lhs, "rhs": rhs, "slack": slack})
    return MonotonicityReport(records, worst, len(records), tol, worst <= tol)


def entropy_monotonicity_check(series: FlowSeries, tol: float = 1e-2) -> MonotonicityReport:
    """``lambda(t_{k+1}) <= lambda(t_k) (1 + tol)`` over consecutive sampled records.

    Also records ``C_kappa = max_k kappa(t_k) / lambda(t_0)``, the constant in
    ``kappa(t) <= C lambda(t_0)``.
    """
    idx = series.sampled()
    if len(idx) < 3:
        raise ValueError("entropy monotonicity needs at least 3 sampled records")
    lam = np.array([series.records[i].lam for i in idx])
    t = np.array([series.records[i].time for i in idx])
    records = []
    worst = 0.0
    for k in range(len(idx) - 1):
        rel = lam[k + 1] / lam[k] - 1.0
        worst = max(worst, rel)
        records.append({"t1": t[k], "t2": t[k + 1], "lhs": lam[k + 1], "rhs": lam[k], "slack": lam[k + 1] - lam[k]})
    kap = [series.records[i].kappa for i in idx if series.records[i].kappa is not None]
    rep = MonotonicityReport(records, max(worst, 0.0), len(records), tol, worst <= tol)
    rep.records.append({"C_kappa": (max(kap) / lam[0]) if kap else None})
    return rep


@dataclass
class AlmostMonotonicityFit:
    C: float
    residual: dict
    samples: str

    def as_dict(self) -> dict:
        return {"C": self.C, "residual": self.residual, "samples": self.samples}


def almost_monotonicity_fit(series: FlowSeries, window: float = 1.0) -> AlmostMonotonicityFit:
    """Smallest ``C >= 1`` with ``lambda(t2) <= C (lambda(t1) + (t2 - t1) A_0)``
    over sampled pairs with ``0 < t2 - t1 <= window``."""
    idx = series.sampled()
    if len(idx) < 2:
        raise ValueError("almost-monotonicity fit needs at least 2 sampled records")
    A0 = series.initial_area
    lam = np.array([series.records[i].lam for i in idx])
    t = np.array([series.records[i].time for i in idx])
    ratios = []
    pairs = []
    for a in range(len(idx)):
        for b in range(a + 1, len(idx)):
            if t[b] - t[a] <= window:
                ratios.append(lam[b] / (lam[a] + (t[b] - t[a]) * A0))
                pairs.append((a, b))
    C = max(1.0, max(ratios)) if ratios else 1.0
    slack = [C * (lam[a] + (t[b] - t[a]) * A0) - lam[b] for a, b in pairs]
    res = {"min_slack": float(min(slack)), "median_slack": float(np.median(slack)), "max_ratio": float(max(ratios))} if slack else {}
    return AlmostMonotonicityFit(float(C), res, f"{len(pairs)} pairs within {window}")


# ---------------------------------------------------------------------------
# Harnack form


@dataclass
class HarnackSample:
    point: np.ndarray
    time: float
    Q: float
    fd_step: float


@dataclass
class HarnackReport:
    samples: List[HarnackSample]
    tol_Q: float
    negative_fraction: float
    substitution: str = "l := k"

    def as_dict(self) -> dict:
        Q = np.array([s.Q for s in self.samples])
        return {
            "n": len(self.samples),
            "tol_Q": self.tol_Q,
            "negative_fraction": self.negative_fraction,
            "min_Q": float(Q.min()),
            "max_Q": float(Q.max()),
            "substitution": self.substitution,
        }


def tangent_frames(mesh: SurfaceMesh) -> np.ndarray:
    """Orthonormal tangent frames (V, 2, chart_dim) of the surface at each vertex."""
    n = vertex_normals(mesh)
    d = mesh.ambient.chart_dim
    # Gram-Schmidt of the chart axes against the normal (and the S^3 position)
    out = np.empty((mesh.n_vertices, 2, d))
    x = mesh.vertices
    for i in range(mesh.n_vertices):
        kept = [n[i]] + ([x[i]] if mesh.ambient.kind == SPHERE3 else [])
        basis = []
        for e in np.eye(d):
            r = e.copy()
            for q in kept:
                r -= np.dot(r, q) * q
            nr = np.linalg.norm(r)
            if nr > 0.3:
                r /= nr
                kept.append(r)
                basis.append(r)
                if len(basis) == 2:
                    break
        out[i] = basis
    return out


def _geodesic_point(ambient: Ambient, p: np.ndarray, e: np.ndarray, h: float) -> np.ndarray:
    if ambient.kind == SPHERE3:
        return exp_map_sphere(p, h * e)
    q = p + h * e
    return wrap(ambient, q) if ambient.kind == TORUS else q


def harnack_q(ambient: Ambient, y, T: float, points: np.ndarray, frames: np.ndarray, t: float, fd_step: float, kernel_cfg: KernelConfig = DEFAULT_KERNEL) -> np.ndarray:
    """Harnack form ``sum_a (D_a D_a k - (D_a k)^2 / k) + m k / (T - t)`` of
    ``k = H(., y, T - t)`` at ``points`` along the two frame directions.

    Derivatives are central differences of step ``fd_step`` along ambient
    geodesics.
    """
    if not t < T:
        raise ValueError("Harnack form needs t < T")
    tau = T - t
    y = ambient.point(y)
    k0 = heat_kernel_array(ambient, points, y, tau, kernel_cfg)[0]
    Q = SURFACE_DIM * k0 / tau
    for a in range(frames.shape[1]):
        e = frames[:, a]
        kp = heat_kernel_array(ambient, _geodesic_point(ambient, points, e, fd_step), y, tau, kernel_cfg)[0]
        km = heat_kernel_array(ambient, _geodesic_point(ambient, points, e, -fd_step), y, tau, kernel_cfg)[0]
        d1 = (kp - km) / (2.0 * fd_step)
        d2 = (kp - 2.0 * k0 + km) / fd_step**2
        Q = Q + d2 - d1 * d1 / k0
    return Q


def harnack_q_gaussian(points: np.ndarray, frames: np.ndarray, y, tau: float) -> np.ndarray:
    """Closed form of :func:`harnack_q` for the Euclidean 3-space kernel.

    ``D^2 k - Dk Dk / k = -k / (2 tau) I``, so ``Q = m k / (2 tau)`` for any frame.
    """
    r2 = np.sum((points - np.asarray(y, float)) ** 2, axis=1)
    k = (4.0 * math.pi * tau) ** -1.5 * np.exp(-r2 / (4.0 * tau))
    return SURFACE_DIM * k / (2.0 * tau)


def harnack_diagnostic(
    ambient: Ambient,
    y,
    T: float,
    mesh: SurfaceMesh,
    t: float,
    fd_step: float = 1e-3,
    tol_Q: Optional[float] = None,
    kernel_cfg: KernelConfig = DEFAULT_KERNEL,
    vertices: Optional[np.ndarray] = None,
) -> HarnackReport:
    """Harnack form at mesh vertices; advisory only.

    The form's ``D D l`` term is read with ``l := k``. A sample counts as
    negative when ``Q < -tol_Q`` (default ``10 * fd_step``).
    """
    if not t < T:
        raise ValueError("Harnack diagnostic needs t < T")
    _require_monotone_ambient(ambient)
    tol = 10.0 * fd_step if tol_Q is None else tol_Q
    idx = np.arange(mesh.n_vertices) if vertices is None else np.asarray(vertices)
    frames = tangent_frames(mesh)[idx]
    pts = mesh.vertices[idx]
    Q = harnack_q(ambient, y, T, pts, frames, t, fd_step, kernel_cfg)
    samples = [HarnackSample(pts[i], t, float(Q[i]), fd_step) for i in range(len(idx))]
    return HarnackReport(samples, tol, float(np.mean(Q < -tol)))


# ---------------------------------------------------------------------------
# minimal limit


@dataclass
class MinimalLimitReport:
    h_max_final: float
    h2_final: float
    h2_initial: float
    verdict: str

    def as_dict(self) -> dict:
        return {
            "h_max_final": self.h_max_final,
            "h2_final": self.h2_final,
            "h2_initial": self.h2_initial,
            "verdict": self.verdict,
        }


MINIMAL_CONSISTENT = "minimal-limit-consistent"
INCONCLUSIVE = "inconclusive"


def minimal_limit_diagnostic(series: FlowSeries, final_mesh: Optional[SurfaceMesh] = None, h_tol: float = 0.05, decay: float = 1e-3) -> MinimalLimitReport:
    """``minimal-limit-consistent`` when ``max|H| < h_tol`` and
    ``int |H|^2 < decay * initial`` at the end of the run."""
    h2_0 = series.records[0].h2_integral
    if final_mesh is None:
        h_max = series.records[-1].h_max
        h2 = series.records[-1].h2_integral
    else:
        curv = normal_curvature(final_mesh)
        h_max = float(curv.norms.max())
        h2 = curv.h2_integral()
    ok = h_max < h_tol and h2 < decay * h2_0
    return MinimalLimitReport(h_max, h2, h2_0, MINIMAL_CONSISTENT if ok else INCONCLUSIVE)
