"""Explicit discrete mean curvature flow and its recorded time series.

Each step moves every vertex by ``dt * H_i`` with ``dt = dt_safety * h_min^2 / 2``,
where ``H_i`` is the normal part of the cotangent mean curvature vector
(:func:`~mcflab.surface.normal_curvature`); recorded ``|H|`` values refer to
the same vector. Sphere vertices are pushed back to S^3
after the step; torus vertices are re-wrapped and the triangle lifts shifted
by the same lattice vectors, so the unwrapped geometry is continuous.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from .ambient import SPHERE3, TORUS, geodesic_distance, wrap
from .functionals import SearchConfig, area_growth, entropy
from .heat_kernel import DEFAULT_KERNEL, KernelConfig
from .surface import MIN_TRIANGLE_AREA, SurfaceMesh, normal_curvature, total_area


@dataclass(frozen=True)
class FlowState:
    mesh: SurfaceMesh
    time: float = 0.0


@dataclass(frozen=True)
class FlowConfig:
    """Step size, recording cadence and stop conditions.

    Records are taken every ``record_every`` steps, or at multiples of
    ``record_dt`` when it is set (steps are shortened to land on them).
    ``lambda_every = k > 0`` evaluates entropy (and area growth unless
    ``with_kappa`` is off) on every k-th record. The run stops cleanly at ``t_end``, or at the first record where
    ``max|H|`` exceeds ``max_h`` or the area drops below ``min_area``; a triangle quality
    below ``min_quality`` or a non-finite value is an error.
    """

    dt_safety: float = 0.2
    record_every: int = 10
    record_dt: Optional[float] = None
    lambda_every: int = 0
    with_kappa: bool = True
    t_end: float = 1.0
    max_h: float = math.inf
    min_area: float = 0.0
    min_quality: float = 0.05
    max_steps: int = 1_000_000
    keep_meshes: bool = True

    def __post_init__(self):
        if not 0.0 < self.dt_safety <= 1.0:
            raise ValueError("dt_safety must lie in (0, 1]")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")
        if self.record_dt is not None and self.record_dt <= 0:
            raise ValueError("record_dt must be positive")
        if self.lambda_every < 0:
            raise ValueError("lambda_every must be non-negative")


class FlowStopped(RuntimeError):
    """The flow cannot continue; ``state`` is the last valid state."""

    def __init__(self, message: str, state: FlowState):
        super().__init__(message)
        self.state = state


def stable_dt(mesh: SurfaceMesh, dt_safety: float) -> float:
    return dt_safety * mesh.min_edge**2 / 2.0


def _advance(mesh: SurfaceMesh, velocity: np.ndarray, dt: float) -> SurfaceMesh:
    amb = mesh.ambient
    moved = mesh.vertices + dt * velocity
    if amb.kind == SPHERE3:
        moved = moved / np.linalg.norm(moved, axis=1, keepdims=True)
        return mesh.with_vertices(moved, validate=False)
    if amb.kind == TORUS:
        L = amb.period_array
        # use the mesh's own wrap so that rounding at the cell faces agrees
        wrapped = wrap(amb, moved)
        shift = np.rint((moved - wrapped) / L).astype(np.int64)
        lifts = mesh.lifts + shift[mesh.triangles]
        return mesh.with_vertices(wrapped, lifts=lifts, validate=False)
    return mesh.with_vertices(moved, validate=False)


def _check(mesh: SurfaceMesh, min_quality: float) -> Optional[str]:
    if not np.all(np.isfinite(mesh.vertices)):
        return "non-finite vertex positions"
    if np.any(mesh.triangle_areas <= MIN_TRIANGLE_AREA):
        return "degenerate triangle"
    q = float(mesh.triangle_quality().min())
    if q < min_quality:
        return f"triangle quality collapsed to {q:.3g} < {min_quality}"
    return None


def flow_step(state: FlowState, cfg: FlowConfig = FlowConfig(), dt_cap: float = math.inf) -> FlowState:
    """One explicit Euler step ``x += dt H``; raises :class:`FlowStopped` on collapse."""
    H = normal_curvature(state.mesh).vectors
    if not np.all(np.isfinite(H)):
        raise FlowStopped("non-finite mean curvature", state)
    dt = min(stable_dt(state.mesh, cfg.dt_safety), dt_cap)
    if not dt > 0:
        raise FlowStopped("step size underflow", state)
    new = _advance(state.mesh, H, dt)
    problem = _check(new, cfg.min_quality)
    if problem:
        raise FlowStopped(problem, state)
    return FlowState(new, state.time + dt)


@dataclass
class FlowRecord:
    time: float
    area: float
    h2_integral: float
    h_max: float
    dt: float
    min_quality: float
    step: int
    lam: Optional[float] = None
    kappa: Optional[float] = None


CSV_FIELDS = ["time", "area", "h2_integral", "h_max", "lambda", "kappa", "dt", "min_quality"]


@dataclass
class FlowSeries:
    records: List[FlowRecord] = field(default_factory=list)
    meshes: List[SurfaceMesh] = field(default_factory=list)
    final: Optional[FlowState] = None
    stop_reason: str = ""
    failed: bool = False

    @property
    def times(self) -> np.ndarray:
        return np.array([r.time for r in self.records])

    def column(self, name: str) -> np.ndarray:
        name = {"lambda": "lam"}.get(name, name)
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in self.records], float)

    @property
    def initial_area(self) -> float:
        return self.records[0].area

    def sampled(self) -> List[int]:
        """Indices of records carrying entropy samples."""
        return [i for i, r in enumerate(self.records) if r.lam is not None]

    def t_sequence(self, count: int = 5) -> np.ndarray:
        """Times of small ``int |H|^2``: the smallest record in each of
        ``count`` consecutive time blocks, so the selection increases in time."""
        t = self.times
        h2 = self.column("h2_integral")
        blocks = np.array_split(np.arange(len(t)), min(count, len(t)))
        return np.array([t[b[np.argmin(h2[b])]] for b in blocks if len(b)])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_FIELDS)
            for r in self.records:
                w.writerow(
                    [
                        repr(r.time),
                        repr(r.area),
                        repr(r.h2_integral),
                        repr(r.h_max),
                        "" if r.lam is None else repr(r.lam),
                        "" if r.kappa is None else repr(r.kappa),
                        repr(r.dt),
                        repr(r.min_quality),
                    ]
                )


def read_csv(path) -> FlowSeries:
    """Records of a series written by :meth:`FlowSeries.write_csv` (no meshes)."""
    series = FlowSeries()
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            opt = lambda k: float(row[k]) if row[k] else None  # noqa: E731
            series.records.append(
                FlowRecord(
                    time=float(row["time"]),
                    area=float(row["area"]),
                    h2_integral=float(row["h2_integral"]),
                    h_max=float(row["h_max"]),
                    dt=float(row["dt"]),
                    min_quality=float(row["min_quality"]),
                    step=int(row.get("step") or 0),
                    lam=opt("lambda"),
                    kappa=opt("kappa"),
                )
            )
    return series


def run_flow(
    mesh: SurfaceMesh,
    cfg: FlowConfig = FlowConfig(),
    search_cfg: SearchConfig = SearchConfig(),
    kernel_cfg: KernelConfig = DEFAULT_KERNEL,
) -> FlowSeries:
    """Integrate from ``mesh`` until a stop condition and record the series.

    A :class:`FlowStopped` failure ends the run with ``failed = True``; the
    records up to the last valid state are kept.
    """
    state = FlowState(mesh, 0.0)
    series = FlowSeries()
    step = 0
    last_dt = 0.0
    n_records = 0
    n_grid = 1
    next_record = cfg.record_dt if cfg.record_dt else math.inf

    def record():
        nonlocal n_records
        m = state.mesh
        curv = normal_curvature(m)
        rec = FlowRecord(
            time=state.time,
            area=total_area(m),
            h2_integral=curv.h2_integral(),
            h_max=float(curv.norms.max()),
            dt=last_dt,
            min_quality=float(m.triangle_quality().min()),
            step=step,
        )
        if cfg.lambda_every and n_records % cfg.lambda_every == 0:
            rec.lam = entropy(m, search_cfg, kernel_cfg).lam
            if cfg.with_kappa:
                rec.kappa = area_growth(m, search_cfg).kappa
        series.records.append(rec)
        if cfg.keep_meshes:
            series.meshes.append(m)
        n_records += 1
        return rec

    rec = record()
    reason = ""
    while True:
        if state.time >= cfg.t_end * (1.0 - 1e-12):
            reason = "reached t_end"
            break
        if rec.h_max > cfg.max_h:
            reason = f"max|H| {rec.h_max:.4g} exceeded {cfg.max_h}"
            break
        if rec.area < cfg.min_area:
            reason = f"area {rec.area:.4g} fell below {cfg.min_area}"
            break
        if step >= cfg.max_steps:
            reason = "reached max_steps"
            break
        cap = min(cfg.t_end, next_record) - state.time
        try:
            new = flow_step(state, cfg, dt_cap=cap)
        except FlowStopped as exc:
            series.failed = True
            reason = str(exc)
            state = exc.state
            break
        last_dt = new.time - state.time
        state = new
        step += 1
        on_grid = state.time >= next_record * (1.0 - 1e-12)
        if on_grid:
            state = FlowState(state.mesh, next_record)
            n_grid += 1
            next_record = n_grid * cfg.record_dt
        at_end = state.time >= cfg.t_end * (1.0 - 1e-12)
        if at_end:
            state = FlowState(state.mesh, cfg.t_end)
        if on_grid or at_end or (cfg.record_dt is None and step % cfg.record_every == 0):
            rec = record()
    if series.records[-1].time != state.time and not series.failed:
        record()
    series.final = state
    series.stop_reason = reason
    return series


def vertex_drift(mesh0: SurfaceMesh, mesh1: SurfaceMesh) -> float:
    """Largest distance between corresponding vertices.

    For meshes with the same triangles this bounds their Hausdorff distance.
    """
    return float(np.max(geodesic_distance(mesh0.ambient, mesh0.vertices, mesh1.vertices)))


def mean_radius(mesh: SurfaceMesh, center=None) -> float:
    """Mean vertex distance from ``center`` (default: vertex centroid)."""
    c = mesh.vertices.mean(axis=0) if center is None else np.asarray(center, float)
    return float(np.mean(np.linalg.norm(mesh.vertices - c, axis=1)))


def mean_polar_angle(mesh: SurfaceMesh, pole=(0.0, 0.0, 0.0, 1.0)) -> float:
    """Mean geodesic distance of the vertices from ``pole`` in S^3."""
    return float(np.mean(geodesic_distance(mesh.ambient, mesh.vertices, np.asarray(pole, float))))


@dataclass
class FirstVariationReport:
    times: np.ndarray
    darea_dt: np.ndarray
    minus_h2: np.ndarray
    defects: np.ndarray
    max_relative_defect: float
    floor: float

    def as_dict(self) -> dict:
        return {
            "max_relative_defect": self.max_relative_defect,
            "floor": self.floor,
            "n_interior": int(self.times.size),
            "max_abs_darea_dt": float(np.max(np.abs(self.darea_dt))),
            "max_abs_h2": float(np.max(np.abs(self.minus_h2))),
        }


def first_variation_check(series: FlowSeries, floor: float = 1e-4) -> FirstVariationReport:
    """Compare ``d(area)/dt`` (central differences) with ``-int |H|^2``.

    The defect at each interior record is ``|lhs - rhs| / max(|lhs|, |rhs|, floor)``;
    the absolute floor keeps static runs, where both sides vanish, from
    dividing noise by noise.
    """
    if len(series.records) < 3:
        raise ValueError("first variation check needs at least 3 records")
    t = series.times
    a = series.column("area")
    h2 = series.column("h2_integral")
    lhs = np.gradient(a, t)[1:-1]
    rhs = -h2[1:-1]
    den = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), floor)
    defects = np.abs(lhs - rhs) / den
    return FirstVariationReport(t[1:-1], lhs, rhs, defects, float(defects.max()), floor)


def series_summary(series: FlowSeries) -> dict:
    last = series.records[-1]
    return {
        "records": len(series.records),
        "final": asdict(last),
        "stop_reason": series.stop_reason,
        "failed": series.failed,
    }
