"""Heat kernels of the model ambients as exactly summed series.

Euclidean space has the closed-form Gaussian. The flat torus is a product of
one-dimensional theta functions, each summed either over lattice images (small
``t``) or over Fourier modes (large ``t``). The unit 3-sphere uses the zonal
spectral series for ``t >= crossover_time`` and the geodesic image series
below it. Every truncation point is chosen from an explicit tail bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ambient import (
    EUCLIDEAN,
    SPHERE3,
    TORUS,
    Ambient,
    geodesic_distance,
    nearest_image,
    random_points,
    sphere_angle,
)

CLOSED_FORM = "closed_form"
IMAGE_SERIES = "image_series"
SPECTRAL_SERIES = "spectral_series"


class NumericOverflowError(ArithmeticError):
    """A kernel evaluation produced a non-finite value."""


@dataclass(frozen=True)
class KernelConfig:
    truncation_tol: float = 1e-12
    crossover_time: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.truncation_tol <= 1e-6:
            raise ValueError("truncation_tol must lie in (0, 1e-6]")
        if not self.crossover_time > 0.0:
            raise ValueError("crossover_time must be positive")


DEFAULT_KERNEL = KernelConfig()


@dataclass(frozen=True)
class KernelValue:
    value: float
    terms_used: int
    form: str


# ---------------------------------------------------------------------------
# flat torus, one axis


def _torus1d_bound(t: float, L: float, form: str) -> float:
    """Upper bound for the one-dimensional periodic kernel."""
    if form == IMAGE_SERIES:
        q = math.exp(-L * L / (4.0 * t))
        return (4.0 * math.pi * t) ** -0.5 * (1.0 + 2.0 * q / (1.0 - q))
    a = 4.0 * math.pi**2 * t / (L * L)
    q = math.exp(-a)
    return (1.0 + 2.0 * q / (1.0 - q)) / L


def _torus1d_terms(t: float, L: float, tol: float, form: str) -> int:
    """Smallest truncation index whose dropped tail is below ``tol``."""
    K = 0
    if form == IMAGE_SERIES:
        pref = (4.0 * math.pi * t) ** -0.5
        while True:
            # |delta| <= L/2, so the images with |k| > K sit at distance >= (K + 1/2) L
            lead = math.exp(-((K + 0.5) * L) ** 2 / (4.0 * t))
            ratio = math.exp(-(K + 1) * L * L / (2.0 * t))
            if 2.0 * pref * lead / (1.0 - ratio) < tol or K > 10_000:
                return K
            K += 1
    a = 4.0 * math.pi**2 * t / (L * L)
    while True:
        lead = math.exp(-a * (K + 1) ** 2)
        ratio = math.exp(-a * (2 * K + 3))
        if 2.0 / L * lead / (1.0 - ratio) < tol or K > 10_000:
            return K
        K += 1


def torus1d_kernel(delta, t: float, L: float, tol: float = 1e-12, form: Optional[str] = None):
    """One-dimensional periodic heat kernel ``sum_k G(delta + k L, t)``.

    Returns ``(values, terms_used, form)``. ``form`` defaults to the image
    series when ``4 t <= L^2 / pi`` and the Fourier series otherwise.
    """
    if form is None:
        form = IMAGE_SERIES if 4.0 * t <= L * L / math.pi else SPECTRAL_SERIES
    d = np.abs(np.asarray(delta, dtype=float))
    d = d - L * np.round(d / L)
    d = np.abs(d)
    K = _torus1d_terms(t, L, tol, form)
    if form == IMAGE_SERIES:
        acc = np.exp(-(d * d) / (4.0 * t))
        for k in range(1, K + 1):
            acc = acc + np.exp(-((d + k * L) ** 2) / (4.0 * t)) + np.exp(-((d - k * L) ** 2) / (4.0 * t))
        return acc * (4.0 * math.pi * t) ** -0.5, 2 * K + 1, form
    if form != SPECTRAL_SERIES:
        raise ValueError(f"unknown series form {form!r}")
    a = 4.0 * math.pi**2 * t / (L * L)
    acc = np.ones_like(d)
    w = 2.0 * math.pi * d / L
    for k in range(1, K + 1):
        acc = acc + 2.0 * math.exp(-a * k * k) * np.cos(k * w)
    return acc / L, K + 1, form


def _torus_kernel(ambient: Ambient, x, y, t, cfg: KernelConfig, form):
    L = ambient.periods
    n = len(L)
    delta = nearest_image(ambient, np.asarray(x, float) - np.asarray(y, float))
    forms = []
    for Li in L:
        f = form or (IMAGE_SERIES if 4.0 * t <= Li * Li / math.pi else SPECTRAL_SERIES)
        forms.append(f)
    bounds = [_torus1d_bound(t, Li, f) for Li, f in zip(L, forms)]
    out = None
    terms = 0
    for i, (Li, f) in enumerate(zip(L, forms)):
        others = math.prod(b for j, b in enumerate(bounds) if j != i)
        tol_i = cfg.truncation_tol / (n * others * 1.01)
        v, k, _ = torus1d_kernel(delta[..., i], t, Li, tol_i, f)
        out = v if out is None else out * v
        terms += k
    form_out = forms[0] if len(set(forms)) == 1 else "mixed"
    return out, terms, form_out


# ---------------------------------------------------------------------------
# unit 3-sphere


def _sphere_spectral_terms(t: float, tol: float) -> int:
    J = 1
    while J < 100_000:
        j = J + 1
        lead = j * j * math.exp(-(j * j - 1) * t) / (2.0 * math.pi**2)
        ratio = ((j + 1) / j) ** 2 * math.exp(-(2 * j + 1) * t)
        if ratio < 1.0 and lead / (1.0 - ratio) < tol:
            return J
        J += 1
    return J


def sphere3_spectral(theta, t: float, tol: float = 1e-12):
    """Zonal eigen-expansion ``sum_j j e^{-(j^2-1)t} sin(j theta) / (2 pi^2 sin theta)``.

    ``sin(j theta)/sin(theta)`` is the Chebyshev polynomial ``U_{j-1}(cos theta)``,
    evaluated by recurrence so the poles need no special casing.
    """
    theta = np.asarray(theta, dtype=float)
    c = np.cos(theta)
    J = _sphere_spectral_terms(t, tol)
    u_prev = np.zeros_like(c)
    u = np.ones_like(c)
    acc = np.zeros_like(c)
    for j in range(1, J + 1):
        acc = acc + j * math.exp(-(j * j - 1) * t) * u
        u_prev, u = u, 2.0 * c * u - u_prev
    return acc / (2.0 * math.pi**2), J


def _image_f(u, a):
    return u * np.exp(-a * u * u)


def _image_f1(u, a):
    return (1.0 - 2.0 * a * u * u) * np.exp(-a * u * u)


def _image_f3(u, a):
    au2 = a * u * u
    return a * (-6.0 + 24.0 * au2 - 8.0 * au2 * au2) * np.exp(-au2)


def _sphere_image_terms(t: float, tol: float) -> int:
    pref = math.exp(t) * (4.0 * math.pi * t) ** -1.5
    K = 1
    while K < 10_000:
        u = (2 * K - 1) * math.pi
        # dropped pairs are odd about both poles; bound |pair / sin| by pi/2 times
        # the derivative envelope, summed geometrically
        env = (1.0 + u * u / (2.0 * t)) * math.exp(-u * u / (4.0 * t))
        if 4.0 * math.pi * pref * env < tol:
            return K
        K += 1
    return K


def sphere3_image(theta, t: float, tol: float = 1e-12):
    """Geodesic image series ``e^t (4 pi t)^{-3/2} sum_k (theta + 2 pi k)/sin(theta) e^{-(theta+2 pi k)^2/4t}``.

    Near ``theta = 0`` and ``theta = pi`` the removable singularity is taken
    from the odd Taylor expansion of the numerator about the pole.
    """
    theta = np.asarray(theta, dtype=float)
    a = 1.0 / (4.0 * t)
    K = _sphere_image_terms(t, tol)
    ks = np.arange(-K, K + 1, dtype=float)
    pref = math.exp(t) * (4.0 * math.pi * t) ** -1.5

    num = np.zeros_like(theta)
    for k in ks:
        num = num + _image_f(theta + 2.0 * math.pi * k, a)
    s = np.sin(theta)

    thresh = 1e-3 * min(1.0, math.sqrt(t))
    out = np.empty_like(theta)
    near0 = theta < thresh
    nearpi = (math.pi - theta) < thresh
    far = ~(near0 | nearpi)
    out[far] = num[far] / s[far]
    for mask, pole, sign in ((near0, 0.0, 1.0), (nearpi, math.pi, -1.0)):
        if not np.any(mask):
            continue
        u = pole + 2.0 * math.pi * np.arange(-K - 1, K + 2, dtype=float)
        d1 = float(np.sum(_image_f1(u, a)))
        d3 = float(np.sum(_image_f3(u, a)))
        delta = theta[mask] - pole
        out[mask] = sign * (d1 + d3 * delta * delta / 6.0) / (1.0 - delta * delta / 6.0)
    return pref * out, 2 * K + 1


def sphere3_kernel(theta, t: float, cfg: KernelConfig = DEFAULT_KERNEL, form: Optional[str] = None):
    if form is None:
        form = SPECTRAL_SERIES if t >= cfg.crossover_time else IMAGE_SERIES
    if form == SPECTRAL_SERIES:
        v, n = sphere3_spectral(theta, t, cfg.truncation_tol)
    elif form == IMAGE_SERIES:
        v, n = sphere3_image(theta, t, cfg.truncation_tol)
    else:
        raise ValueError(f"unknown series form {form!r}")
    return v, n, form


# ---------------------------------------------------------------------------
# public evaluators


def heat_kernel_array(ambient: Ambient, x, y, t: float, cfg: KernelConfig = DEFAULT_KERNEL, form: Optional[str] = None):
    """Vectorized ``H(x, y, t)``; returns ``(values, terms_used, form)``.

    ``x`` and ``y`` broadcast against each other along leading axes.
    """
    if not t > 0:
        raise ValueError("heat kernel time must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = ambient.chart_dim
    if x.shape[-1:] != (d,) or y.shape[-1:] != (d,):
        raise ValueError(f"points must have {d} chart coordinates")
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            if ambient.kind == EUCLIDEAN:
                if form not in (None, CLOSED_FORM):
                    raise ValueError("Euclidean kernel only has the closed form")
                r2 = np.sum((x - y) ** 2, axis=-1)
                vals = (4.0 * math.pi * t) ** (-ambient.dim / 2) * np.exp(-r2 / (4.0 * t))
                terms, used = 1, CLOSED_FORM
            elif ambient.kind == TORUS:
                vals, terms, used = _torus_kernel(ambient, x, y, t, cfg, form)
            else:
                vals, terms, used = sphere3_kernel(sphere_angle(x, y), t, cfg, form)
    except OverflowError as exc:
        raise NumericOverflowError(f"heat kernel overflow at t={t}: {exc}") from None
    vals = np.asarray(vals)
    if not np.all(np.isfinite(vals)):
        raise NumericOverflowError(f"non-finite heat kernel value at t={t}")
    # series roundoff can leave values of order -1e-17 where the kernel is ~0
    vals = np.maximum(vals, 0.0)
    return vals, terms, used


def heat_kernel(ambient: Ambient, x, y, t: float, cfg: KernelConfig = DEFAULT_KERNEL, form: Optional[str] = None) -> KernelValue:
    vals, terms, used = heat_kernel_array(ambient, x, y, t, cfg, form)
    if vals.ndim:
        raise ValueError("heat_kernel evaluates a single pair; use heat_kernel_array")
    return KernelValue(float(vals), terms, used)


def backward_kernel(ambient: Ambient, y, T: float, x, t: float, cfg: KernelConfig = DEFAULT_KERNEL) -> KernelValue:
    """Backward heat kernel ``rho_{y,T}(x, t) = H(x, y, T - t)``."""
    if not t < T:
        raise ValueError("backward kernel needs t < T")
    return heat_kernel(ambient, x, y, T - t, cfg)


# ---------------------------------------------------------------------------
# self-test of the defining properties


@dataclass
class KernelSelfTestReport:
    ambient: str
    times: list
    max_symmetry_err: float
    max_normalization_err: float
    max_semigroup_err: float
    max_pde_residual: float
    max_dual_series_err: float
    pde_residual_scale: float
    samples: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "ambient": self.ambient,
            "times": list(self.times),
            "max_symmetry_err": self.max_symmetry_err,
            "max_normalization_err": self.max_normalization_err,
            "max_semigroup_err": self.max_semigroup_err,
            "max_pde_residual": self.max_pde_residual,
            "max_dual_series_err": self.max_dual_series_err,
            "pde_residual_scale": self.pde_residual_scale,
            "samples": self.samples,
        }


def _torus_grid(ambient: Ambient, npa: int):
    axes = [(np.arange(npa) + 0.5) * (L / npa) for L in ambient.periods]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    w = float(np.prod(ambient.periods)) / pts.shape[0]
    return pts, np.full(pts.shape[0], w)


def _gauss_legendre(n: int, a: float, b: float):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def _gl_cube(rad: float, n: int):
    g, gw = _gauss_legendre(n, -rad, rad)
    P = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    W = np.einsum("i,j,k->ijk", gw, gw, gw).ravel()
    return P, W


def _frame_to(x: np.ndarray) -> np.ndarray:
    """Orthogonal matrix whose first row is ``x`` (a unit vector of R^4)."""
    M = np.concatenate([x[:, None], np.eye(4)], axis=1)
    q, _ = np.linalg.qr(M)
    if q[:, 0] @ x < 0:
        q = -q
    return q.T


def _sphere_normalization(theta_rule, t, cfg):
    th, w = theta_rule
    vals, _, _ = sphere3_kernel(th, t, cfg)
    return float(4.0 * math.pi * np.sum(w * vals * np.sin(th) ** 2))


def _sphere_semigroup(x, y, t, s, cfg, n_theta=320, n_alpha=320):
    """``int_{S^3} H(x,z,t-s) H(z,y,s) dz`` in hyperspherical coordinates about ``x``."""
    R = _frame_to(x)
    yl = R @ y
    phi = math.atan2(np.linalg.norm(yl[1:]), yl[0])
    th, wt = _gauss_legendre(n_theta, 0.0, math.pi)
    ca, wa = _gauss_legendre(n_alpha, -1.0, 1.0)
    TH, CA = np.meshgrid(th, ca, indexing="ij")
    cos_zy = np.clip(math.cos(phi) * np.cos(TH) + math.sin(phi) * np.sin(TH) * CA, -1.0, 1.0)
    # arccos is accurate enough away from the quadrature-free poles here
    th_zy = np.arccos(cos_zy)
    h1, _, _ = sphere3_kernel(TH, t - s, cfg)
    h2, _, _ = sphere3_kernel(th_zy, s, cfg)
    integrand = h1 * h2 * np.sin(TH) ** 2
    return float(2.0 * math.pi * np.einsum("i,j,ij->", wt, wa, integrand))


def _laplacian_fd(ambient: Ambient, x, y, t, h, cfg):
    """Central-difference Laplacian in ``y`` (sphere: degree-0 extension to R^4)."""
    d = ambient.chart_dim
    acc = 0.0
    h0, _, _ = heat_kernel_array(ambient, x, y, t, cfg)
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        yp, ym = y + e, y - e
        if ambient.kind == SPHERE3:
            yp = yp / np.linalg.norm(yp)
            ym = ym / np.linalg.norm(ym)
        hp, _, _ = heat_kernel_array(ambient, x, yp, t, cfg)
        hm, _, _ = heat_kernel_array(ambient, x, ym, t, cfg)
        acc += (hp - 2.0 * h0 + hm) / (h * h)
    return float(acc), float(h0)


def kernel_selftest(ambient: Ambient, cfg: KernelConfig = DEFAULT_KERNEL, sample_count: int = 4, times=None, seed: int = 0) -> KernelSelfTestReport:
    """Check symmetry, normalization, semigroup, heat equation and series duality.

    Normalization and semigroup integrals use a periodic midpoint (trapezoid)
    tensor rule on the flat torus, Gauss-Legendre product-angle rules on S^3
    and a Gauss-Legendre cube of half-width ``8 sqrt(t)`` in Euclidean space.
    Finite-difference steps are ``h = 1e-3 t``; the PDE residual is reported
    relative to ``|d_t H|`` and is diagnostic only.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    if times is None:
        times = [0.05, 0.5, 2.0]
    times = [float(t) for t in times]
    rng = np.random.default_rng(seed)
    sym = norm = semi = pde = dual = scale = 0.0
    samples = []

    if ambient.kind == TORUS:
        grid = _torus_grid(ambient, 40)
    theta_rule = _gauss_legendre(400, 0.0, math.pi)

    for t in times:
        xs = random_points(ambient, sample_count, rng)
        ys = random_points(ambient, sample_count, rng)
        if ambient.kind == EUCLIDEAN:
            ys = xs + rng.normal(scale=math.sqrt(t), size=xs.shape)
        for x, y in zip(xs, ys):
            rec = {"t": t}
            hxy, _, _ = heat_kernel_array(ambient, x, y, t, cfg)
            hyx, _, _ = heat_kernel_array(ambient, y, x, t, cfg)
            rec["symmetry"] = float(abs(hxy - hyx))

            if ambient.kind == TORUS:
                pts, w = grid
                total = float(np.sum(w * heat_kernel_array(ambient, x, pts, t, cfg)[0]))
                s = 0.5 * t
                conv = float(
                    np.sum(w * heat_kernel_array(ambient, x, pts, t - s, cfg)[0] * heat_kernel_array(ambient, pts, y, s, cfg)[0])
                )
            elif ambient.kind == SPHERE3:
                total = _sphere_normalization(theta_rule, t, cfg)
                s = 0.5 * t
                conv = _sphere_semigroup(x, y, t, s, cfg)
            else:
                # the normalization Gaussian has std sqrt(2t); the semigroup
                # integrand has std sqrt(t/2) about the midpoint
                P, W = _gl_cube(12.0 * math.sqrt(t), 56)
                total = float(np.sum(W * heat_kernel_array(ambient, x, x + P, t, cfg)[0]))
                P, W = _gl_cube(8.0 * math.sqrt(t), 48)
                s = 0.5 * t
                mid = 0.5 * (x + y)
                conv = float(
                    np.sum(W * heat_kernel_array(ambient, x, mid + P, t - s, cfg)[0] * heat_kernel_array(ambient, mid + P, y, s, cfg)[0])
                )
            rec["normalization"] = abs(total - 1.0)
            rec["semigroup"] = abs(float(hxy) - conv)

            h = 1e-3 * t
            hp, _, _ = heat_kernel_array(ambient, x, y, t + h, cfg)
            hm, _, _ = heat_kernel_array(ambient, x, y, t - h, cfg)
            dt = float(hp - hm) / (2.0 * h)
            lap, h0 = _laplacian_fd(ambient, x, y, t, h, cfg)
            rec["pde_residual"] = abs(dt - lap) / max(abs(dt), abs(lap), h0 / t, 1e-300)
            # step 1e-3 t against a Gaussian exponent d^2/4t, plus cancellation
            expo = 1.0 + float(geodesic_distance(ambient, x, y)) ** 2 / (4.0 * t)
            rec["pde_expected"] = (1e-3 * expo) ** 2 + 1e-16 / (1e-3) ** 2
            scale = max(scale, rec["pde_expected"])

            if ambient.kind == EUCLIDEAN:
                rec["dual_series"] = 0.0
            else:
                a, _, _ = heat_kernel_array(ambient, x, y, t, cfg, IMAGE_SERIES)
                b, _, _ = heat_kernel_array(ambient, x, y, t, cfg, SPECTRAL_SERIES)
                rec["dual_series"] = float(abs(a - b))
            sym = max(sym, rec["symmetry"])
            norm = max(norm, rec["normalization"])
            semi = max(semi, rec["semigroup"])
            pde = max(pde, rec["pde_residual"])
            dual = max(dual, rec["dual_series"])
            samples.append(rec)

    return KernelSelfTestReport(ambient.spec(), times, sym, norm, semi, pde, dual, scale, samples)
