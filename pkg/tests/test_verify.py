import math

import numpy as np
import pytest

from mcflab.ambient import Ambient
from mcflab.flow import FlowConfig, run_flow
from mcflab.functionals import SearchConfig, f_functional
from mcflab.shapes import clifford_torus, equator, icosphere, torus_slice
from mcflab.verify import (
    INCONCLUSIVE,
    MINIMAL_CONSISTENT,
    almost_monotonicity_fit,
    entropy_monotonicity_check,
    f_monotonicity_check,
    harnack_diagnostic,
    harnack_q,
    harnack_q_gaussian,
    minimal_limit_diagnostic,
    sample_centres_scales,
    tangent_frames,
    trusted_scale_window,
)

E3 = Ambient.euclidean(3)
T3 = Ambient.torus((1.0, 1.0, 1.0))


def sphere_f(R, s):
    return (4 * math.pi) ** -0.5 * R * R / s * math.exp(-R * R / (4 * s))


@pytest.fixture(scope="module")
def shrinking():
    return run_flow(icosphere(E3, 1.0, 3), FlowConfig(t_end=0.1, record_dt=0.025, lambda_every=1))


@pytest.fixture(scope="module", params=["equator", "clifford", "slice"])
def static_series(request):
    mesh = {"equator": equator(3), "clifford": clifford_torus(16), "slice": torus_slice(T3, 0.5, 16)}[request.param]
    return run_flow(mesh, FlowConfig(t_end=0.2, record_dt=0.1, lambda_every=1, with_kappa=False))


def test_huisken_example():
    ser = run_flow(icosphere(E3, 1.0, 3), FlowConfig(t_end=0.05, record_dt=0.05))
    rep = f_monotonicity_check(ser.times, ser.meshes, samples=(np.zeros((1, 3)), np.array([0.25])))
    rec = rep.records[0]
    assert rep.passed and rec["slack"] < 0
    # closed forms for the round spheres, up to the chordal area defect
    assert rec["lhs"] == pytest.approx(sphere_f(math.sqrt(0.8), 0.25), rel=0.02)
    assert rec["rhs"] == pytest.approx(sphere_f(1.0, 0.3), rel=0.02)


def test_static_slice_time_shift_identity():
    sl = torus_slice(T3, 0.5, 16)
    xs, ss = sample_centres_scales([sl], 5, seed=1)
    rep = f_monotonicity_check([0.0, 0.1], [sl, sl], samples=(xs, ss))
    assert rep.passed and rep.worst_violation == 0.0
    for rec, x, s in zip(rep.records, xs, ss):
        shift = f_functional(sl, x, s).value - f_functional(sl, x, s + 0.1).value
        assert abs(rec["slack"] - shift) < 1e-6


def test_static_surfaces_are_exactly_monotone(static_series):
    e = entropy_monotonicity_check(static_series)
    f = f_monotonicity_check(static_series.times, static_series.meshes, n_samples=5)
    assert e.worst_violation < 1e-6 and f.worst_violation < 1e-6
    lam = static_series.column("lambda")
    assert np.ptp(lam) < 1e-6
    assert almost_monotonicity_fit(static_series).C == pytest.approx(1.0, abs=1e-6)


def test_shrinking_sphere_monotone(shrinking):
    e = entropy_monotonicity_check(shrinking)
    assert e.passed and e.n_pairs == len(shrinking.sampled()) - 1
    assert e.records[-1]["C_kappa"] > 0
    fit = almost_monotonicity_fit(shrinking)
    assert 1.0 <= fit.C <= 1.01
    assert fit.residual["min_slack"] >= 0


def test_fit_does_not_worsen_as_search_tightens():
    Cs = []
    for tol in (1e-3, 1e-7):
        ser = run_flow(icosphere(E3, 1.0, 2), FlowConfig(t_end=0.06, record_dt=0.02, lambda_every=1, with_kappa=False), SearchConfig(tol=tol))
        Cs.append(almost_monotonicity_fit(ser).C)
    assert Cs[1] <= Cs[0] + 1e-3


def test_reports_are_reproducible(shrinking):
    a = f_monotonicity_check(shrinking.times, shrinking.meshes, n_samples=4, seed=9)
    b = f_monotonicity_check(shrinking.times, shrinking.meshes, n_samples=4, seed=9)
    assert a.records == b.records and a.as_dict() == b.as_dict()


def test_refusals():
    m = icosphere(E3, 1.0, 2)
    with pytest.raises(ValueError):
        f_monotonicity_check([0.0], [m])
    with pytest.raises(ValueError):
        f_monotonicity_check([0.0, 0.0], [m, m])
    with pytest.raises(ValueError):
        harnack_diagnostic(T3, [0, 0, 0], 0.5, torus_slice(T3, 0.5, 4), 0.5)
    ser = run_flow(m, FlowConfig(t_end=0.02, record_dt=0.01))
    with pytest.raises(ValueError):
        entropy_monotonicity_check(ser)
    with pytest.raises(ValueError):
        almost_monotonicity_fit(ser)


def test_trusted_window():
    sl = torus_slice(T3, 0.5, 8)
    lo, hi = trusted_scale_window([sl])
    assert lo == pytest.approx((2 * sl.max_edge) ** 2) and hi == pytest.approx(0.75)
    _, ss = sample_centres_scales([sl], 50, seed=0)
    assert np.all((ss >= lo) & (ss <= hi))


def _plane_patch():
    m = torus_slice(T3, 0.5, 8)
    return m.vertices - 0.5, tangent_frames(m)


def test_harnack_gaussian_oracle():
    pts, frames = _plane_patch()
    y = [0.1, 0.0, 0.2]
    q = harnack_q(E3, y, 1.0, pts, frames, 0.5, 1e-3)
    exact = harnack_q_gaussian(pts, frames, y, 0.5)
    np.testing.assert_allclose(q, exact, rtol=1e-5)
    assert q.min() >= -1e-6


def test_harnack_fd_error_is_second_order():
    pts, frames = _plane_patch()
    y = [0.1, 0.0, 0.2]
    q = [harnack_q(E3, y, 1.0, pts, frames, 0.5, h) for h in (0.04, 0.02, 0.01)]
    ratio = np.max(np.abs(q[0] - q[1])) / np.max(np.abs(q[1] - q[2]))
    assert 2.0 <= ratio <= 8.0


def test_harnack_torus():
    m = torus_slice(T3, 0.5, 8)
    rep = harnack_diagnostic(T3, m.vertices[0], 1.0, m, 0.5)
    assert rep.negative_fraction < 0.05 and rep.as_dict()["substitution"] == "l := k"
    assert all(s.fd_step == 1e-3 for s in rep.samples)
    far = harnack_diagnostic(T3, m.vertices[0], 60.5, m, 0.5)
    np.testing.assert_allclose([s.Q for s in far.samples], 2.0 / 60.0, rtol=1e-9)


def test_tangent_frames_are_orthonormal_and_tangent():
    for m in (equator(2), icosphere(E3, 1.0, 2), torus_slice(T3, 0.2, 6, perturb=(0.05, 1))):
        F = tangent_frames(m)
        G = np.einsum("vad,vbd->vab", F, F)
        np.testing.assert_allclose(G, np.broadcast_to(np.eye(2), G.shape), atol=1e-12)
        if m.ambient.kind == "sphere3":
            assert np.max(np.abs(np.einsum("vad,vd->va", F, m.vertices))) < 1e-12


def test_minimal_limit_verdicts(static_series, shrinking):
    assert minimal_limit_diagnostic(shrinking).verdict == INCONCLUSIVE
    rep = minimal_limit_diagnostic(static_series, static_series.final.mesh)
    # a static minimal surface has no curvature to decay; h_max decides
    assert rep.h_max_final < 0.05
    assert set(rep.as_dict()) == {"h_max_final", "h2_final", "h2_initial", "verdict"}


def test_perturbed_equator_limit_is_minimal():
    ser = run_flow(equator(2, perturb=(0.05, 2)), FlowConfig(t_end=2.0, record_dt=0.1))
    assert minimal_limit_diagnostic(ser).verdict == MINIMAL_CONSISTENT
