import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcflab.ambient import Ambient, Isometry, apply_isometry, random_rotation
from mcflab.functionals import (
    SearchConfig,
    area_growth,
    ball_quadrature,
    ball_ratio,
    coarse_f,
    entropy,
    equivalence_check,
    f_functional,
    golden_max,
    li_yau_check,
    map_ordered,
)
from mcflab.shapes import clifford_torus, equator, geodesic_sphere, icosphere, torus_slice
from mcflab.surface import SurfaceMesh

E3 = Ambient.euclidean(3)
T3 = Ambient.torus((1.0, 1.0, 1.0))
S3 = Ambient.sphere3()
SPHERE_LAMBDA = (4 * math.pi) ** -0.5 * 4 / math.e


def sphere_f(R, t):
    """F at the centre of a round sphere of radius R in R^3."""
    return (4 * math.pi) ** -0.5 * R * R / t * math.exp(-R * R / (4 * t))


@pytest.fixture(scope="module")
def ico3():
    return icosphere(E3, 1.0, 3)


@pytest.fixture(scope="module")
def slice16():
    return torus_slice(T3, 0.5, 16)


def test_f_examples():
    ico4 = icosphere(E3, 1.0, 4)
    assert abs(f_functional(ico4, [0, 0, 0], 0.25).value / SPHERE_LAMBDA - 1) < 5e-3
    s = torus_slice(T3, 0.0, 32)
    v = f_functional(s, s.vertices[17], 1.0)
    assert abs(v.value - 1.0) < 1e-3 and v.trusted
    assert f_functional(ico4, [20.0, 0, 0], 1e-4).value < 1e-10
    assert not f_functional(ico4, [0, 0, 0], 1e-4).trusted


@pytest.mark.parametrize("t", [0.05, 0.25, 1.0, 4.0])
def test_f_matches_sphere_closed_form(t):
    # chordal triangles sit inside the sphere, so agreement is O(h^2)
    errs = [abs(f_functional(icosphere(E3, 2.0, lv), [0, 0, 0], t).value / sphere_f(2.0, t) - 1) for lv in (3, 4)]
    assert 3.5 < errs[0] / errs[1] < 4.5 and errs[1] < 0.03


def test_entropy_icosphere(ico3):
    rep = entropy(ico3)
    assert abs(rep.lam / SPHERE_LAMBDA - 1) < 1e-2
    assert abs(rep.argmax_t / 0.25 - 1) < 0.1
    assert np.linalg.norm(rep.argmax_x) < 0.05
    assert rep.trusted and not rep.boundary_sup
    assert rep.lam >= rep.coarse_lam
    d = rep.as_dict()
    assert d["lambda"] == rep.lam and len(d["argmax_x"]) == 3


def test_entropy_flat_slice_boundary_max(slice16):
    rep = entropy(slice16, SearchConfig(t_max=1.0))
    assert abs(rep.lam - 1.0) < 1e-3
    assert rep.argmax_t == 1.0 and rep.boundary_sup and rep.trusted


def test_entropy_empty_window(ico3):
    with pytest.raises(ValueError, match="empty t window"):
        entropy(ico3, SearchConfig(t_min=1.0, t_max=0.5))
    with pytest.raises(ValueError, match="empty radius window"):
        area_growth(ico3, SearchConfig(r_min=1.0, r_max=0.5))


def test_entropy_scale_invariance(ico3):
    big = icosphere(E3, 3.0, 3)
    assert entropy(big).lam == pytest.approx(entropy(ico3).lam, rel=1e-6)


def test_isometry_invariance_torus():
    m = torus_slice(T3, 0.3, 12, perturb=(0.05, 2))
    iso = Isometry.translate(T3, [0.37, 0.81, 0.22])
    moved = SurfaceMesh(T3, apply_isometry(iso, m.vertices), m.triangles)
    a, b = entropy(m), entropy(moved)
    assert abs(a.lam - b.lam) < 1e-8
    assert abs(area_growth(m).kappa - area_growth(moved).kappa) < 1e-8


def test_isometry_invariance_sphere():
    m = geodesic_sphere(1.0, 2, perturb=(0.05, 2))
    Q = random_rotation(4, np.random.default_rng(7))
    moved = SurfaceMesh(S3, apply_isometry(Isometry.rotate(S3, Q), m.vertices), m.triangles)
    assert abs(entropy(m).lam - entropy(moved).lam) < 1e-8
    assert abs(area_growth(m).kappa - area_growth(moved).kappa) < 1e-8


def test_area_growth_examples(ico3, slice16):
    rep = area_growth(ico3)
    assert abs(rep.kappa / (4 * math.pi) - 1) < 0.02
    assert np.linalg.norm(rep.argmax_center) < 0.05 and abs(rep.argmax_radius - 1) < 0.05
    assert abs(area_growth(slice16).kappa / math.pi - 1) < 0.02
    big = area_growth(icosphere(E3, 2.0, 3)).kappa
    assert abs(big / rep.kappa - 1) < 0.02


@pytest.mark.parametrize(
    "mesh",
    [geodesic_sphere(0.3, 3), clifford_torus(32), torus_slice(T3, 0.5, 16, perturb=(0.05, 2)), icosphere(E3, 1.0, 3, perturb=(0.2, 3)), equator(3)],
    ids=["small-geo", "clifford", "pslice", "bumpy", "equator"],
)
def test_kappa_lower_bound(mesh):
    assert area_growth(mesh).kappa >= math.pi * 0.95


def test_monotone_search(slice16):
    m = torus_slice(T3, 0.5, 12, perturb=(0.05, 2))
    for cfg_small, cfg_big in [(SearchConfig(lattice=4), SearchConfig(lattice=8)), (SearchConfig(lattice=4, n_t=24), SearchConfig(lattice=4, n_t=48))]:
        assert entropy(m, cfg_big).lam >= entropy(m, cfg_small).lam - 1e-6
        assert area_growth(m, cfg_big).kappa >= area_growth(m, cfg_small).kappa - 1e-6


def test_threads_are_bit_identical():
    m = geodesic_sphere(0.8, 2, perturb=(0.05, 2))
    one = entropy(m, SearchConfig(threads=1))
    three = entropy(m, SearchConfig(threads=3))
    assert one.lam == three.lam and np.array_equal(one.argmax_x, three.argmax_x)
    assert area_growth(m, SearchConfig(threads=1)).kappa == area_growth(m, SearchConfig(threads=3)).kappa
    ts = np.geomspace(0.01, 1.0, 7)
    np.testing.assert_array_equal(coarse_f(m, m.vertices, ts, threads=1), coarse_f(m, m.vertices, ts, threads=4))


@pytest.mark.parametrize("mesh", [icosphere(E3, 1.0, 3), torus_slice(T3, 0.2, 16, perturb=(0.05, 1)), geodesic_sphere(1.0, 3)], ids=["euc", "torus", "sphere"])
def test_coarse_table_tracks_exact_f(mesh):
    ts = np.array([0.02, 0.1, 0.5])
    centers = mesh.vertices[::37]
    approx = coarse_f(mesh, centers, ts)
    exact = np.array([[f_functional(mesh, c, t).value for t in ts] for c in centers])
    assert np.max(np.abs(approx - exact) / exact) < 0.05


def test_ball_ratio_flat_disc():
    m = torus_slice(T3, 0.5, 32)
    quad = ball_quadrature(m)
    for r in (0.1, 0.3):
        val, radius = ball_ratio(T3, quad, m.vertices[5], r, r * (1 + 1e-9))
        assert abs(val / math.pi - 1) < 0.01


def test_equivalence_examples():
    fam = [torus_slice(T3, 0.5, 16), torus_slice(T3, 0.5, 16, perturb=(0.05, 2))]
    rep_t = equivalence_check(fam)
    rep_s = equivalence_check([geodesic_sphere(math.pi / 4, 3)])
    ratios = rep_t.details["ratio"] + rep_s.details["ratio"]
    assert rep_t.passed and rep_s.passed
    assert all(1e-3 <= r <= 1e3 for r in ratios)
    assert max(ratios) / min(ratios) < 50
    single = equivalence_check([torus_slice(T3, 0.5, 32)], t_window=(None, 1.0))
    assert abs(single.c_low * math.pi - 1) < 0.05
    assert single.as_dict()["violations"] == 0


def test_equivalence_errors(ico3):
    with pytest.raises(ValueError):
        equivalence_check([])
    with pytest.raises(ValueError, match="closed"):
        equivalence_check([ico3])
    with pytest.raises(ValueError):
        equivalence_check([torus_slice(T3, 0.5, 8), equator(1)])


def test_li_yau_examples():
    t = li_yau_check(T3, n_samples=1000)
    assert t.c_low > 0.05 and t.passed
    s = li_yau_check(S3, n_samples=1000)
    assert s.c_up < 1e3 and s.passed
    for rep in (t, s):
        assert rep.details["diagonal_min_r_low"] > 0
    assert li_yau_check(T3, n_samples=200, seed=3).as_dict() == li_yau_check(T3, n_samples=200, seed=3).as_dict()
    with pytest.raises(ValueError):
        li_yau_check(E3)


def test_map_ordered_keeps_order():
    items = list(range(37))
    assert map_ordered(lambda k: k * k, items, threads=5) == [k * k for k in items]


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(0.05, 2))
def test_golden_max_finds_parabola_peak(c, w):
    x, v = golden_max(lambda u: -((u - c) ** 2), c - w, c + 2 * w, tol=1e-9)
    assert abs(x - c) < 1e-6 and v <= 0
