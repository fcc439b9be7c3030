import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from mcflab.ambient import (
    Ambient,
    Isometry,
    ambient_metadata,
    apply_isometry,
    ball_volume,
    ball_volume_estimate,
    geodesic_distance,
    parse_ambient,
    random_points,
    random_rotation,
    wrap,
)

E3 = Ambient.euclidean(3)
T3 = Ambient.torus((1.0, 1.0, 1.0))
S3 = Ambient.sphere3()
ALL = [E3, T3, S3, Ambient.torus((1.0, 2.0, 0.5))]


def test_distance_examples():
    assert geodesic_distance(E3, [0, 0, 0], [3, 4, 0]) == 5.0
    assert geodesic_distance(T3, [0.1, 0, 0], [0.9, 0, 0]) == pytest.approx(0.2, abs=1e-15)
    assert geodesic_distance(S3, [1, 0, 0, 0], [0, 1, 0, 0]) == pytest.approx(math.pi / 2, abs=1e-15)


def test_distance_dimension_mismatch():
    with pytest.raises(ValueError):
        geodesic_distance(E3, [0, 0], [0, 0, 0])
    with pytest.raises(ValueError):
        geodesic_distance(S3, [1, 0, 0], [1, 0, 0])


def test_sphere_distance_stable_near_poles():
    x = np.array([1.0, 0, 0, 0])
    y = np.array([math.cos(1e-9), math.sin(1e-9), 0, 0])
    assert geodesic_distance(S3, x, y) == pytest.approx(1e-9, rel=1e-6)
    assert geodesic_distance(S3, x, -x) == pytest.approx(math.pi, abs=1e-15)


def test_ball_volume_examples():
    assert ball_volume(S3, [1, 0, 0, 0], math.pi) == pytest.approx(2 * math.pi**2, rel=1e-15)
    assert ball_volume(T3, [0, 0, 0], 0.25) == pytest.approx(4 / 3 * math.pi * 0.25**3, rel=1e-15)
    assert ball_volume(E3, [0, 0, 0], 1.0) == pytest.approx(4 * math.pi / 3, rel=1e-15)
    with pytest.raises(ValueError):
        ball_volume(E3, [0, 0, 0], 0.0)


@pytest.mark.parametrize("r, expected", oracles.TORUS_BALL)
def test_torus_ball_volume_beyond_injectivity_radius(r, expected):
    vol, err = ball_volume_estimate(T3, [0.3, 0.1, 0.9], r)
    assert abs(vol / expected - 1) < 1e-4
    assert err <= 1e-4 * vol


def test_torus_ball_volume_high_dimension_estimate():
    T4 = Ambient.torus((1.0,) * 4)
    vol, err = ball_volume_estimate(T4, np.zeros(4), 0.6)
    assert 0 < err < 1e-2
    # the 4-ball of radius 0.6 minus the parts outside the cube [-1/2, 1/2]^4
    assert math.pi**2 / 2 * 0.6**4 > vol > 0.5


@pytest.mark.parametrize("amb", [T3, S3])
def test_ball_volume_saturates(amb):
    meta = ambient_metadata(amb)
    x = random_points(amb, 1, np.random.default_rng(0))[0]
    assert ball_volume(amb, x, meta.diameter * (1 + 1e-9)) == pytest.approx(meta.volume, rel=1e-12)


@pytest.mark.parametrize("amb", [E3, T3, S3])
def test_bishop_gromov(amb):
    x = random_points(amb, 1, np.random.default_rng(1))[0]
    rs = np.geomspace(0.01, 3.0, 60)
    ratio = np.array([ball_volume(amb, x, r) / r**3 for r in rs])
    assert np.all(np.diff(ratio) <= 1e-3 * ratio[:-1])


def test_metadata_examples():
    m = ambient_metadata(T3)
    assert m.volume == 1.0 and m.diameter == pytest.approx(math.sqrt(3) / 2, rel=1e-15)
    s = ambient_metadata(S3)
    assert s.diameter == math.pi and s.volume == pytest.approx(2 * math.pi**2)
    assert s.injectivity_radius == math.pi
    assert ambient_metadata(E3).ricci_nonnegative
    assert all(ambient_metadata(a).sectional_nonnegative_and_ricci_parallel for a in (E3, T3, S3))


def test_isometry_examples():
    np.testing.assert_allclose(apply_isometry(Isometry.translate(T3, [0.5, 0, 0]), [0.7, 0, 0]), [0.2, 0, 0], atol=1e-15)
    x = np.array([0.5, 0.5, 0.5, 0.5])
    np.testing.assert_array_equal(apply_isometry(Isometry.rotate(S3, np.eye(4)), x), x)
    Rz = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    np.testing.assert_allclose(apply_isometry(Isometry.rotate(E3, Rz), [1, 0, 0]), [0, 1, 0], atol=1e-15)


def test_isometry_kind_mismatch():
    with pytest.raises(ValueError):
        Isometry.rotate(T3, np.eye(3))
    with pytest.raises(ValueError):
        Isometry.translate(S3, [0, 0, 0, 1])
    with pytest.raises(ValueError):
        apply_isometry(Isometry.translate(T3, [0.1, 0, 0]), [0, 0, 0], ambient=E3)
    with pytest.raises(ValueError):
        Isometry.rotate(S3, np.ones((4, 4)))


@pytest.mark.parametrize("amb", [E3, T3, S3])
def test_isometry_preserves_distances(amb):
    rng = np.random.default_rng(2)
    if amb.kind == "torus":
        iso = Isometry.translate(amb, rng.uniform(-3, 3, 3))
    else:
        iso = Isometry.rotate(amb, random_rotation(amb.chart_dim, rng))
    x = random_points(amb, 1000, rng)
    y = random_points(amb, 1000, rng)
    d0 = geodesic_distance(amb, x, y)
    d1 = geodesic_distance(amb, iso(x), iso(y))
    assert np.max(np.abs(d0 - d1)) < 1e-12


@pytest.mark.parametrize("amb", ALL)
def test_triangle_inequality_bulk(amb):
    rng = np.random.default_rng(3)
    x, y, z = (random_points(amb, 10_000, rng) for _ in range(3))
    dxy = geodesic_distance(amb, x, y)
    slack = geodesic_distance(amb, x, z) + geodesic_distance(amb, z, y) - dxy
    assert slack.min() > -1e-12
    np.testing.assert_array_equal(dxy, geodesic_distance(amb, y, x))


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(ALL), st.integers(0, 2**32 - 1))
def test_distance_properties(amb, seed):
    rng = np.random.default_rng(seed)
    x, y, z = random_points(amb, 3, rng)
    assert geodesic_distance(amb, x, y) == geodesic_distance(amb, y, x)
    assert geodesic_distance(amb, x, x) == 0.0
    assert geodesic_distance(amb, x, y) <= geodesic_distance(amb, x, z) + geodesic_distance(amb, z, y) + 1e-12


@given(st.lists(st.floats(-50, 50, allow_nan=False), min_size=3, max_size=3))
def test_wrap_lands_in_fundamental_domain(coords):
    y = wrap(T3, np.array(coords))
    assert np.all((0 <= y) & (y < 1))
    assert geodesic_distance(T3, y, np.array(coords)) < 1e-12


def test_wrap_tiny_negative():
    assert wrap(T3, np.array([-1e-18, 0, 0]))[0] == 0.0


@pytest.mark.parametrize("text", ["euclidean3", "torus:1.0,2.0,0.5", "sphere3", "euclidean4"])
def test_parse_ambient_round_trip(text):
    assert parse_ambient(text).spec() == text


@pytest.mark.parametrize("bad", ["hyperbolic3", "torus:1,x", "euclideanX", "torus:0,1,1"])
def test_parse_ambient_errors(bad):
    with pytest.raises(ValueError):
        parse_ambient(bad)


def test_point_validation():
    with pytest.raises(ValueError):
        S3.point([1.0, 1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        E3.point([np.nan, 0, 0])
    np.testing.assert_allclose(T3.point([1.25, -0.5, 0.0]), [0.25, 0.5, 0.0])
