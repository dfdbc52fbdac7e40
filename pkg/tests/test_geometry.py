import math

import numpy as np
import pytest

from cahnlayer.errors import ConfigurationError, DomainError
from cahnlayer.geometry import (OUTSIDE, BoundaryGeometry, circle, curvature, ellipse, geometry_from_config,
                                invert_tubular, jacobian_det_fd, read_curve_csv, signed_distance, star,
                                tube_area, tube_area_sampled, tubular_map, tubular_weight)


@pytest.fixture(scope="module")
def ell():
    return BoundaryGeometry(ellipse(2.0, 1.0))


def test_circle_basics(disk):
    assert disk.length == pytest.approx(2 * math.pi, rel=1e-12)
    assert np.allclose(disk.kappa, -1.0, atol=1e-10)
    assert disk.delta_max == pytest.approx(0.5)


def test_clockwise_input_is_reoriented():
    cw = BoundaryGeometry(circle().reversed())
    assert np.allclose(cw.kappa, -1.0, atol=1e-10)


def test_ellipse_curvature_closed_form(ell):
    y = np.linspace(0, ell.length, 37, endpoint=False)
    th = ell.theta_of(y)
    exact = -2.0 / (4 * np.sin(th) ** 2 + np.cos(th) ** 2) ** 1.5
    assert np.allclose(curvature(ell, y), exact, rtol=1e-8)
    assert ell.delta_max == pytest.approx(0.25, rel=1e-6)


@pytest.mark.parametrize("make", [lambda: circle(), lambda: ellipse(2.0, 1.0), lambda: star(0.1, 3)])
def test_jacobian_determinant_matches_weight(make):
    geom = BoundaryGeometry(make())
    y = np.linspace(0, geom.length, 23, endpoint=False)
    for t in (0.0, 0.3 * geom.delta_max, geom.delta_max):
        fd = jacobian_det_fd(geom, y, t)
        assert np.max(np.abs(fd - tubular_weight(geom, y, t))) < 1e-6
    # det J is affine in t, so a long difference quotient gives its slope, the curvature
    h = 0.5 * geom.delta_max
    ddet = (jacobian_det_fd(geom, y, h) - jacobian_det_fd(geom, y, 0.0)) / h
    assert np.max(np.abs(ddet - curvature(geom, y))) < 1e-6


def test_weight_rejects_far_points(disk):
    with pytest.raises(DomainError):
        tubular_weight(disk, 0.0, 0.6)
    with pytest.raises(DomainError):
        tubular_weight(disk, 0.0, -0.1)


def test_star_has_concave_arcs():
    geom = BoundaryGeometry(star(0.3, 3))
    assert np.max(geom.kappa) > 0 > np.min(geom.kappa)


@pytest.mark.parametrize("make", [lambda: circle(), lambda: ellipse(2.0, 1.0), lambda: star(0.1, 5)])
def test_invert_tubular_round_trip(make):
    geom = BoundaryGeometry(make())
    rng = np.random.default_rng(0)
    y = rng.uniform(0, geom.length, 200)
    t = rng.uniform(0, geom.delta_max, 200)
    back = invert_tubular(geom, tubular_map(geom, y, t))
    assert back.inside.all()
    dy = np.abs(back.y - y)
    assert np.max(np.minimum(dy, geom.length - dy)) < 1e-9
    assert np.max(np.abs(back.t - t)) < 1e-9


def test_points_beyond_tube_are_flagged(disk):
    tc = invert_tubular(disk, [[0.0, 0.0], [2.0, 0.0], [0.7, 0.0]])
    assert tc.inside.tolist() == [False, False, True]
    assert np.isnan(OUTSIDE) and np.isnan(tc.y[0])
    assert tc.t[2] == pytest.approx(0.3)


def test_signed_distance_on_disk(disk):
    x = np.array([[0.0, 0.0], [0.5, 0.5], [1.5, 0.0]])
    assert np.allclose(signed_distance(disk, x), 1 - np.hypot(x[:, 0], x[:, 1]), atol=1e-6)


@pytest.mark.parametrize("delta", [0.1, 0.5])
def test_tube_area(disk, delta):
    exact = math.pi * (1 - (1 - delta) ** 2)
    assert tube_area(disk, delta) == pytest.approx(exact, rel=1e-10)
    assert tube_area_sampled(disk, delta, m=16) == pytest.approx(exact, rel=5e-3)


def test_csv_curve(tmp_path):
    th = np.linspace(0, 2 * math.pi, 400, endpoint=False)
    path = tmp_path / "c.csv"
    rows = "\n".join(f"{math.cos(a)!r},{math.sin(a)!r}" for a in th)
    path.write_text("x,y\n" + rows + "\n")
    geom = BoundaryGeometry(read_curve_csv(path))
    assert geom.length == pytest.approx(2 * math.pi, rel=1e-6)
    assert np.allclose(geom.kappa, -1.0, atol=1e-4)
    same = geometry_from_config({"name": "csv", "path": "c.csv"}, base_dir=tmp_path)
    assert same.length == geom.length


def test_csv_rejects_short_or_bad_files(tmp_path):
    p = tmp_path / "short.csv"
    p.write_text("0,0\n1,0\n0,1\n")
    with pytest.raises(ConfigurationError):
        read_curve_csv(p)
    p.write_text("0,0\n1,0\nx,1\n0,1\n")
    with pytest.raises(ConfigurationError):
        read_curve_csv(p)


def test_unknown_curve():
    with pytest.raises(ConfigurationError):
        geometry_from_config({"name": "hexagon"})
