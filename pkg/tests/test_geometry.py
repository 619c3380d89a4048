import csv

import numpy as np
import pytest

from helio.geometry import (
    Direction,
    Point3,
    SphereGeometry,
    build_extrap_grid,
    build_interp_grid,
    cart_to_sph,
    directions_to_points,
    export_grid_csv,
    head_radius_for_freq,
    sph_to_cart,
)


def test_sph_to_cart_axis_cases():
    p = sph_to_cart(Direction(0.0, 0.0), 0.09)
    assert p.x == pytest.approx(0.09, abs=1e-15)
    assert p.y == pytest.approx(0.0, abs=1e-15)
    assert p.z == pytest.approx(0.0, abs=1e-15)

    p = sph_to_cart(Direction(90.0, 123.0), 0.2)
    assert abs(p.x) < 1e-15 and abs(p.y) < 1e-15
    assert p.z == pytest.approx(0.2)

    p = sph_to_cart(Direction(0.0, 90.0), 1.0)
    assert p.y == pytest.approx(1.0)
    assert abs(p.x) < 1e-15 and abs(p.z) < 1e-15


def test_sph_to_cart_rejects_bad_radius():
    with pytest.raises(ValueError):
        sph_to_cart(Direction(0.0, 0.0), 0.0)


def test_direction_validation():
    with pytest.raises(ValueError):
        Direction(91.0, 0.0)
    with pytest.raises(ValueError):
        Direction(0.0, 360.0)
    with pytest.raises(ValueError):
        Direction(0.0, -0.5)


def test_point_on_sphere_radius(interp_grid):
    for r in (0.09, 0.2):
        pts = directions_to_points(interp_grid.all_directions, r)
        radii = np.sum(pts**2, axis=1)
        assert np.allclose(radii, r * r, rtol=1e-12)


def test_left_side_matches_azimuth(interp_grid):
    # interp azimuths avoid 0 and 180 exactly, so the sign of y follows phi
    pts = directions_to_points(interp_grid.all_directions, 0.09)
    for d, y in zip(interp_grid.all_directions, pts[:, 1]):
        assert (y > 0) == (0.0 < d.phi_deg < 180.0)


def test_no_grid_direction_has_exact_zero_y():
    for grid in (build_interp_grid(), build_extrap_grid()):
        pts = directions_to_points(grid.all_directions, 0.09)
        assert np.all(pts[:, 1] != 0.0)


def test_azimuth_180_lands_barely_left():
    # sin(pi) rounds to ~1.2e-16 in float, so the extrapolation grid's
    # 180-degree column is routed to the left side, never ambiguous
    p = sph_to_cart(Direction(0.0, 180.0), 1.0)
    assert 0.0 < p.y < 1e-15


def test_round_trip(interp_grid, extrap_grid):
    for grid in (interp_grid, extrap_grid):
        for d in grid.all_directions[::37]:
            p = sph_to_cart(d, 0.09)
            back = cart_to_sph(p)
            assert back.theta_deg == pytest.approx(d.theta_deg, abs=1e-9)
            assert back.phi_deg == pytest.approx(d.phi_deg, abs=1e-9)


def test_interp_grid_counts(interp_grid):
    assert len(interp_grid.known) + len(interp_grid.unknown) == 1260
    assert len(interp_grid.known) == 330
    assert len(interp_grid.unknown) == 930


def test_interp_grid_known_pattern(interp_grid):
    thetas = sorted({d.theta_deg for d in interp_grid.known})
    phis = sorted({d.phi_deg for d in interp_grid.known})
    assert thetas == [-60.0 + 12.0 * i for i in range(11)]
    assert phis == [4.0 + 12.0 * j for j in range(30)]
    full = set(interp_grid.all_directions)
    assert set(interp_grid.known) < full
    assert not set(interp_grid.known) & set(interp_grid.unknown)


def test_extrap_grid_counts(extrap_grid):
    assert len(extrap_grid.known) == 675
    assert len(extrap_grid.unknown) == 270
    assert not set(extrap_grid.known) & set(extrap_grid.unknown)


def test_extrap_grid_elevation_separation(extrap_grid):
    max_known = max(abs(d.theta_deg) for d in extrap_grid.known)
    min_unknown = min(abs(d.theta_deg) for d in extrap_grid.unknown)
    assert max_known == 56.0
    assert min_unknown == 64.0
    assert min_unknown > max_known


def test_head_radius_rule():
    assert head_radius_for_freq(2067.0) == 0.2
    assert head_radius_for_freq(3000.0) == 0.2
    assert head_radius_for_freq(3001.0) == 0.09
    assert head_radius_for_freq(14470.0) == 0.09
    with pytest.raises(ValueError):
        head_radius_for_freq(0.0)


def test_sphere_geometry_validation():
    with pytest.raises(ValueError):
        SphereGeometry(-0.1)


def test_export_grid_csv(tmp_path, extrap_grid):
    path = tmp_path / "grid.csv"
    export_grid_csv(extrap_grid, path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 945
    assert sum(1 for r in rows if r["set"] == "known") == 675
    first = rows[0]
    assert set(first) == {"theta_deg", "phi_deg", "set"}
    parsed = Direction(float(first["theta_deg"]), float(first["phi_deg"]))
    assert parsed == extrap_grid.known[0]


def test_point3_array_round_trip():
    p = Point3(0.1, -0.2, 0.3)
    assert np.array_equal(p.as_array(), [0.1, -0.2, 0.3])
