"""Directions, coordinate conversions, and the measurement grids.

Conventions: theta is elevation in degrees (theta=0 is the horizontal xy
plane, positive towards +z), phi is azimuth in degrees in [0, 360) measured
from the +x axis towards +y. The listener faces +x, so y > 0 is the left
side. Angles are stored exactly in degrees; radians are computed on demand.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

SPEED_OF_SOUND = 343.0  # m/s


@dataclass(frozen=True)
class Direction:
    """A direction on the evaluation sphere: elevation and azimuth in degrees."""

    theta_deg: float
    phi_deg: float

    def __post_init__(self):
        if not -90.0 <= self.theta_deg <= 90.0:
            raise ValueError(f"elevation {self.theta_deg} outside [-90, 90]")
        if not 0.0 <= self.phi_deg < 360.0:
            raise ValueError(f"azimuth {self.phi_deg} outside [0, 360)")


@dataclass(frozen=True)
class Point3:
    """Cartesian point in meters."""

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class SphereGeometry:
    """Radius of the evaluation sphere in meters (frequency dependent)."""

    radius_m: float

    def __post_init__(self):
        if self.radius_m <= 0:
            raise ValueError("sphere radius must be positive")


@dataclass(frozen=True)
class GridSplit:
    """Disjoint known/unknown direction sets of one sampling layout."""

    known: tuple[Direction, ...]
    unknown: tuple[Direction, ...]

    @property
    def all_directions(self) -> tuple[Direction, ...]:
        return self.known + self.unknown


def head_radius_for_freq(freq_hz: float) -> float:
    """Effective head radius in meters: 0.2 m at or below 3 kHz, 0.09 m above."""
    if freq_hz <= 0:
        raise ValueError("frequency must be positive")
    return 0.2 if freq_hz <= 3000.0 else 0.09


def sph_to_cart(direction: Direction, radius_m: float) -> Point3:
    """Convert an elevation/azimuth direction to Cartesian coordinates.

    x = r cos(theta) cos(phi), y = r cos(theta) sin(phi), z = r sin(theta).
    """
    if radius_m <= 0:
        raise ValueError("radius must be positive")
    theta = np.radians(direction.theta_deg)
    phi = np.radians(direction.phi_deg)
    ct = np.cos(theta)
    return Point3(
        float(radius_m * ct * np.cos(phi)),
        float(radius_m * ct * np.sin(phi)),
        float(radius_m * np.sin(theta)),
    )


def cart_to_sph(point: Point3) -> Direction:
    """Recover the direction of a Cartesian point (radius discarded)."""
    r = np.sqrt(point.x**2 + point.y**2 + point.z**2)
    if r == 0:
        raise ValueError("zero-length point has no direction")
    theta = np.degrees(np.arcsin(np.clip(point.z / r, -1.0, 1.0)))
    phi = np.degrees(np.arctan2(point.y, point.x)) % 360.0
    return Direction(float(theta), float(phi))


def directions_to_points(dirs, radius_m: float) -> np.ndarray:
    """Stack sph_to_cart over a sequence of directions into an (N, 3) array."""
    theta = np.radians([d.theta_deg for d in dirs])
    phi = np.radians([d.phi_deg for d in dirs])
    ct = np.cos(theta)
    return radius_m * np.column_stack((ct * np.cos(phi), ct * np.sin(phi), np.sin(theta)))


def build_interp_grid() -> GridSplit:
    """Interpolation layout: 1260 directions, 330 known on a 2x-coarser sub-grid.

    Full grid: elevations -60..60 step 6 (21), azimuths 4..358 step 6 (60).
    Known: every other elevation x every other azimuth (11 x 30 = 330);
    the remaining 930 directions are the unknown set.
    """
    thetas = [-60.0 + 6.0 * i for i in range(21)]
    phis = [4.0 + 6.0 * j for j in range(60)]
    known_thetas = set(thetas[::2])
    known_phis = set(phis[::2])
    known, unknown = [], []
    for t in thetas:
        for p in phis:
            d = Direction(t, p)
            if t in known_thetas and p in known_phis:
                known.append(d)
            else:
                unknown.append(d)
    return GridSplit(tuple(known), tuple(unknown))


def build_extrap_grid() -> GridSplit:
    """Extrapolation layout: 675 known mid-elevation, 270 unknown at high |elevation|.

    Known: elevations -56..56 step 8 (15) x azimuths 4..356 step 8 (45).
    Unknown: elevations {-80, -72, -64, 64, 72, 80} x the same azimuths.
    """
    phis = [4.0 + 8.0 * j for j in range(45)]
    known = [Direction(-56.0 + 8.0 * i, p) for i in range(15) for p in phis]
    unknown = [Direction(t, p) for t in (-80.0, -72.0, -64.0, 64.0, 72.0, 80.0) for p in phis]
    return GridSplit(tuple(known), tuple(unknown))


def export_grid_csv(grid: GridSplit, path) -> None:
    """Write a grid as CSV with columns theta_deg,phi_deg,set."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta_deg", "phi_deg", "set"])
        for d in grid.known:
            writer.writerow([d.theta_deg, d.phi_deg, "known"])
        for d in grid.unknown:
            writer.writerow([d.theta_deg, d.phi_deg, "unknown"])
