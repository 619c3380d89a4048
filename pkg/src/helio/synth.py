"""Synthetic band-limited ground-truth fields and dataset normalization.

A synthetic "subject" is a random coefficient vector with per-order
exponential amplitude decay; sampling it on a grid gives an exact finite
expansion, so fits of sufficient order can recover it to rounding error.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .geometry import Direction, GridSplit, SphereGeometry, directions_to_points, head_radius_for_freq
from .harmonics import ShModel, sh_matrix


@dataclass(frozen=True)
class SynthSpec:
    """Generator settings: truncation order, RNG seed, per-order decay rate."""

    order_U: int
    seed: int
    decay: float = 0.15

    def __post_init__(self):
        if self.order_U < 0:
            raise ValueError("order must be nonnegative")
        if self.decay <= 0:
            raise ValueError("decay must be positive")


@dataclass(frozen=True)
class FieldDataset:
    """Complex pressures at directions on one sphere, split known/unknown.

    Parallel arrays: points[i] is the Cartesian image of directions[i] on the
    sphere, pressures[i] the complex value there, known_mask[i] the tag.
    scale is the cumulative factor divided out by normalization (original
    pressures = stored pressures * scale).
    """

    freq_hz: float
    geometry: SphereGeometry
    directions: tuple[Direction, ...]
    points: np.ndarray
    pressures: np.ndarray
    known_mask: np.ndarray
    scale: float = 1.0

    @property
    def known_directions(self) -> tuple[Direction, ...]:
        return tuple(d for d, k in zip(self.directions, self.known_mask) if k)

    @property
    def unknown_directions(self) -> tuple[Direction, ...]:
        return tuple(d for d, k in zip(self.directions, self.known_mask) if not k)

    @property
    def known_pressures(self) -> np.ndarray:
        return self.pressures[self.known_mask]

    @property
    def unknown_pressures(self) -> np.ndarray:
        return self.pressures[~self.known_mask]

    @property
    def known_points(self) -> np.ndarray:
        return self.points[self.known_mask]

    @property
    def unknown_points(self) -> np.ndarray:
        return self.points[~self.known_mask]


def synth_coeffs(spec: SynthSpec) -> ShModel:
    """Random complex coefficients, uniform [-1, 1] real/imag, damped exp(-decay*u).

    Deterministic in the seed: one (n, 2) uniform draw in canonical coefficient
    order, column 0 real and column 1 imaginary.
    """
    n = (spec.order_U + 1) ** 2
    rng = np.random.default_rng(spec.seed)
    draws = rng.uniform(-1.0, 1.0, size=(n, 2))
    coeffs = draws[:, 0] + 1j * draws[:, 1]
    orders = np.concatenate([np.full(2 * u + 1, u) for u in range(spec.order_U + 1)])
    return ShModel(spec.order_U, coeffs * np.exp(-spec.decay * orders))


def synth_field(model: ShModel, grid: GridSplit, freq_hz: float) -> FieldDataset:
    """Sample the expansion on a grid; sphere radius follows the frequency."""
    radius = head_radius_for_freq(freq_hz)
    dirs = grid.all_directions
    pressures = sh_matrix(dirs, model.order_U) @ model.coeffs
    known_mask = np.zeros(len(dirs), dtype=bool)
    known_mask[: len(grid.known)] = True
    return FieldDataset(
        freq_hz=freq_hz,
        geometry=SphereGeometry(radius),
        directions=dirs,
        points=directions_to_points(dirs, radius),
        pressures=pressures,
        known_mask=known_mask,
    )


def normalize(ds: FieldDataset) -> FieldDataset:
    """Divide all pressures by the max magnitude over known and unknown jointly.

    The scale field accumulates multiplicatively, so normalizing twice is a
    no-op. An all-zero field passes through unchanged.
    """
    s = float(np.max(np.abs(ds.pressures))) if len(ds.pressures) else 0.0
    if s == 0.0:
        return ds
    return replace(ds, pressures=ds.pressures / s, scale=ds.scale * s)


def write_dataset_csv(ds: FieldDataset, path) -> None:
    """Dataset CSV: freq_hz,theta_deg,phi_deg,x,y,z,re,im,set (SI units)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["freq_hz", "theta_deg", "phi_deg", "x", "y", "z", "re", "im", "set"])
        for i, d in enumerate(ds.directions):
            writer.writerow(
                [
                    ds.freq_hz,
                    d.theta_deg,
                    d.phi_deg,
                    ds.points[i, 0],
                    ds.points[i, 1],
                    ds.points[i, 2],
                    ds.pressures[i].real,
                    ds.pressures[i].imag,
                    "known" if ds.known_mask[i] else "unknown",
                ]
            )


def read_dataset_csv(path) -> FieldDataset:
    """Inverse of write_dataset_csv; the normalization scale is not stored in
    the file and resets to 1."""
    dirs, points, pressures, known = [], [], [], []
    freq_hz = None
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            freq_hz = float(row["freq_hz"])
            dirs.append(Direction(float(row["theta_deg"]), float(row["phi_deg"])))
            points.append([float(row["x"]), float(row["y"]), float(row["z"])])
            pressures.append(complex(float(row["re"]), float(row["im"])))
            known.append(row["set"] == "known")
    if freq_hz is None:
        raise ValueError(f"empty dataset file: {path}")
    return FieldDataset(
        freq_hz=freq_hz,
        geometry=SphereGeometry(head_radius_for_freq(freq_hz)),
        directions=tuple(dirs),
        points=np.array(points),
        pressures=np.array(pressures),
        known_mask=np.array(known),
    )
