"""Quadrant-split network training with the unit-balanced Helmholtz residual.

One complex field on one sphere is modeled by four independent real
networks: real/imaginary part times left (y > 0) / right (y < 0) hemisphere.
Each network minimizes

    mean squared data misfit  +  mean squared residual of
    laplacian / (omega/c)^2 + output                          (if enabled)

over its hemisphere's collocation points. Dividing the Laplacian by
(omega/c)^2 gives the residual the same physical unit as the data term, so
the two losses are summed with no balancing weight; that weight's absence is
deliberate and there is no way to configure one.

Points with y = 0 exactly would be ambiguous; they are assigned to the left
side. (The sampling grids never produce one: even azimuth 180 deg maps to a
tiny positive y in floating point.)
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .geometry import SPEED_OF_SOUND, SphereGeometry, directions_to_points
from .network import (
    AdamState,
    LaplaceWorkspace,
    MlpParams,
    MlpSpec,
    _activation_trace,
    _adam_step_inplace,
    _backward_from_output,
    _zero_grads,
    adam_init,
    forward_batch,
    load_checkpoint,
    save_checkpoint,
    second_order_backward,
    second_order_forward,
    xavier_init,
)
from .synth import FieldDataset

PART_NAMES = ("re_left", "re_right", "im_left", "im_right")


class TrainingDivergedError(RuntimeError):
    """Non-finite loss during training; carries the epoch and loss values."""

    def __init__(self, epoch: int, data_loss: float, pde_loss: float):
        super().__init__(
            f"non-finite loss at epoch {epoch}: data={data_loss}, pde={pde_loss}"
        )
        self.epoch = epoch
        self.data_loss = data_loss
        self.pde_loss = pde_loss


@dataclass(frozen=True)
class PhysicsParams:
    """Frequency and sound speed; omega is derived, never stored."""

    freq_hz: float
    c: float = SPEED_OF_SOUND

    def __post_init__(self):
        if self.freq_hz <= 0 or self.c <= 0:
            raise ValueError("frequency and sound speed must be positive")

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.freq_hz

    @property
    def k_squared(self) -> float:
        """(omega / c)^2, the Helmholtz wavenumber squared."""
        return (self.omega / self.c) ** 2


@dataclass(frozen=True)
class TrainConfig:
    spec: MlpSpec
    epochs: int
    lr: float = 0.001
    pde_loss_enabled: bool = True
    seed: int = 0
    log_every: int = 1000

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")


@dataclass(frozen=True)
class PartData:
    """One real-valued scalar sub-dataset on one hemisphere."""

    name: str
    points: np.ndarray
    targets: np.ndarray
    known_mask: np.ndarray

    @staticmethod
    def from_arrays(points, targets, name: str = "adhoc") -> "PartData":
        points = np.asarray(points, dtype=float)
        targets = np.asarray(targets, dtype=float)
        return PartData(name, points, targets, np.ones(len(targets), dtype=bool))

    @property
    def training_points(self) -> np.ndarray:
        return self.points[self.known_mask]

    @property
    def training_targets(self) -> np.ndarray:
        return self.targets[self.known_mask]


@dataclass(frozen=True)
class CollocationSet:
    """Coordinates where the PDE residual is enforced (training superset)."""

    points: np.ndarray

    def __post_init__(self):
        if len(self.points) == 0:
            raise ValueError("collocation set must be nonempty")


@dataclass
class TrainResult:
    params: MlpParams
    history: list  # rows (epoch, data_loss, pde_loss, total_loss)


@dataclass
class QuadrantModel:
    """Four trained networks combined into one complex-valued predictor."""

    re_left: MlpParams
    re_right: MlpParams
    im_left: MlpParams
    im_right: MlpParams
    phys: PhysicsParams
    geometry: SphereGeometry
    scale: float = 1.0

    def part(self, name: str) -> MlpParams:
        return getattr(self, name)


def pinn_width_for_freq(freq_hz: float) -> int:
    """Hidden-layer width: half the harmonic dimensionality of the field.

    ceil(f/500) below 3 kHz, 6 in the mid band, ceil(f/1000) above it
    (same band edges as the order rule).
    """
    if freq_hz <= 0:
        raise ValueError("frequency must be positive")
    if freq_hz < 3000.0:
        return math.ceil(freq_hz / 500.0)
    if freq_hz < 6500.0:
        return 6
    return math.ceil(freq_hz / 1000.0)


def _is_left(points: np.ndarray) -> np.ndarray:
    return points[:, 1] >= 0.0


def split_parts(ds: FieldDataset) -> dict[str, PartData]:
    """Split a dataset into the four real scalar sub-datasets.

    Keys: re_left, re_right, im_left, im_right. Left/right mirror each
    other's points; re/im of one side share points and differ in targets.
    The union of the four parts reconstructs the dataset exactly.
    """
    left = _is_left(ds.points)
    parts = {}
    for side, mask in (("left", left), ("right", ~left)):
        pts = ds.points[mask]
        known = ds.known_mask[mask]
        parts[f"re_{side}"] = PartData(f"re_{side}", pts, ds.pressures[mask].real.copy(), known)
        parts[f"im_{side}"] = PartData(f"im_{side}", pts, ds.pressures[mask].imag.copy(), known)
    return parts


def data_loss(params: MlpParams, points, targets) -> float:
    """Mean squared misfit between network output and targets."""
    points = np.asarray(points, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if len(targets) == 0:
        raise ValueError("batch must be nonempty")
    return float(np.mean((targets - forward_batch(params, points)) ** 2))


def helmholtz_residual(values: np.ndarray, laplacians: np.ndarray, phys: PhysicsParams) -> np.ndarray:
    """laplacian / (omega/c)^2 + value, zero for an exact solution."""
    return np.asarray(laplacians) / phys.k_squared + np.asarray(values)


def pde_loss(params: MlpParams, colloc: CollocationSet, phys: PhysicsParams) -> float:
    """Mean squared Helmholtz residual of the network over the collocation set."""
    ws = second_order_forward(params, colloc.points)
    return float(np.mean(helmholtz_residual(ws.y, ws.lap, phys) ** 2))


def _colloc_indices(colloc: CollocationSet, train_points: np.ndarray) -> np.ndarray:
    """Index of each training point inside the collocation set, or raise."""
    lookup = {}
    for i, row in enumerate(np.round(colloc.points, 12)):
        lookup.setdefault(tuple(row), i)
    idx = np.empty(len(train_points), dtype=int)
    for j, row in enumerate(np.round(train_points, 12)):
        key = tuple(row)
        if key not in lookup:
            raise ValueError(
                f"collocation set is missing training coordinate {tuple(train_points[j])}"
            )
        idx[j] = lookup[key]
    return idx


def train(part: PartData, colloc: CollocationSet | None, phys: PhysicsParams, cfg: TrainConfig) -> TrainResult:
    """Full-batch Adam on the combined loss of one part network.

    With the PDE term enabled the collocation set must contain every
    training coordinate; with it disabled the collocation set is ignored.
    Deterministic in cfg.seed. Raises TrainingDivergedError on non-finite
    loss.
    """
    X_train = np.asarray(part.training_points, dtype=float)
    t_train = np.asarray(part.training_targets, dtype=float)
    Q = len(t_train)
    if Q == 0:
        raise ValueError("training data must be nonempty")

    params = xavier_init(cfg.spec, cfg.seed)
    state = adam_init(params, lr=cfg.lr)
    grads = _zero_grads(params)
    history: list[tuple[int, float, float, float]] = []

    if cfg.pde_loss_enabled:
        if colloc is None:
            raise ValueError("PDE loss requires a collocation set")
        X_col = np.asarray(colloc.points, dtype=float)
        D = len(X_col)
        idx_q = _colloc_indices(colloc, X_train)
        k2 = phys.k_squared
        ws = LaplaceWorkspace(cfg.spec, D)
        for epoch in range(1, cfg.epochs + 1):
            second_order_forward(params, X_col, ws)
            r = ws.lap / k2 + ws.y
            e = ws.y[idx_q] - t_train
            d_loss = float(np.mean(e * e))
            p_loss = float(np.mean(r * r))
            if not (math.isfinite(d_loss) and math.isfinite(p_loss)):
                raise TrainingDivergedError(epoch, d_loss, p_loss)
            ybar = 2.0 * r / D
            lapbar = 2.0 * r / (D * k2)
            np.add.at(ybar, idx_q, 2.0 * e / Q)
            second_order_backward(params, ws, ybar, lapbar, grads)
            _adam_step_inplace(state, params, grads)
            if epoch % cfg.log_every == 0 or epoch == cfg.epochs or epoch == 1:
                history.append((epoch, d_loss, p_loss, d_loss + p_loss))
    else:
        for epoch in range(1, cfg.epochs + 1):
            acts = _activation_trace(params, X_train)
            y = acts[-1] @ params.weights[-1][0] + params.biases[-1][0]
            e = y - t_train
            d_loss = float(np.mean(e * e))
            if not math.isfinite(d_loss):
                raise TrainingDivergedError(epoch, d_loss, 0.0)
            gy = 2.0 * e / Q
            g = _backward_from_output(params, acts, gy)
            _adam_step_inplace(state, params, g)
            if epoch % cfg.log_every == 0 or epoch == cfg.epochs or epoch == 1:
                history.append((epoch, d_loss, 0.0, d_loss))
    return TrainResult(params, history)


def assemble(
    parts: dict[str, MlpParams],
    phys: PhysicsParams,
    geometry: SphereGeometry,
    scale: float = 1.0,
) -> QuadrantModel:
    """Bundle the four part networks into one complex predictor."""
    specs = {name: parts[name].spec for name in PART_NAMES}
    if len({(s.depth_L, s.width_W) for s in specs.values()}) != 1:
        raise ValueError("the four part networks must share one shape")
    return QuadrantModel(
        re_left=parts["re_left"],
        re_right=parts["re_right"],
        im_left=parts["im_left"],
        im_right=parts["im_right"],
        phys=phys,
        geometry=geometry,
        scale=scale,
    )


def predict(model: QuadrantModel, dirs) -> np.ndarray:
    """Complex estimates at directions, routed left/right by the sign of y."""
    points = directions_to_points(dirs, model.geometry.radius_m)
    left = _is_left(points)
    out = np.empty(len(points), dtype=complex)
    for mask, re_net, im_net in (
        (left, model.re_left, model.im_left),
        (~left, model.re_right, model.im_right),
    ):
        if mask.any():
            out[mask] = forward_batch(re_net, points[mask]) + 1j * forward_batch(
                im_net, points[mask]
            )
    return out


def save_quadrant_checkpoint(model: QuadrantModel, path) -> None:
    """Bundle the four part checkpoints with the shared physics metadata."""
    payload = {
        "freq_hz": model.phys.freq_hz,
        "c": model.phys.c,
        "radius_m": model.geometry.radius_m,
        "scale": model.scale,
        "parts": {},
    }
    for name in PART_NAMES:
        p = model.part(name)
        payload["parts"][name] = {
            "spec": {"L": p.spec.depth_L, "W": p.spec.width_W},
            "layers": [
                {"weights": w.tolist(), "biases": b.tolist()}
                for w, b in zip(p.weights, p.biases)
            ],
        }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_quadrant_checkpoint(path) -> QuadrantModel:
    with open(path) as fh:
        payload = json.load(fh)
    parts = {}
    for name in PART_NAMES:
        entry = payload["parts"][name]
        spec = MlpSpec(int(entry["spec"]["L"]), int(entry["spec"]["W"]))
        weights = [np.array(l["weights"], dtype=float) for l in entry["layers"]]
        biases = [np.array(l["biases"], dtype=float) for l in entry["layers"]]
        parts[name] = MlpParams(spec, weights, biases)
    return assemble(
        parts,
        PhysicsParams(float(payload["freq_hz"]), float(payload["c"])),
        SphereGeometry(float(payload["radius_m"])),
        float(payload["scale"]),
    )
