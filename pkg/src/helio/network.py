"""Fully connected tanh network with exact input Laplacian and Adam training.

Everything is plain numpy on float64. The network maps a 3-D Cartesian point
to one real scalar through L tanh hidden layers and a linear output layer.

Besides the usual forward/backprop pair, the module propagates first and
per-axis second input derivatives analytically through every layer, which
gives the exact Laplacian of the network output (no finite differences), and
runs reverse-mode through that propagation to get the Laplacian's gradient
with respect to the weights and biases.

Derivative propagation through one tanh layer with pre-activation
z = W a + b, writing t = tanh(z), u = 1 - t^2:

    a'  = u * z'
    a'' = u * z'' - 2 t u * (z')^2          (per input axis)

Each layer carries the triple (A, J, Lam): activations (N, n), input
Jacobian (N, 3, n), and the summed second derivatives (N, n). Because the
per-axis recurrence is affine in the second-derivative channel with the
same coefficient u for every axis, the three axes can be summed once and
propagated as the single Laplacian channel

    Lam_new = u * (W Lam) - 2 t u * sum_k (z'_k)^2 .

J and Lam are stored stacked as one (N, 4, n) block so each layer costs one
GEMM. All buffers live in a LaplaceWorkspace that the training loop reuses
across epochs; the public single-point helpers allocate a fresh one per call.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Point3


@dataclass(frozen=True)
class MlpSpec:
    """Shape of the network: L tanh hidden layers of width W, 3 -> 1."""

    depth_L: int
    width_W: int
    input_dim: int = 3
    output_dim: int = 1
    activation: str = "tanh"

    def __post_init__(self):
        if self.depth_L < 1 or self.width_W < 1:
            raise ValueError("depth and width must be at least 1")
        if self.activation != "tanh":
            raise ValueError("only tanh hidden layers are supported")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) for every layer including the linear output."""
        dims = [self.input_dim] + [self.width_W] * self.depth_L + [self.output_dim]
        return list(zip(dims[:-1], dims[1:]))


@dataclass
class MlpParams:
    """Weight matrices (fan_out, fan_in) and bias vectors, output layer last.

    Also the container for gradients, which are shaped identically.
    """

    spec: MlpSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "MlpParams":
        return MlpParams(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass
class AdamState:
    """Step count, first/second moment accumulators, and hyperparameters."""

    t: int
    m_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_weights: list[np.ndarray]
    v_biases: list[np.ndarray]
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def count_params(spec: MlpSpec) -> int:
    """Trainable parameter count 4W + (L-1)(W^2 + W) + (W + 1)."""
    if spec.input_dim != 3 or spec.output_dim != 1:
        raise ValueError("count applies to 3 -> 1 networks")
    L, W = spec.depth_L, spec.width_W
    return 4 * W + (L - 1) * (W * W + W) + W + 1


def xavier_init(spec: MlpSpec, seed: int) -> MlpParams:
    """Uniform Xavier weights in +-sqrt(6 / (fan_in + fan_out)), zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in spec.layer_dims:
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(spec, weights, biases)


def _as_batch(p) -> np.ndarray:
    if isinstance(p, Point3):
        return p.as_array()[None, :]
    arr = np.asarray(p, dtype=float)
    return arr[None, :] if arr.ndim == 1 else arr


def forward_batch(params: MlpParams, X: np.ndarray) -> np.ndarray:
    """Network output at each row of X, shape (N,)."""
    a = np.asarray(X, dtype=float)
    for W, b in zip(params.weights[:-1], params.biases[:-1]):
        a = np.tanh(a @ W.T + b)
    return a @ params.weights[-1][0] + params.biases[-1][0]


def forward(params: MlpParams, p) -> float:
    """Scalar network output at one point (Point3 or length-3 array)."""
    return float(forward_batch(params, _as_batch(p))[0])


def _activation_trace(params: MlpParams, X: np.ndarray) -> list[np.ndarray]:
    """Activations [X, A_1, ..., A_L] cached for the plain reverse pass."""
    acts = [np.asarray(X, dtype=float)]
    for W, b in zip(params.weights[:-1], params.biases[:-1]):
        acts.append(np.tanh(acts[-1] @ W.T + b))
    return acts


def _zero_grads(params: MlpParams) -> MlpParams:
    return MlpParams(
        params.spec,
        [np.zeros_like(w) for w in params.weights],
        [np.zeros_like(b) for b in params.biases],
    )


def _backward_from_output(params: MlpParams, acts: list[np.ndarray], gy: np.ndarray) -> MlpParams:
    """Accumulate d(objective)/d(params) given d(objective)/d(output) per point."""
    grads = _zero_grads(params)
    w_o = params.weights[-1][0]
    grads.weights[-1][0] = gy @ acts[-1]
    grads.biases[-1][0] = gy.sum()
    ga = gy[:, None] * w_o[None, :]
    for l in range(params.spec.depth_L - 1, -1, -1):
        gz = ga * (1.0 - acts[l + 1] ** 2)
        grads.weights[l] = gz.T @ acts[l]
        grads.biases[l] = gz.sum(axis=0)
        if l > 0:
            ga = gz @ params.weights[l]
    return grads


def backprop(params: MlpParams, points, targets) -> MlpParams:
    """Exact gradient of the mean squared error over the batch."""
    X = np.asarray(points, dtype=float)
    t = np.asarray(targets, dtype=float)
    if len(X) == 0:
        raise ValueError("batch must be nonempty")
    acts = _activation_trace(params, X)
    y = acts[-1] @ params.weights[-1][0] + params.biases[-1][0]
    gy = 2.0 * (y - t) / len(t)
    return _backward_from_output(params, acts, gy)


class LaplaceWorkspace:
    """Preallocated buffers for the derivative-propagating forward/backward.

    Holds per-layer caches (written by second_order_forward, read by
    second_order_backward) plus backward scratch. Channel layout of JL and
    JLz: [dx, dy, dz, laplacian].
    """

    __slots__ = ("n_points", "X", "T", "U", "JL", "JLz", "q", "y", "lap",
                 "_gA", "_gB", "_g4a", "_g4b", "_s1", "_s2")

    def __init__(self, spec: MlpSpec, n_points: int):
        L, W = spec.depth_L, spec.width_W
        N = n_points
        self.n_points = N
        self.X = None
        self.T = [np.empty((N, W)) for _ in range(L)]
        self.U = [np.empty((N, W)) for _ in range(L)]
        self.JL = [np.empty((N, 4, W)) for _ in range(L)]
        self.JLz = [np.empty((N, 4, W)) for _ in range(L)]
        self.q = [np.empty((N, W)) for _ in range(L)]
        self.y = np.empty(N)
        self.lap = np.empty(N)
        self._gA = np.empty((N, W))
        self._gB = np.empty((N, W))
        self._g4a = np.empty((N, 4, W))
        self._g4b = np.empty((N, 4, W))
        self._s1 = np.empty((N, W))
        self._s2 = np.empty((N, W))

    def input_grad(self, params: MlpParams) -> np.ndarray:
        """d(output)/d(x, y, z) per point, from the last forward pass."""
        return self.JL[-1][:, :3, :] @ params.weights[-1][0]


def second_order_forward(params: MlpParams, X: np.ndarray, ws: LaplaceWorkspace | None = None) -> LaplaceWorkspace:
    """Forward pass carrying values, input Jacobians, and the Laplacian
    channel; fills and returns ws (y and lap hold the outputs)."""
    X = np.asarray(X, dtype=float)
    N = X.shape[0]
    if ws is None:
        ws = LaplaceWorkspace(params.spec, N)
    elif ws.n_points != N:
        raise ValueError("workspace sized for a different batch")
    ws.X = X

    # first hidden layer: J_prev is the identity, Lam_prev is zero, so
    # Jz = W1^T for every point and q = row sums of W1^2
    W1 = params.weights[0]
    T, U, q = ws.T[0], ws.U[0], ws.q[0]
    np.matmul(X, W1.T, out=T)
    T += params.biases[0]
    np.tanh(T, out=T)
    np.multiply(T, T, out=U)
    np.subtract(1.0, U, out=U)
    JLz = ws.JLz[0]
    JLz[:, :3, :] = W1.T
    JLz[:, 3, :] = 0.0
    q[:] = np.einsum("wk,wk->w", W1, W1)
    JL = ws.JL[0]
    np.multiply(U[:, None, :], JLz, out=JL)
    C = ws._s1
    np.multiply(T, U, out=C)
    C *= -2.0
    np.multiply(C, q, out=JL[:, 3, :])

    for l in range(1, params.spec.depth_L):
        W = params.weights[l]
        A_prev, JL_prev = ws.T[l - 1], ws.JL[l - 1]
        T, U, q = ws.T[l], ws.U[l], ws.q[l]
        np.matmul(A_prev, W.T, out=T)
        T += params.biases[l]
        np.tanh(T, out=T)
        np.multiply(T, T, out=U)
        np.subtract(1.0, U, out=U)
        JLz = ws.JLz[l]
        np.matmul(JL_prev.reshape(4 * N, -1), W.T, out=JLz.reshape(4 * N, -1))
        Jz = JLz[:, :3, :]
        np.einsum("nkw,nkw->nw", Jz, Jz, out=q)
        JL = ws.JL[l]
        np.multiply(U[:, None, :], JLz, out=JL)
        C = ws._s1
        np.multiply(T, U, out=C)
        C *= -2.0
        C *= q
        JL[:, 3, :] += C

    w_o = params.weights[-1][0]
    np.matmul(ws.T[-1], w_o, out=ws.y)
    ws.y += params.biases[-1][0]
    np.matmul(ws.JL[-1][:, 3, :], w_o, out=ws.lap)
    return ws


def second_order_backward(
    params: MlpParams,
    ws: LaplaceWorkspace,
    ybar: np.ndarray,
    lapbar: np.ndarray,
    grads: MlpParams | None = None,
) -> MlpParams:
    """Reverse pass for an objective with adjoints ybar = dF/dy and
    lapbar = dF/dlap per point; returns dF/d(params).

    Overwrites grads when given (the training loop reuses one buffer set).
    """
    N = ws.n_points
    if grads is None:
        grads = _zero_grads(params)
    w_o = params.weights[-1][0]
    A_L, Lam_L = ws.T[-1], ws.JL[-1][:, 3, :]

    grads.weights[-1][0] = ybar @ A_L + lapbar @ Lam_L
    grads.biases[-1][0] = ybar.sum()
    gA = ws._gA
    np.multiply(ybar[:, None], w_o[None, :], out=gA)
    gJL = ws._g4a
    gJL[:, :3, :] = 0.0
    np.multiply(lapbar[:, None], w_o[None, :], out=gJL[:, 3, :])

    for l in range(params.spec.depth_L - 1, -1, -1):
        T, U, q, JLz = ws.T[l], ws.U[l], ws.q[l], ws.JLz[l]
        Jz, Lz = JLz[:, :3, :], JLz[:, 3, :]
        Jbar, Lbar = gJL[:, :3, :], gJL[:, 3, :]

        # T adjoint: dA/dT = 1, dJ/dT = -2T Jz, dLam/dT = -2T Lz + (6T^2-2) q
        s1, s2 = ws._s1, ws._s2
        np.einsum("nkw,nkw->nw", Jbar, Jz, out=s1)
        s1 += Lbar * Lz
        s1 *= T
        s1 *= -2.0
        np.multiply(T, T, out=s2)
        s2 *= 6.0
        s2 -= 2.0
        s2 *= Lbar
        s2 *= q
        Zbar = gA  # consumed here, reuse as the Z adjoint buffer
        Zbar += s1
        Zbar += s2
        Zbar *= U

        # q adjoint feeds back into the Jz channels: dLam/dq = -2 T U
        qbar = s1
        np.multiply(T, U, out=qbar)
        qbar *= -2.0
        qbar *= Lbar
        gJLz = ws._g4b
        np.multiply(U[:, None, :], gJL, out=gJLz)
        gJLz[:, :3, :] += (2.0 * qbar)[:, None, :] * Jz

        if l > 0:
            A_prev, JL_prev = ws.T[l - 1], ws.JL[l - 1]
            W = params.weights[l]
            np.matmul(Zbar.T, A_prev, out=grads.weights[l])
            grads.weights[l] += gJLz.reshape(4 * N, -1).T @ JL_prev.reshape(4 * N, -1)
            np.sum(Zbar, axis=0, out=grads.biases[l])
            gA = ws._gB if Zbar is ws._gA else ws._gA  # Zbar aliases the old gA
            np.matmul(Zbar, W, out=gA)
            gJL = ws._g4a
            np.matmul(gJLz.reshape(4 * N, -1), W, out=gJL.reshape(4 * N, -1))
        else:
            # at the input J_prev is the identity and Lam_prev is zero
            np.matmul(Zbar.T, ws.X, out=grads.weights[0])
            grads.weights[0] += gJLz[:, :3, :].sum(axis=0).T
            np.sum(Zbar, axis=0, out=grads.biases[0])
    return grads


def laplacian_batch(params: MlpParams, X: np.ndarray) -> np.ndarray:
    """Exact Laplacian of the network output at each row of X."""
    return second_order_forward(params, np.asarray(X, dtype=float)).lap


def laplacian(params: MlpParams, p) -> float:
    """Exact sum of unmixed second derivatives of the output at one point."""
    return float(laplacian_batch(params, _as_batch(p))[0])


def input_gradient(params: MlpParams, p) -> np.ndarray:
    """Exact gradient of the output with respect to (x, y, z) at one point."""
    ws = second_order_forward(params, _as_batch(p))
    return ws.input_grad(params)[0]


def laplacian_param_grad(params: MlpParams, p) -> MlpParams:
    """Exact gradient of laplacian(params, p) with respect to the parameters."""
    X = _as_batch(p)
    ws = second_order_forward(params, X)
    return second_order_backward(params, ws, np.zeros(len(X)), np.ones(len(X)))


def adam_step(state: AdamState, params: MlpParams, grads: MlpParams) -> tuple[AdamState, MlpParams]:
    """One bias-corrected Adam update; inputs are left untouched."""
    new_state = AdamState(
        state.t,
        [m.copy() for m in state.m_weights],
        [m.copy() for m in state.m_biases],
        [v.copy() for v in state.v_weights],
        [v.copy() for v in state.v_biases],
        state.lr,
        state.beta1,
        state.beta2,
        state.epsilon,
    )
    new_params = params.copy()
    _adam_step_inplace(new_state, new_params, grads)
    return new_state, new_params


def _adam_step_inplace(state: AdamState, params: MlpParams, grads: MlpParams) -> None:
    """Hot-loop Adam update mutating state and params in place."""
    state.t += 1
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    step = state.lr / c1
    for p, g, m, v in zip(
        params.weights + params.biases,
        grads.weights + grads.biases,
        state.m_weights + state.m_biases,
        state.v_weights + state.v_biases,
    ):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= step * m / (np.sqrt(v / c2) + state.epsilon)


def adam_init(params: MlpParams, lr: float = 0.001, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8) -> AdamState:
    return AdamState(
        0,
        [np.zeros_like(w) for w in params.weights],
        [np.zeros_like(b) for b in params.biases],
        [np.zeros_like(w) for w in params.weights],
        [np.zeros_like(b) for b in params.biases],
        lr,
        beta1,
        beta2,
        epsilon,
    )


def flatten_params(params: MlpParams) -> np.ndarray:
    """All parameters as one vector (weights then biases, layer order)."""
    return np.concatenate([a.ravel() for a in params.weights + params.biases])


def unflatten_params(spec: MlpSpec, vec: np.ndarray) -> MlpParams:
    """Inverse of flatten_params."""
    weights, biases, pos = [], [], 0
    for fan_in, fan_out in spec.layer_dims:
        weights.append(vec[pos : pos + fan_out * fan_in].reshape(fan_out, fan_in).copy())
        pos += fan_out * fan_in
    for _, fan_out in spec.layer_dims:
        biases.append(vec[pos : pos + fan_out].copy())
        pos += fan_out
    if pos != len(vec):
        raise ValueError("vector length does not match the spec")
    return MlpParams(spec, weights, biases)


def save_checkpoint(path, params: MlpParams, adam: AdamState | None = None, seed: int = 0, epoch: int = 0) -> None:
    """Checkpoint JSON: spec, per-layer weights/biases, Adam hyperparameters."""
    adam = adam if adam is not None else adam_init(params)
    payload = {
        "spec": {"L": params.spec.depth_L, "W": params.spec.width_W},
        "layers": [
            {"weights": w.tolist(), "biases": b.tolist()}
            for w, b in zip(params.weights, params.biases)
        ],
        "adam": {
            "t": adam.t,
            "lr": adam.lr,
            "beta1": adam.beta1,
            "beta2": adam.beta2,
            "epsilon": adam.epsilon,
        },
        "seed": seed,
        "epoch": epoch,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_checkpoint(path) -> dict:
    """Load a checkpoint; returns params plus the stored metadata."""
    with open(path) as fh:
        payload = json.load(fh)
    spec = MlpSpec(int(payload["spec"]["L"]), int(payload["spec"]["W"]))
    weights = [np.array(layer["weights"], dtype=float) for layer in payload["layers"]]
    biases = [np.array(layer["biases"], dtype=float) for layer in payload["layers"]]
    params = MlpParams(spec, weights, biases)
    for w, b, (fi, fo) in zip(weights, biases, spec.layer_dims):
        if w.shape != (fo, fi) or b.shape != (fo,):
            raise ValueError(f"checkpoint layer shapes do not match spec {spec}")
    return {
        "params": params,
        "adam": payload["adam"],
        "seed": int(payload["seed"]),
        "epoch": int(payload["epoch"]),
    }
