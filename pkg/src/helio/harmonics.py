"""Spherical-harmonics evaluation and regularized least-squares fitting.

Basis convention
----------------
Y_u^v(theta, phi) = sqrt((2u+1)(u-|v|)! / (4 pi (u+|v|)!)) * P_u^{|v|}(sin theta) * exp(i v phi)

with theta the elevation angle and P_u^m the associated Legendre function
WITHOUT the Condon-Shortley phase. Because the normalization uses |v|, the
negative-degree functions satisfy Y_u^{-v} = conj(Y_u^v) (not the (-1)^v
relation of the physics convention). Coefficient vectors are indexed in the
canonical order (0,0), (1,-1), (1,0), (1,1), ..., (U,U), i.e. flat index
u^2 + u + v.

The fit solves the Tikhonov-regularized normal equations
(Y^H Y + gamma * H) A = Y^H P, where H is diagonal with entries 1 + u(u+1),
via Cholesky with a pivoted-LU fallback; the matrix is never inverted
explicitly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .geometry import Direction

# Regularization used for the extrapolation layout, per frequency band
# (trial-and-error values for the seven evaluation frequencies).
EXTRAP_GAMMA_TABLE = {
    2067.0: 1e-6,
    4134.0: 1e-4,
    6202.0: 1e-1,
    8269.0: 1e-1,
    10336.0: 1e-2,
    12403.0: 1e-1,
    14470.0: 1e-3,
}

DEFAULT_INTERP_GAMMA = 1e-6

# Band edge between the constant mid band and the ceil(f/500) high band.
# 6202 Hz (nominally "6.2 kHz") belongs to the mid band, so the edge sits at
# the nearest-kHz boundary 6.5 kHz rather than at 6.0 kHz.
_MID_BAND_LO = 3000.0
_MID_BAND_HI = 6500.0


class SingularFitError(np.linalg.LinAlgError):
    """Raised when an unregularized fit hits a rank-deficient normal matrix."""


@dataclass(frozen=True)
class ShModel:
    """Truncation order plus complex coefficient vector of length (U+1)^2."""

    order_U: int
    coeffs: np.ndarray

    def __post_init__(self):
        if self.order_U < 0:
            raise ValueError("order must be nonnegative")
        n = (self.order_U + 1) ** 2
        if self.coeffs.shape != (n,):
            raise ValueError(f"expected {n} coefficients, got {self.coeffs.shape}")


@dataclass(frozen=True)
class ShFitConfig:
    order_U: int
    gamma: float = 0.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")


def coeff_index(u: int, v: int) -> int:
    """Flat index of coefficient (u, v) in the canonical ordering."""
    if abs(v) > u:
        raise ValueError(f"degree |{v}| exceeds order {u}")
    return u * u + u + v


def sh_order_for_freq(freq_hz: float) -> int:
    """Truncation order as a staircase in frequency.

    ceil(f/250) below 3 kHz, 12 in the mid band, ceil(f/500) above it.
    """
    if freq_hz <= 0:
        raise ValueError("frequency must be positive")
    if freq_hz < _MID_BAND_LO:
        return math.ceil(freq_hz / 250.0)
    if freq_hz < _MID_BAND_HI:
        return 12
    return math.ceil(freq_hz / 500.0)


def assoc_legendre(u: int, m: int, x):
    """Associated Legendre function P_u^m(x) without Condon-Shortley phase.

    Stable upward recurrence in the order: seeds P_m^m and P_{m+1}^m, then
    (l - m) P_l^m = (2l - 1) x P_{l-1}^m - (l + m - 1) P_{l-2}^m.
    Accepts scalar or ndarray x with |x| <= 1.
    """
    if not 0 <= m <= u:
        raise ValueError(f"need 0 <= m <= u, got u={u}, m={m}")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0):
        raise ValueError("argument outside [-1, 1]")
    table = _legendre_sweep(u, m, x)
    out = table[-1]
    return float(out) if out.ndim == 0 else out


def _legendre_sweep(u: int, m: int, x: np.ndarray) -> list[np.ndarray]:
    """All of P_m^m(x), P_{m+1}^m(x), ..., P_u^m(x) by upward recurrence."""
    # (2m-1)!! (1-x^2)^{m/2}, computed as a float product
    pmm = np.ones_like(x)
    if m > 0:
        somx2 = np.sqrt((1.0 - x) * (1.0 + x))
        fact = 1.0
        for _ in range(m):
            pmm = pmm * fact * somx2
            fact += 2.0
    values = [pmm]
    if u == m:
        return values
    values.append(x * (2 * m + 1) * pmm)
    for l in range(m + 2, u + 1):
        values.append(((2 * l - 1) * x * values[-1] - (l + m - 1) * values[-2]) / (l - m))
    return values


def _sh_norm(u: int, m: int) -> float:
    """sqrt((2u+1)(u-m)! / (4 pi (u+m)!)) via log-gamma to avoid overflow."""
    return math.exp(
        0.5 * (math.log(2 * u + 1) - math.log(4 * math.pi) + math.lgamma(u - m + 1) - math.lgamma(u + m + 1))
    )


def sh_eval(u: int, v: int, direction: Direction) -> complex:
    """Evaluate Y_u^v at one direction."""
    m = abs(v)
    if m > u:
        raise ValueError(f"degree |{v}| exceeds order {u}")
    s = math.sin(math.radians(direction.theta_deg))
    p = assoc_legendre(u, m, s)
    phase = np.exp(1j * v * math.radians(direction.phi_deg))
    return complex(_sh_norm(u, m) * p * phase)


def sh_matrix(dirs, order_U: int) -> np.ndarray:
    """Complex matrix of shape (len(dirs), (U+1)^2) with Y_u^v sampled per row.

    Columns follow the canonical (u, v) ordering. One Legendre recurrence
    sweep per |v| fills both the +v and -v columns.
    """
    dirs = list(dirs)
    if not dirs:
        raise ValueError("need at least one direction")
    theta = np.radians([d.theta_deg for d in dirs])
    phi = np.radians([d.phi_deg for d in dirs])
    s = np.sin(theta)
    n_cols = (order_U + 1) ** 2
    Y = np.empty((len(dirs), n_cols), dtype=complex)
    for m in range(order_U + 1):
        p_values = _legendre_sweep(order_U, m, s)
        phase = np.exp(1j * m * phi)
        for u in range(m, order_U + 1):
            col = _sh_norm(u, m) * p_values[u - m]
            Y[:, coeff_index(u, m)] = col * phase
            if m > 0:
                Y[:, coeff_index(u, -m)] = col * np.conj(phase)
    return Y


def regularizer_diagonal(order_U: int) -> np.ndarray:
    """Diagonal of H: 1 + u(u+1) repeated over the 2u+1 degrees of each order."""
    return np.concatenate(
        [np.full(2 * u + 1, 1.0 + u * (u + 1)) for u in range(order_U + 1)]
    )


def sh_fit(pressures: np.ndarray, dirs, cfg: ShFitConfig) -> ShModel:
    """Fit coefficients to sampled pressures by regularized least squares.

    With gamma = 0 the sample count must be at least (U+1)^2 and the design
    must have full column rank; a rank-deficient normal matrix raises
    SingularFitError rather than being silently regularized.
    """
    pressures = np.asarray(pressures, dtype=complex)
    dirs = list(dirs)
    if pressures.shape != (len(dirs),):
        raise ValueError("pressures and directions must have equal length")
    n_coeffs = (cfg.order_U + 1) ** 2
    if cfg.gamma == 0.0 and len(dirs) < n_coeffs:
        raise ValueError(
            f"unregularized fit needs at least {n_coeffs} samples, got {len(dirs)}"
        )
    Y = sh_matrix(dirs, cfg.order_U)
    normal = Y.conj().T @ Y
    if cfg.gamma > 0.0:
        normal[np.diag_indices_from(normal)] += cfg.gamma * regularizer_diagonal(cfg.order_U)
    rhs = Y.conj().T @ pressures
    try:
        cho = scipy.linalg.cho_factor(normal, lower=True, check_finite=False)
        coeffs = scipy.linalg.cho_solve(cho, rhs, check_finite=False)
    except np.linalg.LinAlgError as exc:
        if cfg.gamma == 0.0:
            raise SingularFitError(
                "normal matrix is rank deficient; add regularization or samples"
            ) from exc
        lu = scipy.linalg.lu_factor(normal, check_finite=False)
        coeffs = scipy.linalg.lu_solve(lu, rhs, check_finite=False)
    return ShModel(cfg.order_U, coeffs)


def sh_predict(model: ShModel, dirs) -> np.ndarray:
    """Evaluate the fitted expansion at arbitrary directions."""
    return sh_matrix(dirs, model.order_U) @ model.coeffs


def save_sh_model(model: ShModel, path) -> None:
    payload = {
        "order_U": model.order_U,
        "coeffs": [[c.real, c.imag] for c in model.coeffs],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_sh_model(path) -> ShModel:
    with open(path) as fh:
        payload = json.load(fh)
    coeffs = np.array([complex(re, im) for re, im in payload["coeffs"]])
    return ShModel(int(payload["order_U"]), coeffs)


def default_gamma(scenario: str, freq_hz: float) -> float:
    """Built-in regularization defaults: fixed for interpolation, tabulated per
    frequency for extrapolation (nearest table entry)."""
    if scenario == "interp":
        return DEFAULT_INTERP_GAMMA
    if scenario == "extrap":
        freqs = np.array(sorted(EXTRAP_GAMMA_TABLE))
        nearest = freqs[np.argmin(np.abs(freqs - freq_hz))]
        return EXTRAP_GAMMA_TABLE[float(nearest)]
    raise ValueError(f"unknown scenario {scenario!r}")
