"""Constant-velocity 3D Kalman filter with per-detection measurement noise.

State layout (10): x, y, z, r, w, l, h, vx, vy, vz. Measurements and their
covariances use the box order x, y, z, w, l, h, r, so the observation
matrix is a row-permuted selection rather than ``[I 0]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .detection import DetectionU
from .geometry import Box7, wrap_angle

STATE_DIM = 10
MEAS_DIM = 7
STATE_YAW = 3
# state index feeding each measurement component (x, y, z, w, l, h, r)
MEAS_TO_STATE = np.array([0, 1, 2, 4, 5, 6, 3])

H = np.zeros((MEAS_DIM, STATE_DIM))
H[np.arange(MEAS_DIM), MEAS_TO_STATE] = 1.0

VARIANCE_FLOOR = 1e-12
PSD_TOL = 1e-9


class SingularInnovationError(np.linalg.LinAlgError):
    pass


def transition_matrix(dt: float = 1.0) -> np.ndarray:
    f = np.eye(STATE_DIM)
    f[0, 7] = f[1, 8] = f[2, 9] = dt
    return f


def default_process_noise() -> np.ndarray:
    return np.diag([0.0] * 7 + [0.01] * 3)


def default_initial_cov() -> np.ndarray:
    return np.diag([10.0] * 7 + [1000.0] * 3)


@dataclass
class NoiseConfig:
    alpha: float = 0.6
    beta: float = 5.0
    process_noise: np.ndarray = field(default_factory=default_process_noise)
    initial_cov: np.ndarray = field(default_factory=default_initial_cov)
    dt: float = 1.0
    use_sigma_for_init: bool = False

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.alpha == 0 and self.beta == 0:
            raise ValueError("alpha = beta = 0 gives a zero measurement noise for every detection")
        self.process_noise = np.asarray(self.process_noise, dtype=float)
        self.initial_cov = np.asarray(self.initial_cov, dtype=float)
        for name in ("process_noise", "initial_cov"):
            m = getattr(self, name)
            if m.shape != (STATE_DIM, STATE_DIM):
                raise ValueError(f"{name} must be {STATE_DIM}x{STATE_DIM}")
            if np.linalg.eigvalsh(0.5 * (m + m.T))[0] < -PSD_TOL:
                raise ValueError(f"{name} must be PSD")
        if not self.dt > 0:
            raise ValueError("dt must be positive")


@dataclass
class KalmanState:
    mean: np.ndarray
    cov: np.ndarray

    def box(self) -> Box7:
        return Box7.from_array(self.mean[MEAS_TO_STATE])

    def copy(self) -> "KalmanState":
        return KalmanState(self.mean.copy(), self.cov.copy())


def transform_uncertainty(sigma, alpha: float, beta: float) -> np.ndarray:
    """Measurement noise fed to the filter: ``alpha * I + beta * sigma``."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (MEAS_DIM, MEAS_DIM):
        raise ValueError(f"sigma must be {MEAS_DIM}x{MEAS_DIM}")
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be non-negative")
    scale = max(1.0, float(np.abs(sigma).max()))
    if np.abs(sigma - sigma.T).max() > 1e-9 * scale:
        raise ValueError("sigma is not symmetric")
    if np.linalg.eigvalsh(0.5 * (sigma + sigma.T))[0] < -PSD_TOL * scale:
        raise ValueError("sigma is not PSD")
    return alpha * np.eye(MEAS_DIM) + beta * sigma


def predict(s: KalmanState, q=None, dt: float = 1.0) -> KalmanState:
    q = default_process_noise() if q is None else q
    f = transition_matrix(dt)
    mean = f @ s.mean
    mean[STATE_YAW] = wrap_angle(mean[STATE_YAW])
    cov = f @ s.cov @ f.T + q
    return KalmanState(mean, 0.5 * (cov + cov.T))


def update(s: KalmanState, z: Box7, sigma_hat) -> KalmanState:
    """Kalman correction with measurement noise ``sigma_hat`` (Joseph form)."""
    r = np.array(sigma_hat, dtype=float)
    diag = np.diag(r)
    if np.any(diag < VARIANCE_FLOOR):
        r[np.diag_indices(MEAS_DIM)] = np.maximum(diag, VARIANCE_FLOOR)

    mean = s.mean.copy()
    zvec = z.to_array()
    # heading ambiguity: a residual beyond 90 degrees is treated as a flipped box
    dyaw = wrap_angle(zvec[6] - mean[STATE_YAW])
    if abs(dyaw) > math.pi / 2:
        mean[STATE_YAW] = wrap_angle(mean[STATE_YAW] + math.pi)
        dyaw = wrap_angle(zvec[6] - mean[STATE_YAW])
    y = zvec - H @ mean
    y[6] = dyaw

    p = s.cov
    ph = p @ H.T
    innov = H @ ph + r
    try:
        chol = np.linalg.cholesky(0.5 * (innov + innov.T))
    except np.linalg.LinAlgError as e:
        raise SingularInnovationError("innovation covariance is not positive definite") from e
    # K = P H^T S^-1 via two triangular solves
    k = np.linalg.solve(chol.T, np.linalg.solve(chol, ph.T)).T
    mean = mean + k @ y
    mean[STATE_YAW] = wrap_angle(mean[STATE_YAW])
    ikh = np.eye(STATE_DIM) - k @ H
    cov = ikh @ p @ ikh.T + k @ r @ k.T
    return KalmanState(mean, 0.5 * (cov + cov.T))


def init_track_state(d: DetectionU, cfg: NoiseConfig) -> KalmanState:
    mean = np.zeros(STATE_DIM)
    mean[MEAS_TO_STATE] = d.box.to_array()
    cov = cfg.initial_cov.copy()
    if cfg.use_sigma_for_init:
        block = transform_uncertainty(d.sigma, cfg.alpha, cfg.beta)
        cov[np.ix_(MEAS_TO_STATE, MEAS_TO_STATE)] = block
    return KalmanState(mean, cov)
