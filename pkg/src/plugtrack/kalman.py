"""Constant-velocity Kalman filter over the 8-dim box state.

State is [cx, cy, w, h, vcx, vcy, vw, vh]; only the first four components are
observed. Per-dimension normalized innovation squared (NIS) values from the
most recent updates feed the uncertainty vector used by the fusion model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .geometry import BBox

NIS_WINDOW = 3

# F = [[I4, I4], [0, I4]] (unit timestep), H = [I4, 0]
_F = np.eye(8)
_F[:4, 4:] = np.eye(4)
_H = np.zeros((4, 8))
_H[:4, :4] = np.eye(4)


@dataclass(frozen=True)
class NoiseConfig:
    """Process/measurement noise standard deviations, as fractions of box height."""

    q_pos: float = 1.0 / 20
    q_vel: float = 1.0 / 160
    r_pos: float = 1.0 / 20

    def __post_init__(self):
        if self.q_pos <= 0 or self.q_vel <= 0 or self.r_pos <= 0:
            raise ValueError("noise standard deviations must be strictly positive")


@dataclass
class KalmanState:
    x: np.ndarray                 # (8,) state mean
    P: np.ndarray                 # (8, 8) covariance
    nis_history: list = field(default_factory=list)   # most recent NIS 4-vectors
    age: int = 0

    def copy(self) -> "KalmanState":
        return KalmanState(self.x.copy(), self.P.copy(),
                           [v.copy() for v in self.nis_history], self.age)


def kf_init(z: BBox, cfg: NoiseConfig = NoiseConfig()) -> KalmanState:
    """Start a filter on a first measurement: zero velocity, diagonal P."""
    if z.w <= 0 or z.h <= 0:
        raise ValueError("measurement box must have positive dimensions")
    x = np.zeros(8)
    x[:4] = z.as_array()
    h = z.h
    pos_std = 2.0 * cfg.r_pos * h
    vel_std = 10.0 * cfg.r_pos * h
    P = np.diag([pos_std ** 2] * 4 + [vel_std ** 2] * 4)
    return KalmanState(x, P)


def _process_noise(h: float, cfg: NoiseConfig) -> np.ndarray:
    q_pos = (cfg.q_pos * h) ** 2
    q_vel = (cfg.q_vel * h) ** 2
    return np.diag([q_pos] * 4 + [q_vel] * 4)


def _measurement_noise(h: float, cfg: NoiseConfig) -> np.ndarray:
    return np.eye(4) * (cfg.r_pos * h) ** 2


def kf_predict(s: KalmanState, cfg: NoiseConfig = NoiseConfig()):
    """One prediction step; returns (new state, predicted box).

    The predicted box is the position part of the state with dimensions
    floored at a tiny positive value so it is always a valid BBox.
    """
    h = s.x[3]
    x = _F @ s.x
    P = _F @ s.P @ _F.T + _process_noise(h, cfg)
    P = 0.5 * (P + P.T)
    out = KalmanState(x, P, [v.copy() for v in s.nis_history], s.age + 1)
    box = BBox(float(x[0]), float(x[1]),
               float(max(x[2], 1e-6)), float(max(x[3], 1e-6)))
    return out, box


def kf_update(s: KalmanState, z: BBox, cfg: NoiseConfig = NoiseConfig(),
              window: int = NIS_WINDOW) -> KalmanState:
    """Measurement update; appends the per-dimension NIS to the history."""
    if z.w <= 0 or z.h <= 0:
        raise ValueError("measurement box must have positive dimensions")
    R = _measurement_noise(s.x[3], cfg)
    y = z.as_array() - _H @ s.x
    S = _H @ s.P @ _H.T + R
    if np.linalg.cond(S) > 1e12:
        raise NumericalError("innovation covariance is numerically singular")
    # K = P H^T S^-1, via solve on the symmetric S
    K = np.linalg.solve(S, _H @ s.P).T
    x = s.x + K @ y
    P = (np.eye(8) - K @ _H) @ s.P
    P = 0.5 * (P + P.T)
    nis = y ** 2 / np.diag(S)
    history = [v.copy() for v in s.nis_history] + [nis]
    if len(history) > window:
        history = history[-window:]
    return KalmanState(x, P, history, s.age)


def uncertainty_vector(s: KalmanState):
    """Per-dimension windowed NIS mean + population std.

    Returns (sigma, cold): with an empty history the neutral value (1,1,1,1)
    is returned and cold is True.
    """
    if not s.nis_history:
        return np.ones(4), True
    vals = np.stack(s.nis_history, axis=0)
    mu = vals.mean(axis=0)
    sigma = np.sqrt(((vals - mu) ** 2).mean(axis=0))
    return mu + sigma, False
