"""Adaptive blending generator and the blended box prediction.

Maps the fused 128-dim motion feature to four per-coordinate blending factors
in (0, 1); the final box is the element-wise convex combination of the Kalman
and data-driven predictions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cme import FUSED_DIM, MultiPerceptiveFeature
from .geometry import BBox
from .nn import BatchNorm, Dense, Dropout, ReLU, Sequential, Sigmoid


@dataclass(frozen=True)
class BlendFactors:
    """Per-coordinate blending weights (alpha_x, alpha_y, alpha_w, alpha_h)."""

    alpha: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=np.float64)
        object.__setattr__(self, "alpha", a)
        if a.shape != (4,) or not np.all((a > 0) & (a < 1)):
            raise ValueError("alpha must be a 4-vector strictly inside (0, 1)")


class AdaptiveBlendingGenerator:
    """MLP head: 128 -> 256 -> 128 -> 4 with batchnorm/dropout and a sigmoid
    output so factors stay inside (0, 1).
    """

    def __init__(self, rng):
        self.net = Sequential([
            Dense(FUSED_DIM, 256, rng, name="abg_fc1"),
            ReLU(name="abg_relu1"),
            BatchNorm(256, name="abg_bn1"),
            Dropout(0.15, name="abg_drop1"),
            Dense(256, 128, rng, name="abg_fc2"),
            ReLU(name="abg_relu2"),
            BatchNorm(128, name="abg_bn2"),
            Dropout(0.1, name="abg_drop2"),
            Dense(128, 4, rng, name="abg_fc3"),
            Sigmoid(name="abg_sigmoid"),
        ], name="abg")

    def forward(self, f_mult, mode="eval", streams=None):
        x = f_mult.values if isinstance(f_mult, MultiPerceptiveFeature) else f_mult
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        out, cache = self.net.forward(np.atleast_2d(x), mode=mode, streams=streams)
        return (out[0] if single else out), cache

    def backward(self, cache, d_alpha):
        return self.net.backward(cache, np.atleast_2d(d_alpha))

    def layers(self):
        return self.net.layers

    def named_params(self):
        return self.net.named_params()


def abg_forward(abg: AdaptiveBlendingGenerator, f_mult, mode="eval",
                streams=None) -> BlendFactors:
    """Single-sample convenience wrapper returning validated BlendFactors."""
    out, _ = abg.forward(f_mult, mode=mode, streams=streams)
    return BlendFactors(out)


def blend_predictions(alpha, kf_pred: BBox, dp_pred: BBox) -> BBox:
    """Element-wise convex combination alpha*KF + (1-alpha)*DP.

    Accepts BlendFactors or any 4-vector in [0, 1] (the closed boundary is
    allowed here so pure-KF/pure-DP behavior is testable).
    """
    a = alpha.alpha if isinstance(alpha, BlendFactors) else np.asarray(alpha, dtype=np.float64)
    if np.any(a < 0) or np.any(a > 1):
        raise ValueError("blending factors must lie in [0, 1]")
    v = a * kf_pred.as_array() + (1.0 - a) * dp_pred.as_array()
    return BBox.from_array(v)


def blend_arrays(alpha, kf, dp) -> np.ndarray:
    """Vectorized blend for (..., 4) arrays."""
    alpha = np.asarray(alpha, dtype=np.float64)
    return alpha * np.asarray(kf, dtype=np.float64) \
        + (1.0 - alpha) * np.asarray(dp, dtype=np.float64)
