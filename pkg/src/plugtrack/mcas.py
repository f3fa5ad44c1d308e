"""Monte Carlo alpha search: exhaustive scoring of a noise-perturbed grid of
blending-factor candidates; the per-sample argmin becomes the regression
target for the blending generator.

The default grid is {0.3, 0.4, 0.5, 0.6, 0.7}^4 (625 candidates); each batch
perturbs every candidate with independent Gaussian noise (std 0.1) clamped to
[0, 1]. All scoring runs on image-normalized coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .abg import BlendFactors, blend_arrays
from .cme import CmeInputs
from .geometry import BBox, giou_loss_arrays, smooth_l1


@dataclass(frozen=True)
class AlphaGrid:
    base: np.ndarray          # (steps^4, 4), lexicographic candidate order
    noise_std: float = 0.1
    lambda1: float = 0.3
    lambda2: float = 0.7
    steps: int = 5


@dataclass(frozen=True)
class TrainingSample:
    inputs: CmeInputs
    gt_box: BBox

    def __post_init__(self):
        if self.gt_box.w <= 0 or self.gt_box.h <= 0:
            raise ValueError("ground-truth box must have positive dimensions")


@dataclass(frozen=True)
class LossBreakdown:
    smooth_l1: float
    giou: float
    mcas: float
    total: float


def build_grid(lambda1: float = 0.3, lambda2: float = 0.7, steps: int = 5,
               noise_std: float = 0.1) -> AlphaGrid:
    """Full Cartesian product of `steps` evenly spaced values per coordinate."""
    if not (0.0 <= lambda1 < lambda2 <= 1.0):
        raise ValueError("need 0 <= lambda1 < lambda2 <= 1")
    if steps < 2:
        raise ValueError("need at least 2 grid steps")
    vals = np.linspace(lambda1, lambda2, steps)
    mesh = np.meshgrid(vals, vals, vals, vals, indexing="ij")
    base = np.stack(mesh, axis=-1).reshape(-1, 4)
    return AlphaGrid(base=base, noise_std=noise_std,
                     lambda1=lambda1, lambda2=lambda2, steps=steps)


def perturb_grid(grid: AlphaGrid, rng) -> np.ndarray:
    """Independent per-candidate, per-coordinate Gaussian noise, clamped to [0,1]."""
    rng = np.random.default_rng(rng)
    noisy = grid.base + rng.normal(0.0, grid.noise_std, size=grid.base.shape)
    return np.clip(noisy, 0.0, 1.0)


def score_candidate(alpha, kf_pred, dp_pred, gt) -> np.ndarray:
    """SmoothL1 + GIoU loss of the blended box against ground truth.

    Broadcasts: alpha may be (4,), (N, 4) or (B, N, 4) against (..., 4) boxes.
    """
    blended = blend_arrays(alpha, _as4(kf_pred), _as4(dp_pred))
    gt = _as4(gt)
    return smooth_l1(blended, gt) + giou_loss_arrays(blended, gt)


def select_alpha_star(candidates, kf_pred, dp_pred, gt) -> np.ndarray:
    """Argmin of score_candidate over the candidate list (first index wins ties)."""
    candidates = np.asarray(candidates, dtype=np.float64)
    if candidates.size == 0:
        raise ValueError("candidate list must be non-empty")
    scores = score_candidate(candidates, _as4(kf_pred), _as4(dp_pred), _as4(gt))
    return candidates[int(np.argmin(scores))]


def select_alpha_star_batch(candidates, kf_pred, dp_pred, gt) -> np.ndarray:
    """Vectorized per-sample argmin: (N, 4) candidates x (B, 4) boxes -> (B, 4)."""
    candidates = np.asarray(candidates, dtype=np.float64)
    scores = score_candidate(candidates[None, :, :],
                             np.asarray(kf_pred)[:, None, :],
                             np.asarray(dp_pred)[:, None, :],
                             np.asarray(gt)[:, None, :])
    return candidates[np.argmin(scores, axis=1)]


def compute_losses(sample: TrainingSample, predicted_alpha,
                   alpha_star) -> LossBreakdown:
    """Per-sample loss terms: box losses on the blended prediction plus the
    MSE between predicted and searched blending factors."""
    a = predicted_alpha.alpha if isinstance(predicted_alpha, BlendFactors) \
        else np.asarray(predicted_alpha, dtype=np.float64)
    kf = sample.inputs.kf_pred.as_array()
    dp = sample.inputs.dp_pred.as_array()
    gt = sample.gt_box.as_array()
    blended = blend_arrays(a, kf, dp)
    l1 = float(smooth_l1(blended, gt))
    lg = float(giou_loss_arrays(blended, gt))
    lm = float(np.mean((a - np.asarray(alpha_star, dtype=np.float64)) ** 2))
    return LossBreakdown(smooth_l1=l1, giou=lg, mcas=lm, total=l1 + lg + lm)


def _as4(box) -> np.ndarray:
    if isinstance(box, BBox):
        return box.as_array()
    return np.asarray(box, dtype=np.float64)
