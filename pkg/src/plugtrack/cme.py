"""Contextual motion encoder: three perception branches fused into a single
128-dim motion feature.

Branches: an LSTM over the 5-frame tracklet window (motion pattern), an MLP on
the difference between the two predictors' boxes (prediction discrepancy), and
an MLP on the Kalman NIS uncertainty vector (uncertainty quantification).
All coordinates entering this module are image-normalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BBox, Tracklet, WINDOW_LEN
from .nn import Dense, Dropout, LSTM, ReLU, Sequential

MPM_DIM = 128
BRANCH_DIM = 32
FUSED_DIM = 128


@dataclass
class CmeInputs:
    """One sample's encoder inputs, all image-normalized."""

    tracklet: Tracklet
    kf_pred: BBox
    dp_pred: BBox
    sigma_kf: np.ndarray

    def __post_init__(self):
        if len(self.tracklet) != WINDOW_LEN:
            raise ValueError(f"tracklet must be windowed to {WINDOW_LEN} frames")
        self.sigma_kf = np.asarray(self.sigma_kf, dtype=np.float64)
        if np.any(self.sigma_kf < 0):
            raise ValueError("sigma_kf must be non-negative")


@dataclass(frozen=True)
class MultiPerceptiveFeature:
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape[-1] != FUSED_DIM or not np.all(np.isfinite(self.values)):
            raise ValueError("fused feature must be a finite 128-vector")


def _branch_mlp(rng, prefix):
    # Linear(4->64) -> ReLU -> Dropout(0.1) -> Linear(64->128) -> ReLU
    # -> Linear(128->32) -> ReLU
    return Sequential([
        Dense(4, 64, rng, name=f"{prefix}_fc1"),
        ReLU(name=f"{prefix}_relu1"),
        Dropout(0.1, name=f"{prefix}_drop1"),
        Dense(64, 128, rng, name=f"{prefix}_fc2"),
        ReLU(name=f"{prefix}_relu2"),
        Dense(128, 32, rng, name=f"{prefix}_fc3"),
        ReLU(name=f"{prefix}_relu3"),
    ], name=prefix)


class ContextualMotionEncoder:
    """Three-branch encoder producing the fused 128-dim motion feature."""

    def __init__(self, rng):
        self.lstm1 = LSTM(8, MPM_DIM, rng, name="mpm_lstm1")
        self.lstm2 = LSTM(MPM_DIM, MPM_DIM, rng, name="mpm_lstm2")
        self.pdm = _branch_mlp(rng, "pdm")
        self.uqm = _branch_mlp(rng, "uqm")
        self.fusion = Sequential([
            Dense(MPM_DIM + 2 * BRANCH_DIM, 256, rng, name="fus_fc1"),
            ReLU(name="fus_relu1"),
            Dropout(0.1, name="fus_drop1"),
            Dense(256, 512, rng, name="fus_fc2"),
            ReLU(name="fus_relu2"),
            Dense(512, FUSED_DIM, rng, name="fus_fc3"),
            ReLU(name="fus_relu3"),
        ], name="fusion")

    # --- single-branch entry points -------------------------------------

    def mpm_encode(self, windows, mode="eval", streams=None):
        """LSTM encoding of (B, 5, 8) windows; returns the final hidden state."""
        single = isinstance(windows, Tracklet) or np.ndim(windows) == 2
        x = self._window_array(windows)
        out, _ = self._mpm_forward(x, mode, streams)
        return out[0] if single else out

    def pdm_encode(self, kf_pred, dp_pred, mode="eval", streams=None):
        disc = _box_array(kf_pred) - _box_array(dp_pred)
        out, _ = self.pdm.forward(np.atleast_2d(disc), mode=mode, streams=streams)
        return out[0] if np.ndim(disc) == 1 else out

    def uqm_encode(self, sigma_kf, mode="eval", streams=None):
        sig = np.asarray(sigma_kf, dtype=np.float64)
        out, _ = self.uqm.forward(np.atleast_2d(sig), mode=mode, streams=streams)
        return out[0] if sig.ndim == 1 else out

    def fuse_features(self, f_mpm, f_pdm, f_uqm, mode="eval", streams=None):
        """Concat (MPM, PDM, UQM) and run the fusion encoder."""
        single = np.ndim(f_mpm) == 1
        cat = np.concatenate([np.atleast_2d(f_mpm), np.atleast_2d(f_pdm),
                              np.atleast_2d(f_uqm)], axis=1)
        if cat.shape[1] != MPM_DIM + 2 * BRANCH_DIM:
            raise ValueError("branch feature dimensions must be 128/32/32")
        out, _ = self.fusion.forward(cat, mode=mode, streams=streams)
        return MultiPerceptiveFeature(out[0] if single else out)

    # --- batched forward/backward for training --------------------------

    def forward(self, windows, kf_pred, dp_pred, sigma_kf, mode="eval", streams=None):
        x = self._window_array(windows)
        f_mpm, mpm_cache = self._mpm_forward(x, mode, streams)
        disc = np.atleast_2d(_box_array(kf_pred) - _box_array(dp_pred))
        f_pdm, pdm_cache = self.pdm.forward(disc, mode=mode, streams=streams)
        sig = np.atleast_2d(np.asarray(sigma_kf, dtype=np.float64))
        f_uqm, uqm_cache = self.uqm.forward(sig, mode=mode, streams=streams)
        cat = np.concatenate([f_mpm, f_pdm, f_uqm], axis=1)
        f_mult, fus_cache = self.fusion.forward(cat, mode=mode, streams=streams)
        return f_mult, (mpm_cache, pdm_cache, uqm_cache, fus_cache)

    def backward(self, cache, d_fmult):
        mpm_cache, pdm_cache, uqm_cache, fus_cache = cache
        grads = {}
        d_cat, g = self.fusion.backward(fus_cache, d_fmult)
        grads.update(g)
        d_mpm = d_cat[:, :MPM_DIM]
        d_pdm = d_cat[:, MPM_DIM:MPM_DIM + BRANCH_DIM]
        d_uqm = d_cat[:, MPM_DIM + BRANCH_DIM:]
        _, g = self.pdm.backward(pdm_cache, d_pdm)
        grads.update(g)
        _, g = self.uqm.backward(uqm_cache, d_uqm)
        grads.update(g)
        cache1, cache2, T = mpm_cache
        d_hs2 = np.zeros((d_mpm.shape[0], T, MPM_DIM))
        d_hs2[:, -1, :] = d_mpm
        d_hs1, g2 = self.lstm2.backward(cache2, d_hs2)
        _, g1 = self.lstm1.backward(cache1, d_hs1)
        for k, v in g1.items():
            grads[f"{self.lstm1.name}.{k}"] = v
        for k, v in g2.items():
            grads[f"{self.lstm2.name}.{k}"] = v
        return grads

    def _mpm_forward(self, x, mode, streams):
        if x.ndim != 3 or x.shape[1] != WINDOW_LEN or x.shape[2] != 8:
            raise ValueError(f"MPM expects (B, {WINDOW_LEN}, 8) windows, got {x.shape}")
        hs1, cache1 = self.lstm1.forward(x, mode=mode)
        hs2, cache2 = self.lstm2.forward(hs1, mode=mode)
        return hs2[:, -1, :], (cache1, cache2, x.shape[1])

    @staticmethod
    def _window_array(windows):
        if isinstance(windows, Tracklet):
            return windows.as_array()[None, :, :]
        x = np.asarray(windows, dtype=np.float64)
        return x[None, :, :] if x.ndim == 2 else x

    # --- plumbing --------------------------------------------------------

    def layers(self):
        return ([self.lstm1, self.lstm2] + self.pdm.layers + self.uqm.layers
                + self.fusion.layers)

    def named_params(self):
        out = {}
        for layer in self.layers():
            for k, v in layer.params.items():
                out[f"{layer.name}.{k}"] = v
        return out


def _box_array(b):
    if isinstance(b, BBox):
        return b.as_array()
    return np.asarray(b, dtype=np.float64)
