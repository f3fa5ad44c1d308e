"""The trainable fusion network: contextual motion encoder + adaptive
blending generator, with shared parameter plumbing and checkpointing.
"""

from __future__ import annotations

import numpy as np

from .abg import AdaptiveBlendingGenerator
from .cme import ContextualMotionEncoder
from .nn import Dropout, DropoutStreams, count_parameters, load_checkpoint, save_checkpoint


class FusionModel:
    def __init__(self, seed: int = 0):
        self.seed = seed
        root = np.random.SeedSequence(seed)
        cme_ss, abg_ss = root.spawn(2)
        self.cme = ContextualMotionEncoder(np.random.default_rng(cme_ss))
        self.abg = AdaptiveBlendingGenerator(np.random.default_rng(abg_ss))
        stream = 0
        for layer in self.all_layers():
            if isinstance(layer, Dropout):
                layer.stream_id = stream
                stream += 1

    def forward(self, windows, kf_pred, dp_pred, sigma_kf, mode="eval",
                streams: DropoutStreams | None = None):
        """Returns (alpha (B, 4), cache). Inputs are image-normalized arrays."""
        f_mult, cme_cache = self.cme.forward(windows, kf_pred, dp_pred,
                                             sigma_kf, mode=mode, streams=streams)
        alpha, abg_cache = self.abg.forward(f_mult, mode=mode, streams=streams)
        return alpha, (cme_cache, abg_cache)

    def backward(self, cache, d_alpha):
        cme_cache, abg_cache = cache
        d_fmult, grads = self.abg.backward(abg_cache, d_alpha)
        grads.update(self.cme.backward(cme_cache, d_fmult))
        return grads

    def predict_alpha(self, windows, kf_pred, dp_pred, sigma_kf) -> np.ndarray:
        alpha, _ = self.forward(windows, kf_pred, dp_pred, sigma_kf, mode="eval")
        return alpha

    # --- parameter plumbing ----------------------------------------------

    def all_layers(self):
        return self.cme.layers() + self.abg.layers()

    def checkpoint_layers(self):
        return [l for l in self.all_layers() if l.params or l.kind == "batchnorm"]

    def named_params(self):
        out = self.cme.named_params()
        out.update(self.abg.named_params())
        return out

    def num_parameters(self) -> int:
        return count_parameters(self)

    def save(self, path):
        save_checkpoint(path, self)

    @classmethod
    def load(cls, path, seed: int = 0) -> "FusionModel":
        model = cls(seed=seed)
        load_checkpoint(path, model)
        return model
