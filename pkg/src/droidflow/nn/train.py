"""Mini-batch Adam training over the unrolled hybrid network.

All randomness (weight init, per-sample state seeding, epoch shuffling)
derives from the one seed in TrainConfig, so identical runs produce
bit-identical parameters.
"""

from dataclasses import dataclass

import numpy as np

from . import tape
from .model import Hyperparams, ModelParams, TrainConfig, init_model, sample_loss

SHUFFLE_STREAM = 0x5F
INIT_STREAM = 0x11


class DivergedLossError(RuntimeError):
    pass


@dataclass
class TrainResult:
    params: ModelParams
    epoch_losses: list


class Adam:
    def __init__(self, named_arrays, tc: TrainConfig):
        self.arrays = dict(named_arrays)
        self.tc = tc
        self.m = {k: np.zeros_like(v) for k, v in self.arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in self.arrays.items()}
        self.t = 0

    def step(self, grads: dict):
        tc = self.tc
        self.t += 1
        for name in sorted(self.arrays):
            g = grads.get(name)
            if g is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= tc.beta1
            m += (1 - tc.beta1) * g
            v *= tc.beta2
            v += (1 - tc.beta2) * g * g
            m_hat = m / (1 - tc.beta1**self.t)
            v_hat = v / (1 - tc.beta2**self.t)
            self.arrays[name] -= tc.learning_rate * m_hat / (np.sqrt(v_hat) + tc.eps)


def train(dataset, hp: Hyperparams, tc: TrainConfig, state_dim: int = 32,
          embed_dim: int = 128, progress=None) -> TrainResult:
    """Train on (flow graph, row matrix, label) triples; returns the fitted
    parameters and the per-epoch mean loss log."""
    if not dataset:
        raise ValueError("empty training dataset")
    model = init_model(hp, seed=(tc.seed, INIT_STREAM), state_dim=state_dim,
                       embed_dim=embed_dim)
    opt = Adam(model.named(), tc)
    shuffle_rng = np.random.default_rng((tc.seed, SHUFFLE_STREAM))
    losses = []
    for epoch in range(hp.epochs):
        order = shuffle_rng.permutation(len(dataset))
        epoch_loss = 0.0
        for start in range(0, len(order), hp.batch_size):
            batch = order[start : start + hp.batch_size]
            grads = {}
            for idx in batch:
                graph, matrix, label = dataset[int(idx)]
                lv, pv = sample_loss(model, graph, matrix, label,
                                     init_seed=(tc.seed, int(idx)))
                epoch_loss += float(lv.value)
                tape.backward(lv)
                for name, var in pv.items():
                    if var.grad is None:
                        continue
                    if name in grads:
                        grads[name] += var.grad
                    else:
                        grads[name] = var.grad.copy()
            inv = 1.0 / len(batch)
            for name in grads:
                grads[name] *= inv
            opt.step(grads)
        mean_loss = epoch_loss / len(dataset)
        if not np.isfinite(mean_loss):
            raise DivergedLossError(f"non-finite loss at epoch {epoch}")
        losses.append(mean_loss)
        if progress is not None:
            progress(epoch, mean_loss)
    return TrainResult(model, losses)
