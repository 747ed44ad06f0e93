"""Mini-batch training and finite-difference gradient checking."""

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError, TrainingDivergedError
from ..numerics import SeededRng
from . import network


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InvalidInputError("learning_rate must be positive")
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be >= 1")
        if self.epochs < 0:
            raise InvalidInputError("epochs must be >= 0")
        if self.optimizer not in ("sgd", "adam"):
            raise InvalidInputError(f"unknown optimizer {self.optimizer!r}")


class _Adam:
    def __init__(self, params, cfg):
        self.cfg = cfg
        self.m = [[np.zeros_like(p) for p in g] for g in params]
        self.v = [[np.zeros_like(p) for p in g] for g in params]
        self.t = 0

    def step(self, params, grads):
        cfg = self.cfg
        self.t += 1
        c1 = 1.0 - cfg.beta1 ** self.t
        c2 = 1.0 - cfg.beta2 ** self.t
        for group, ggroup, mg, vg in zip(params, grads, self.m, self.v):
            for p, g, m, v in zip(group, ggroup, mg, vg):
                m *= cfg.beta1
                m += (1.0 - cfg.beta1) * g
                v *= cfg.beta2
                v += (1.0 - cfg.beta2) * g * g
                p -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.eps)


class _Sgd:
    def __init__(self, params, cfg):
        self.lr = cfg.learning_rate

    def step(self, params, grads):
        for group, ggroup in zip(params, grads):
            for p, g in zip(group, ggroup):
                p -= self.lr * g


def _stack_frames(frames, input_shape):
    x = np.asarray(frames, dtype=np.float64)
    if x.ndim == 3:
        x = x[:, None]
    if x.ndim != 4 or x.shape[0] == 0:
        raise InvalidInputError("training needs a non-empty stack of frames")
    if tuple(x.shape[1:]) != tuple(input_shape):
        raise InvalidInputError(f"frames of shape {x.shape[1:]} do not match {input_shape}")
    if not np.all(np.isfinite(x)) or x.min() < 0.0 or x.max() > 1.0:
        raise InvalidInputError("training frames must be finite and scaled to [0, 1]")
    return x


def train(frames, arch, cfg, callback=None):
    """Train an autoencoder; returns ``(model, loss_history)``.

    ``arch`` is an architecture from :func:`network.build_architecture`. If it
    carries no parameters they are initialized from ``cfg.seed``. The loss
    history holds one sample-weighted mean batch RMSE per epoch, measured
    before each batch's update. Shuffling is drawn from ``cfg.seed`` so the
    whole run is reproducible.
    """
    model = arch.copy()
    x = _stack_frames(frames, model.input_shape)
    root = SeededRng(cfg.seed)
    if not model.params:
        network.init_params(model, root.child(0))
    opt = _Adam(model.params, cfg) if cfg.optimizer == "adam" else _Sgd(model.params, cfg)
    n = x.shape[0]
    history = []
    for epoch in range(cfg.epochs):
        order = root.child(1, epoch).permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = np.sort(order[start:start + cfg.batch_size])
            loss, grads = network.loss_and_grads(model, x[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, loss)
            total += loss * len(idx)
            opt.step(model.params, grads)
        mean_loss = total / n
        if not np.isfinite(mean_loss):
            raise TrainingDivergedError(epoch, mean_loss)
        history.append(mean_loss)
        if callback is not None:
            callback(epoch, mean_loss)
    return model, history


def grad_check(model, x, tolerance=1e-4, step=1e-6, floor=1e-8):
    """Compare analytic parameter gradients against central differences.

    The relative error of each parameter is ``|a - n| / max(|a| + |n|, floor)``.
    Returns a dict with ``max_rel_error``, ``checked``, ``total``,
    ``coverage`` and ``passed``.
    """
    model = model.copy()
    _, grads = network.loss_and_grads(model, x)
    worst = 0.0
    checked = 0
    for group, ggroup in zip(model.params, grads):
        for p, g in zip(group, ggroup):
            flat = p.reshape(-1)
            gflat = g.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + step
                up, _ = network.loss_and_grads(model, x)
                flat[i] = orig - step
                down, _ = network.loss_and_grads(model, x)
                flat[i] = orig
                numeric = (up - down) / (2.0 * step)
                err = abs(gflat[i] - numeric) / max(abs(gflat[i]) + abs(numeric), floor)
                worst = max(worst, err)
                checked += 1
    total = model.n_parameters()
    return {
        "max_rel_error": worst,
        "checked": checked,
        "total": total,
        "coverage": checked / total if total else 1.0,
        "passed": worst < tolerance and checked == total,
    }
