"""Per-threshold CDF regression with small ReLU networks.

One fully connected network per grid threshold maps covariates to
P(y <= t_k).  Forward pass, backprop, and the Adam optimizer are written
out in numpy: the networks are small (a few thousand weights), training is
full batch by default, and having the gradients in the open keeps them
checkable against finite differences.

Default head is a sigmoid trained with binary cross entropy on the 0/1
indicator targets; a squared-loss head on linear outputs (clipped to [0, 1]
at prediction) is available as the secondary mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import CdfEstimate, IndicatorMatrix, Sample


class FitDivergedError(RuntimeError):
    """Training loss became non-finite; carries the offending threshold."""

    def __init__(self, message, threshold=None):
        super().__init__(message)
        self.threshold = threshold


@dataclass(frozen=True)
class MlpArchitecture:
    """Input width and hidden layer widths of the per-threshold network."""

    input_dim: int
    hidden: tuple = (64, 64)

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        hidden = tuple(int(h) for h in self.hidden)
        if not hidden or any(h < 1 for h in hidden):
            raise ValueError("hidden must be a nonempty tuple of positive widths")
        object.__setattr__(self, "hidden", hidden)

    @property
    def layer_dims(self):
        return (self.input_dim,) + self.hidden + (1,)

    @property
    def param_count(self) -> int:
        dims = self.layer_dims
        return sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(dims) - 1))


@dataclass(frozen=True)
class TrainConfig:
    """Adam hyperparameters and training-loop controls."""

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 1000
    batch_size: Optional[int] = None  # None = full batch
    loss: str = "bce"  # "bce" or "squared"
    seed: int = 0
    standardize: bool = False

    def __post_init__(self):
        if self.lr <= 0 or self.epochs < 1:
            raise ValueError("lr must be positive and epochs >= 1")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.loss not in ("bce", "squared"):
            raise ValueError("loss must be 'bce' or 'squared'")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive when given")


def init_params(arch: MlpArchitecture, rng: np.random.Generator):
    """He-uniform weights (limit sqrt(6 / fan_in)), zero biases."""
    params = []
    dims = arch.layer_dims
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        limit = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        b = np.zeros(fan_out)
        params.append((w, b))
    return params


def _forward_cached(params, x):
    """Hidden activations kept for backprop; returns (final linear out, caches)."""
    acts = [x]
    pre = []
    a = x
    for i, (w, b) in enumerate(params):
        z = a @ w + b
        pre.append(z)
        if i < len(params) - 1:
            a = np.maximum(z, 0.0)  # ReLU; derivative at 0 taken as 0
            acts.append(a)
    return pre[-1][:, 0], acts, pre


def forward(params, x, loss: str = "bce"):
    """Network output for inputs x (n, d): probabilities for the bce head,
    [0, 1]-clipped linear output for the squared head."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out, _, _ = _forward_cached(params, x)
    if loss == "bce":
        return _sigmoid(out)
    return np.clip(out, 0.0, 1.0)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def loss_and_grads(params, x, targets, loss: str = "bce"):
    """Mean loss over the batch and its gradient for every weight tensor.

    bce uses the numerically stable logit form softplus(z) - y z; squared is
    the plain mean squared error on the linear output.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(targets, dtype=float)
    n = x.shape[0]
    z, acts, pre = _forward_cached(params, x)
    if loss == "bce":
        value = float(np.mean(np.logaddexp(0.0, z) - y * z))
        dz = (_sigmoid(z) - y) / n
    elif loss == "squared":
        value = float(np.mean((z - y) ** 2))
        dz = 2.0 * (z - y) / n
    else:
        raise ValueError("loss must be 'bce' or 'squared'")

    grads = [None] * len(params)
    delta = dz[:, None]
    for i in range(len(params) - 1, -1, -1):
        w, _ = params[i]
        a_prev = acts[i]
        grads[i] = (a_prev.T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = (delta @ w.T) * (pre[i - 1] > 0)
    return value, grads


def _adam_init(params):
    return [(np.zeros_like(w), np.zeros_like(w), np.zeros_like(b), np.zeros_like(b))
            for w, b in params]


def _adam_step(params, grads, state, t, cfg: TrainConfig):
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_params = []
    for (w, b), (gw, gb), (mw, vw, mb, vb) in zip(params, grads, state):
        mw *= b1
        mw += (1 - b1) * gw
        vw *= b2
        vw += (1 - b2) * gw * gw
        mb *= b1
        mb += (1 - b1) * gb
        vb *= b2
        vb += (1 - b2) * gb * gb
        w = w - cfg.lr * (mw / c1) / (np.sqrt(vw / c2) + cfg.eps)
        b = b - cfg.lr * (mb / c1) / (np.sqrt(vb / c2) + cfg.eps)
        new_params.append((w, b))
    return new_params


def train_network(x, targets, arch: MlpArchitecture, cfg: TrainConfig,
                  init=None, rng: Optional[np.random.Generator] = None):
    """Train one network; returns (params, per-epoch loss array).

    init warm-starts from existing parameters (copied, Adam state fresh).
    rng drives initialization and minibatch shuffling; defaults to a
    generator seeded from cfg.seed.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(targets, dtype=float)
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed]))
    if init is None:
        params = init_params(arch, rng)
    else:
        params = [(w.copy(), b.copy()) for w, b in init]
    state = _adam_init(params)
    n = x.shape[0]
    batch = n if cfg.batch_size is None else min(cfg.batch_size, n)
    curve = np.empty(cfg.epochs)
    t = 0
    for epoch in range(cfg.epochs):
        if batch == n:
            value, grads = loss_and_grads(params, x, y, cfg.loss)
            if not np.isfinite(value):
                raise FitDivergedError(f"loss diverged at epoch {epoch}")
            t += 1
            params = _adam_step(params, grads, state, t, cfg)
            curve[epoch] = value
        else:
            perm = rng.permutation(n)
            epoch_loss = 0.0
            for start in range(0, n, batch):
                idx = perm[start:start + batch]
                value, grads = loss_and_grads(params, x[idx], y[idx], cfg.loss)
                if not np.isfinite(value):
                    raise FitDivergedError(f"loss diverged at epoch {epoch}")
                t += 1
                params = _adam_step(params, grads, state, t, cfg)
                epoch_loss += value * idx.size
            curve[epoch] = epoch_loss / n
    return params, curve


@dataclass(frozen=True)
class NetFit:
    """Trained per-threshold networks plus fitted values on the train rows."""

    estimate: CdfEstimate
    params: list
    arch: MlpArchitecture
    config: TrainConfig
    final_losses: np.ndarray
    x_mean: Optional[np.ndarray] = None
    x_scale: Optional[np.ndarray] = None
    curves: list = field(default_factory=list)


def _apply_standardize(x, mean, scale):
    return (x - mean) / scale


def fit_relu(sample: Sample, ind: IndicatorMatrix,
             arch: Optional[MlpArchitecture] = None,
             config: Optional[TrainConfig] = None,
             warm_start: bool = True) -> NetFit:
    """Fit one network per grid threshold on the sample's covariates.

    warm_start initializes each threshold's network from the previous
    threshold's trained weights (fresh Adam state), which saves epochs when
    the CDF surface moves slowly along the grid; the first threshold (and
    every threshold when warm_start=False) draws a fresh He initialization
    from a seed derived per threshold, so runs are reproducible either way.
    """
    if sample.x is None:
        raise ValueError("fit_relu needs covariates: sample.x is None")
    if config is None:
        config = TrainConfig()
    x = sample.x
    if arch is None:
        arch = MlpArchitecture(input_dim=x.shape[1])
    if arch.input_dim != x.shape[1]:
        raise ValueError("architecture input_dim does not match covariates")
    x_mean = x_scale = None
    if config.standardize:
        x_mean = x.mean(axis=0)
        x_scale = x.std(axis=0)
        x_scale = np.where(x_scale > 0, x_scale, 1.0)
        x = _apply_standardize(x, x_mean, x_scale)
    n, m = ind.w.shape
    fitted = np.empty((n, m))
    all_params = []
    curves = []
    final_losses = np.empty(m)
    prev = None
    for k in range(m):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, k]))
        init = prev if (warm_start and prev is not None) else None
        try:
            params, curve = train_network(x, ind.w[:, k], arch, config,
                                          init=init, rng=rng)
        except FitDivergedError as err:
            raise FitDivergedError(
                f"threshold {k} (t={ind.grid.points[k]:.6g}): {err}",
                threshold=k) from err
        fitted[:, k] = forward(params, x, config.loss)
        all_params.append(params)
        curves.append(curve)
        final_losses[k] = curve[-1]
        prev = params
    est = CdfEstimate(fitted, ind.grid, raw=False,
                      meta={"estimator": "relunet", "loss": config.loss,
                            "warm_start": warm_start})
    return NetFit(est, all_params, arch, config, final_losses,
                  x_mean=x_mean, x_scale=x_scale, curves=curves)


def predict_relu(fit: NetFit, x_query) -> CdfEstimate:
    """Evaluate the trained networks at new covariate rows."""
    x = np.atleast_2d(np.asarray(x_query, dtype=float))
    if x.shape[1] != fit.arch.input_dim:
        raise ValueError("query covariates have the wrong width")
    if fit.x_mean is not None:
        x = _apply_standardize(x, fit.x_mean, fit.x_scale)
    vals = np.empty((x.shape[0], len(fit.params)))
    for k, params in enumerate(fit.params):
        vals[:, k] = forward(params, x, fit.config.loss)
    est = fit.estimate
    return CdfEstimate(vals, est.grid, raw=False,
                       meta=dict(est.meta, predicted="network"))
