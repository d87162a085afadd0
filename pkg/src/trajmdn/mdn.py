"""Mixture density network over trajectory weight vectors.

The trunk is five 500-unit ReLU layers with batch normalisation after the
first and dropout after the second to fourth. Three linear heads produce the
component logits (softmax), the means, and the log-scales (exponential plus a
small floor). Components are diagonal Normal or Laplace distributions.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .embedding import BasisConfig, RidgeConfig
from .nn import Adam, BatchNorm, Dense, Dropout, ReLU, Sequential, logsumexp, softmax
from .similarity import KernelConfig

FORMAT_VERSION = 1
FAMILIES = ("normal", "laplace")
LOG_2PI = math.log(2.0 * math.pi)


class TrainingError(RuntimeError):
    """Training hit a non-finite loss."""


class ModelFormatError(ValueError):
    """A model file is malformed, truncated, or of an unknown version."""


@dataclass(frozen=True)
class MdnConfig:
    input_dim: int
    weight_dim: int
    num_components: int = 4
    family: str = "normal"
    hidden: tuple = (500, 500, 500, 500, 500)
    batch_norm: bool = True
    dropout_rate: float = 0.25
    dropout_after: tuple = (2, 3, 4)

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "dropout_after", tuple(int(i) for i in self.dropout_after))
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.input_dim < 1 or self.num_components < 1 or not self.hidden:
            raise ValueError("input_dim, num_components and hidden must be positive/non-empty")
        if self.weight_dim < 2 or self.weight_dim % 2:
            raise ValueError("weight_dim must be a positive even number")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must lie in [0, 1)")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    scale_floor: float = 1e-6

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if not self.scale_floor > 0:
            raise ValueError("scale_floor must be positive")


@dataclass
class MixtureParams:
    alpha: np.ndarray  # (Q,)
    mu: np.ndarray  # (Q, D)
    scale: np.ndarray  # (Q, D)
    family: str = "normal"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.scale = np.asarray(self.scale, dtype=np.float64)
        q = len(self.alpha)
        if self.mu.ndim != 2 or self.mu.shape[0] != q or self.scale.shape != self.mu.shape:
            raise ValueError("inconsistent mixture parameter shapes")
        if np.any(self.alpha < 0) or abs(self.alpha.sum() - 1.0) > 1e-9:
            raise ValueError("component weights must lie on the simplex")
        if not np.all(self.scale > 0):
            raise ValueError("scales must be strictly positive")

    @property
    def num_components(self) -> int:
        return len(self.alpha)


# ----------------------------------------------------------------------------
# densities and loss


def _component_log_densities(family, w, mu, scale):
    """Per-component log densities, ``w`` (B, D), ``mu``/``scale`` (B, Q, D) -> (B, Q)."""
    diff = w[:, None, :] - mu
    if family == "normal":
        return np.sum(-0.5 * LOG_2PI - np.log(scale) - 0.5 * (diff / scale) ** 2, axis=-1)
    if family == "laplace":
        return np.sum(-np.log(2.0 * scale) - np.abs(diff) / scale, axis=-1)
    raise ValueError(f"unknown family {family!r}")


def component_log_density(family: str, w, mu, scale) -> float:
    """Log density of one diagonal component at ``w``."""
    scale = np.asarray(scale, dtype=np.float64)
    if not np.all(scale > 0):
        raise ValueError("scales must be strictly positive")
    w = np.atleast_1d(np.asarray(w, dtype=np.float64))
    mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
    return float(_component_log_densities(family, w[None], mu[None, None], np.atleast_1d(scale)[None, None])[0, 0])


def _mixture_nll(family, alpha, mu, scale, w):
    """Per-sample negative log likelihood and component responsibilities."""
    with np.errstate(divide="ignore"):
        log_alpha = np.log(alpha)
    lp = log_alpha + _component_log_densities(family, w, mu, scale)
    ll = logsumexp(lp, axis=-1)
    resp = np.exp(lp - ll[:, None])
    return -ll, resp


def nll_loss(params_batch: Sequence[MixtureParams], w_batch) -> float:
    """Mean negative log likelihood of ``w_batch`` under aligned mixture parameters."""
    if len(params_batch) == 0:
        raise ValueError("empty batch")
    if len(params_batch) != len(w_batch):
        raise ValueError("parameter and target batches are not aligned")
    alpha = np.stack([p.alpha for p in params_batch])
    mu = np.stack([p.mu for p in params_batch])
    scale = np.stack([p.scale for p in params_batch])
    families = {p.family for p in params_batch}
    if len(families) != 1:
        raise ValueError("mixed distribution families in one batch")
    w = np.asarray(w_batch, dtype=np.float64).reshape(len(params_batch), -1)
    nll, _ = _mixture_nll(families.pop(), alpha, mu, scale, w)
    return float(nll.mean())


# ----------------------------------------------------------------------------
# network


def _build_trunk(cfg: MdnConfig, rng):
    layers, names = [], []
    width = cfg.input_dim
    for i, h in enumerate(cfg.hidden, start=1):
        layers += [Dense(width, h, rng), ReLU()]
        names += [f"hidden{i}", None]
        if i == 1 and cfg.batch_norm:
            layers.append(BatchNorm(h))
            names.append("batchnorm1")
        if i in cfg.dropout_after:
            layers.append(Dropout(cfg.dropout_rate))
            names.append(None)
        width = h
    return Sequential(layers), names


class MdnModel:
    """Network weights plus everything needed to answer a map query."""

    def __init__(
        self,
        config: MdnConfig,
        rng=None,
        *,
        basis: BasisConfig = BasisConfig(),
        ridge: RidgeConfig = RidgeConfig(),
        kernel: KernelConfig = KernelConfig(),
        training_maps: Sequence = (),
        training_map_ids: Sequence = (),
        scale_floor: float = 1e-6,
        train_config: TrainConfig | None = None,
    ):
        self.config = config
        self.basis = basis
        self.ridge = ridge
        self.kernel = kernel
        self.training_maps = [np.asarray(m, dtype=np.float64).reshape(-1, 2) for m in training_maps]
        self.training_map_ids = [str(i) for i in training_map_ids] or [str(i) for i in range(len(self.training_maps))]
        self.scale_floor = float(scale_floor)
        self.train_config = train_config
        self.loss_history: list[float] = []
        self.trunk, self._names = _build_trunk(config, rng)
        width, q, d = config.hidden[-1], config.num_components, config.weight_dim
        self.mu_head = Dense(width, q * d, rng)
        self.scale_head = Dense(width, q * d, rng)
        self.alpha_head = Dense(width, q, rng)

    # named views on the live parameter arrays
    def named_layers(self):
        for name, layer in zip(self._names, self.trunk.layers):
            if name is not None:
                yield name, layer
        yield "mu_head", self.mu_head
        yield "scale_head", self.scale_head
        yield "alpha_head", self.alpha_head

    def parameters(self) -> dict:
        return {f"{n}.{k}": v for n, layer in self.named_layers() for k, v in layer.params.items()}

    def gradients(self) -> dict:
        return {f"{n}.{k}": v for n, layer in self.named_layers() for k, v in layer.grads.items()}

    def batchnorm_layers(self):
        return [(n, layer) for n, layer in self.named_layers() if isinstance(layer, BatchNorm)]

    # forward / backward on batches
    def _forward(self, phi, train, rng):
        phi = np.asarray(phi, dtype=np.float64)
        if phi.ndim != 2 or phi.shape[1] != self.config.input_dim:
            raise ValueError(f"feature has shape {phi.shape}, expected (B, {self.config.input_dim})")
        h = self.trunk.forward(phi, train=train, rng=rng)
        b, q, d = len(phi), self.config.num_components, self.config.weight_dim
        logits = self.alpha_head.forward(h)
        mu = self.mu_head.forward(h).reshape(b, q, d)
        zscale = self.scale_head.forward(h).reshape(b, q, d)
        escale = np.exp(zscale)
        alpha = softmax(logits)
        scale = escale + self.scale_floor
        if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(mu)) and np.all(np.isfinite(scale))):
            raise FloatingPointError("non-finite network output")
        self._cache = (alpha, mu, escale, scale)
        return alpha, mu, scale

    def _backward(self, w):
        """Gradients of the mean NLL for the last ``_forward`` call."""
        alpha, mu, escale, scale = self._cache
        fam = self.config.family
        b = len(w)
        nll, resp = _mixture_nll(fam, alpha, mu, scale, w)
        diff = w[:, None, :] - mu
        if fam == "normal":
            dlog_dmu = diff / scale**2
            dlog_dscale = -1.0 / scale + diff**2 / scale**3
        else:
            dlog_dmu = np.sign(diff) / scale
            dlog_dscale = -1.0 / scale + np.abs(diff) / scale**2
        r = resp[:, :, None] / b
        g_mu = (-r * dlog_dmu).reshape(b, -1)
        g_zscale = (-r * dlog_dscale * escale).reshape(b, -1)
        g_logits = -(resp - alpha) / b
        gh = self.mu_head.backward(g_mu) + self.scale_head.backward(g_zscale) + self.alpha_head.backward(g_logits)
        self.trunk.backward(gh)
        return float(nll.mean())

    def loss_and_gradients(self, phi, w, train=False, rng=None):
        w = np.asarray(w, dtype=np.float64).reshape(len(phi), -1)
        self._forward(phi, train, rng)
        loss = self._backward(w)
        return loss, self.gradients()

    def predict(self, phi) -> list[MixtureParams]:
        alpha, mu, scale = self._forward(np.atleast_2d(phi), False, None)
        return [MixtureParams(a, m, s, self.config.family) for a, m, s in zip(alpha, mu, scale)]


def forward(model: MdnModel, phi, mode: str = "eval", rng=None) -> MixtureParams:
    """Mixture parameters for one similarity feature."""
    if mode not in ("train", "eval"):
        raise ValueError("mode must be 'train' or 'eval'")
    values = getattr(phi, "values", phi)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or len(values) != model.config.input_dim:
        raise ValueError(f"feature length {values.shape} does not match input_dim {model.config.input_dim}")
    alpha, mu, scale = model._forward(values[None], mode == "train", rng)
    return MixtureParams(alpha[0], mu[0], scale[0], model.config.family)


# ----------------------------------------------------------------------------
# training


def _init_heads_from_data(model: MdnModel, targets: np.ndarray):
    # Start every component at the data mean with the data spread; the random
    # head weights break the symmetry between components.
    q = model.config.num_components
    mean = targets.mean(axis=0)
    std = targets.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    if model.config.family == "laplace":
        std = std / math.sqrt(2.0)
    model.mu_head.params["bias"][:] = np.tile(mean, q)
    model.scale_head.params["bias"][:] = np.tile(np.log(std), q)


def _settle_batchnorm(model: MdnModel, phis: np.ndarray):
    # The momentum-0.9 running averages only remember the last few dozen
    # batches, which left eval-mode outputs for some maps far off. Replace them
    # with the exact statistics over every training pair.
    x = phis
    for layer in model.trunk.layers:
        if isinstance(layer, BatchNorm):
            layer.running_mean = x.mean(axis=0)
            layer.running_var = x.var(axis=0)
        x = layer.forward(x, train=False)


def train(
    dataset,
    mdn_cfg: MdnConfig,
    train_cfg: TrainConfig = TrainConfig(),
    *,
    basis: BasisConfig = BasisConfig(),
    ridge: RidgeConfig = RidgeConfig(),
    kernel: KernelConfig = KernelConfig(),
    training_maps: Sequence = (),
    training_map_ids: Sequence = (),
    callback=None,
) -> MdnModel:
    """Fit an MDN on ``[(phi_n, [w_n1, w_n2, ...]), ...]`` by mini-batch Adam.

    ``callback(epoch, mean_loss)`` is called after every epoch. Raises
    :class:`TrainingError` when a batch loss becomes non-finite. Batch-norm
    running statistics of the returned model are computed over the whole
    training set.
    """
    phis, targets = [], []
    for phi, ws in dataset:
        values = np.asarray(getattr(phi, "values", phi), dtype=np.float64)
        for w in ws:
            phis.append(values)
            targets.append(np.asarray(w, dtype=np.float64))
    if not phis:
        raise ValueError("empty dataset")
    phis = np.stack(phis)
    targets = np.stack(targets)
    if phis.shape[1] != mdn_cfg.input_dim or targets.shape[1] != mdn_cfg.weight_dim:
        raise ValueError("dataset dimensions do not match the network configuration")

    rng = np.random.default_rng(train_cfg.seed)
    model = MdnModel(
        mdn_cfg,
        rng,
        basis=basis,
        ridge=ridge,
        kernel=kernel,
        training_maps=training_maps,
        training_map_ids=training_map_ids,
        scale_floor=train_cfg.scale_floor,
        train_config=train_cfg,
    )
    _init_heads_from_data(model, targets)
    params = model.parameters()
    opt = Adam(params, train_cfg.learning_rate, train_cfg.beta1, train_cfg.beta2, train_cfg.adam_eps)
    n = len(phis)
    for epoch in range(train_cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, train_cfg.batch_size):
            idx = order[start : start + train_cfg.batch_size]
            try:
                loss, grads = model.loss_and_gradients(phis[idx], targets[idx], train=True, rng=rng)
            except FloatingPointError as exc:
                raise TrainingError(f"epoch {epoch + 1}: {exc}") from None
            if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise TrainingError(f"epoch {epoch + 1}: non-finite loss {loss!r} at batch starting {start}")
            opt.step(grads)
            total += loss * len(idx)
        model.loss_history.append(total / n)
        if callback is not None:
            callback(epoch + 1, total / n)
    _settle_batchnorm(model, phis)
    return model


def mean_nll(model: MdnModel, dataset) -> float:
    """Eval-mode mean NLL over every (feature, weight) pair."""
    phis, targets = [], []
    for phi, ws in dataset:
        for w in ws:
            phis.append(np.asarray(getattr(phi, "values", phi), dtype=np.float64))
            targets.append(np.asarray(w, dtype=np.float64))
    alpha, mu, scale = model._forward(np.stack(phis), False, None)
    nll, _ = _mixture_nll(model.config.family, alpha, mu, scale, np.stack(targets))
    return float(nll.mean())


# ----------------------------------------------------------------------------
# sampling


def sample_component(alpha, rng) -> int:
    cdf = np.cumsum(alpha)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), len(alpha) - 1))


def sample_weights(params: MixtureParams, rng) -> np.ndarray:
    """One draw of ``w``: pick a component, then sample each element independently."""
    q = sample_component(params.alpha, rng)
    mu, scale = params.mu[q], params.scale[q]
    if params.family == "normal":
        return mu + scale * rng.standard_normal(len(mu))
    if params.family == "laplace":
        # inverse CDF; u in (0, 1)
        u = np.maximum(rng.random(len(mu)), np.finfo(np.float64).tiny)
        return np.where(u < 0.5, mu + scale * np.log(2.0 * u), mu - scale * np.log(2.0 * (1.0 - u)))
    raise ValueError(f"unknown family {params.family!r}")


# ----------------------------------------------------------------------------
# persistence


def _model_document(model: MdnModel) -> dict:
    layers = {}
    running = {}
    for name, layer in model.named_layers():
        layers[name] = {k: v.tolist() for k, v in layer.params.items()}
        if isinstance(layer, BatchNorm):
            running[name] = {
                "running_mean": layer.running_mean.tolist(),
                "running_var": layer.running_var.tolist(),
                "momentum": layer.momentum,
                "eps": layer.eps,
            }
    cfg = asdict(model.config)
    return {
        "format_version": FORMAT_VERSION,
        "mdn_config": {k: list(v) if isinstance(v, tuple) else v for k, v in cfg.items()},
        "train_config_echo": asdict(model.train_config) if model.train_config else None,
        "scale_floor": model.scale_floor,
        "basis_config": asdict(model.basis),
        "ridge_config": asdict(model.ridge),
        "kernel_config": asdict(model.kernel),
        "training_map_ids": model.training_map_ids,
        "training_map_pointsets": [m.tolist() for m in model.training_maps],
        "loss_history": model.loss_history,
        "layers": layers,
        "batch_norm_running_stats": running,
    }


def save_model(model: MdnModel, path: str | os.PathLike) -> None:
    """Write the model as JSON; floats are written with round-trip precision."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_model_document(model), fh, separators=(",", ":"), allow_nan=False)
        fh.write("\n")


def _array(value, shape, what):
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != shape:
        raise ModelFormatError(f"{what}: shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelFormatError(f"{what}: non-finite values")
    return arr


def load_model(path: str | os.PathLike) -> MdnModel:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: malformed model file ({exc})") from None
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{path}: model file must hold a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported format_version {version!r}")
    try:
        cfg = MdnConfig(**doc["mdn_config"])
        tc = doc.get("train_config_echo")
        model = MdnModel(
            cfg,
            None,
            basis=BasisConfig(**doc["basis_config"]),
            ridge=RidgeConfig(**doc["ridge_config"]),
            kernel=KernelConfig(**doc["kernel_config"]),
            training_maps=[np.asarray(m, dtype=np.float64).reshape(-1, 2) for m in doc["training_map_pointsets"]],
            training_map_ids=doc["training_map_ids"],
            scale_floor=doc["scale_floor"],
            train_config=TrainConfig(**tc) if tc else None,
        )
        model.loss_history = [float(x) for x in doc.get("loss_history", [])]
        layers = doc["layers"]
        running = doc["batch_norm_running_stats"]
        for name, layer in model.named_layers():
            stored = layers[name]
            if set(stored) != set(layer.params):
                raise ModelFormatError(f"{name}: parameter names {sorted(stored)} do not match")
            for k, v in layer.params.items():
                layer.params[k] = _array(stored[k], v.shape, f"{name}.{k}")
            if isinstance(layer, BatchNorm):
                stats = running[name]
                layer.running_mean = _array(stats["running_mean"], layer.running_mean.shape, f"{name}.running_mean")
                layer.running_var = _array(stats["running_var"], layer.running_var.shape, f"{name}.running_var")
                layer.momentum = float(stats["momentum"])
                layer.eps = float(stats["eps"])
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: missing or invalid field {exc}") from None
    if len(model.training_maps) not in (0, cfg.input_dim):
        raise ModelFormatError(f"{path}: {len(model.training_maps)} training maps for input_dim {cfg.input_dim}")
    return model
