"""Central finite-difference check of the MDN loss gradients."""

import numpy as np

from trajmdn.embedding import BasisConfig
from trajmdn.mdn import MdnConfig, MdnModel, sample_weights
from trajmdn.nn import ReLU

# Two-point central difference. The step shrinks towards MIN_STEP only while
# the stencil would straddle a ReLU or |w - mu| kink.
STEP = 1e-5
MIN_STEP = 1e-8
# Relative error is |a - n| / max(|a|, |n|, FLOOR); the floor keeps
# near-zero gradients (pure rounding noise in the difference quotient) from
# dominating the maximum.
FLOOR = 1e-6


def reduced_model(family, rng, input_dim=5, num_basis=2, num_components=3):
    cfg = MdnConfig(
        input_dim=input_dim,
        weight_dim=2 * num_basis,
        num_components=num_components,
        family=family,
        hidden=(8, 8),
        batch_norm=True,
        dropout_rate=0.0,
        dropout_after=(),
    )
    model = MdnModel(cfg, rng, basis=BasisConfig.with_default_scale(num_basis))
    for _, bn in model.batchnorm_layers():
        # frozen statistics that differ from the identity transform
        bn.running_mean = rng.normal(size=bn.running_mean.shape)
        bn.running_var = rng.uniform(0.5, 2.0, size=bn.running_var.shape)
        bn.params["gamma"][:] = rng.uniform(0.5, 1.5, size=bn.params["gamma"].shape)
        bn.params["beta"][:] = rng.normal(scale=0.1, size=bn.params["beta"].shape)
    for head in (model.alpha_head, model.mu_head, model.scale_head):
        # damped heads keep the initial scales near 1, as in a real run
        head.params["weight"] *= 0.2
        head.params["bias"][:] = rng.normal(scale=0.1, size=head.params["bias"].shape)
    return model


def fixture(model, rng, batch=4):
    """Features plus targets drawn from the model's own predicted mixtures."""
    phi = rng.uniform(0, 1, size=(batch, model.config.input_dim))
    w = np.stack([sample_weights(p, rng) for p in model.predict(phi)])
    return phi, w


def _kinks(model, w):
    """Signature of every non-differentiable point: ReLU masks and, for Laplace, signs of w - mu."""
    parts = [layer._mask.copy() for layer in model.trunk.layers if isinstance(layer, ReLU)]
    if model.config.family == "laplace":
        mu = model._cache[1]
        parts.append(np.sign(w[:, None, :] - mu))
    return parts


def _same(a, b):
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def _derivative(model, phi, w, flat, i):
    """Central difference, shrinking the step while it straddles a kink."""
    old = flat[i]
    model.loss_and_gradients(phi, w, train=False)
    base = _kinks(model, w)
    step = STEP
    while True:
        f = {}
        crossed = False
        for k in (-1, 1):
            flat[i] = old + k * step
            f[k], _ = model.loss_and_gradients(phi, w, train=False)
            crossed = crossed or not _same(base, _kinks(model, w))
        flat[i] = old
        if not crossed or step <= MIN_STEP:
            return (f[1] - f[-1]) / (2 * step)
        step /= 10


def max_relative_error(model, phi, w):
    """Worst relative error over every parameter element, batch norm frozen."""
    loss, grads = model.loss_and_gradients(phi, w, train=False)
    analytic = {k: g.copy() for k, g in grads.items()}
    worst = 0.0
    for name, p in model.parameters().items():
        flat = p.reshape(-1)
        for i in range(flat.size):
            numeric = _derivative(model, phi, w, flat, i)
            a = analytic[name].reshape(-1)[i]
            worst = max(worst, abs(a - numeric) / max(abs(a), abs(numeric), FLOOR))
    return worst
