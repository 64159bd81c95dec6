"""Layer primitives on top of the autodiff core: shared-MLP set encoder,
MLP heads, latent-space utilities."""

import numpy as np

from . import autodiff as ad

LOG_VAR_CLAMP = 10.0  # |log sigma^2| bound used by reparameterize


def init_linear(store, name, fan_in, fan_out, rng, std=None, bias=None):
    if std is None:
        std = np.sqrt(2.0 / fan_in)  # He init, relu layers
    store.add(f"{name}.W", rng.normal(0.0, std, size=(fan_in, fan_out)))
    store.add(f"{name}.b", np.zeros(fan_out) if bias is None
              else np.asarray(bias, dtype=float))


def linear(store, name, x):
    return ad.add(ad.matmul(x, store[f"{name}.W"]), store[f"{name}.b"])


def init_set_encoder(store, prefix, in_dim, widths, rng):
    d = in_dim
    for i, w in enumerate(widths):
        init_linear(store, f"{prefix}.mlp{i}", d, w, rng)
        d = w
    return d


def set_encoder(store, prefix, points, n_layers):
    """Shared per-point MLP + max pool: (..., N, C) -> (..., W).

    Permutation-invariant by construction of the pooling step.
    """
    h = ad.as_diff(points)
    for i in range(n_layers):
        h = ad.relu(linear(store, f"{prefix}.mlp{i}", h))
    return ad.max_pool_over_set(h)


def init_mlp_head(store, prefix, in_dim, widths, out_dim, rng, out_bias=None):
    d = in_dim
    for i, w in enumerate(widths):
        init_linear(store, f"{prefix}.fc{i}", d, w, rng)
        d = w
    init_linear(store, f"{prefix}.out", d, out_dim, rng, std=1e-3, bias=out_bias)


def mlp_head(store, prefix, x, n_hidden):
    h = ad.as_diff(x)
    for i in range(n_hidden):
        h = ad.relu(linear(store, f"{prefix}.fc{i}", h))
    return linear(store, f"{prefix}.out", h)


def kl_standard_normal(mu, log_var):
    """KL( N(mu, diag e^{log_var}) || N(0, I) ) summed over all elements.

    0.5 * sum(mu^2 + e^{log_var} - 1 - log_var); nonnegative, zero iff
    mu = 0 and log_var = 0.
    """
    mu = ad.as_diff(mu)
    log_var = ad.as_diff(log_var)
    term = ad.sub(ad.add(ad.mul(mu, mu), ad.exp(log_var)),
                  ad.add(log_var, ad.as_diff(1.0)))
    return ad.scale(ad.sum_all(term), 0.5)


def reparameterize(mu, log_var, noise):
    """Pathwise sample z = mu + e^{log_var/2} * noise, log_var clamped."""
    mu = ad.as_diff(mu)
    log_var = ad.clip(ad.as_diff(log_var), -LOG_VAR_CLAMP, LOG_VAR_CLAMP)
    std = ad.exp(ad.scale(log_var, 0.5))
    return ad.add(mu, ad.mul(std, ad.as_diff(np.asarray(noise, dtype=float))))
