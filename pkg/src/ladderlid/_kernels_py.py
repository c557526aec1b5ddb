"""Pure numpy versions of the fused kernels in ``_kernels.pyx``.

Coefficient arrays have shape (10, width): rows 0-4 parametrize the mean
estimate, rows 5-9 the lateral gain.
"""

import numpy as np


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def combinator_forward(z_tilde, u, a):
    if z_tilde is None:
        return a[3] * u + a[4]
    mu = a[0] * _sigmoid(a[1] * u + a[2]) + a[3] * u + a[4]
    v = a[5] * _sigmoid(a[6] * u + a[7]) + a[8] * u + a[9]
    return (z_tilde - mu) * v + mu


def combinator_backward(z_tilde, u, a, g):
    """Returns (grad z_tilde or None, grad u, grad coefficients)."""
    ga = np.zeros_like(a)
    if z_tilde is None:
        ga[3] = (g * u).sum(axis=0)
        ga[4] = g.sum(axis=0)
        return None, g * a[3], ga
    s1 = _sigmoid(a[1] * u + a[2])
    s2 = _sigmoid(a[6] * u + a[7])
    mu = a[0] * s1 + a[3] * u + a[4]
    v = a[5] * s2 + a[8] * u + a[9]
    g_zt = g * v
    g_mu = g * (1.0 - v)
    g_v = g * (z_tilde - mu)
    d1 = s1 * (1.0 - s1)
    d2 = s2 * (1.0 - s2)
    ga[0] = (g_mu * s1).sum(axis=0)
    ga[1] = (g_mu * a[0] * d1 * u).sum(axis=0)
    ga[2] = (g_mu * a[0] * d1).sum(axis=0)
    ga[3] = (g_mu * u).sum(axis=0)
    ga[4] = g_mu.sum(axis=0)
    ga[5] = (g_v * s2).sum(axis=0)
    ga[6] = (g_v * a[5] * d2 * u).sum(axis=0)
    ga[7] = (g_v * a[5] * d2).sum(axis=0)
    ga[8] = (g_v * u).sum(axis=0)
    ga[9] = g_v.sum(axis=0)
    g_u = g_mu * (a[0] * d1 * a[1] + a[3]) + g_v * (a[5] * d2 * a[6] + a[8])
    return g_zt, g_u, ga


def bn_backward(g, z, std, g_mean=None, g_std=None):
    """Gradient wrt the raw input of z = (p - mean(p)) / std(p).

    ``g_mean`` and ``g_std`` carry extra upstream gradient on the batch
    statistics themselves, for when they are reused outside the layer.
    """
    rows = g.shape[0]
    tot_mean = -g.sum(axis=0) / std
    tot_std = -(g * z).sum(axis=0) / std
    if g_mean is not None:
        tot_mean = tot_mean + g_mean
    if g_std is not None:
        tot_std = tot_std + g_std
    return g / std + (tot_mean + tot_std * z) / rows
