"""Training costs and their gradients with respect to network outputs.

All costs are row averages. Logs are clamped at ``LOG_FLOOR`` so confident
wrong outputs give large finite values instead of inf; the gradient is zero
below the clamp.
"""

from dataclasses import dataclass

import numpy as np

LOG_FLOOR = 1e-30


@dataclass
class CostBreakdown:
    c1: float
    c2: float
    cd_per_layer: list
    alpha: float
    total: float
    c_ent: float = None
    entropy_weight: float = 0.0

    @property
    def cd_total(self):
        return float(sum(self.cd_per_layer))

    def as_dict(self):
        return {"c1": self.c1, "c2": self.c2, "cd_per_layer": list(self.cd_per_layer),
                "cd_total": self.cd_total, "c_ent": self.c_ent, "alpha": self.alpha,
                "entropy_weight": self.entropy_weight, "total": self.total}


def _clamped_log(p):
    return np.log(np.maximum(p, LOG_FLOOR))


def _check_labels(y, labels):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (y.shape[0],):
        raise ValueError(f"{labels.shape[0]} labels for {y.shape[0]} rows")
    n_inset = y.shape[1] - 1
    if labels.size and (labels.min() < 0 or labels.max() >= n_inset):
        raise ValueError(f"labels must lie in [0, {n_inset}), got range "
                         f"[{labels.min()}, {labels.max()}]")
    return labels


def denoising_cost(z, z_hat, lambdas):
    """Per-layer weighted reconstruction error (lambda_l / w_l) * mean_t ||z - z_hat||^2."""
    if not (len(z) == len(z_hat) == len(lambdas)):
        raise ValueError("need one target, reconstruction and weight per layer")
    out = []
    for l, (a, b, lam) in enumerate(zip(z, z_hat, lambdas)):
        if a.shape != b.shape:
            raise ValueError(f"layer {l}: target {a.shape} vs reconstruction {b.shape}")
        m, w = a.shape
        out.append(float(lam) * float(((a - b) ** 2).sum()) / (w * m) if m else 0.0)
    return out


def denoising_grad(z, z_hat, lam):
    """d C_d^(l) / d z_hat for one layer; the target receives the negative."""
    m, w = z.shape
    return (2.0 * lam / (w * m)) * (z_hat - z)


def supervised_cost(y, labels):
    """Mean negative log posterior of the correct in-set class."""
    labels = _check_labels(y, labels)
    if labels.size == 0:
        return 0.0
    return float(-_clamped_log(y[np.arange(labels.size), labels]).mean())


def supervised_grad(y, labels):
    labels = _check_labels(y, labels)
    g = np.zeros_like(y)
    if labels.size == 0:
        return g
    rows = np.arange(labels.size)
    p = y[rows, labels]
    g[rows, labels] = np.where(p > LOG_FLOOR, -1.0 / (labels.size * np.maximum(p, LOG_FLOOR)), 0.0)
    return g


def label_prior(k, p_oos):
    return np.append(np.full(k, (1.0 - p_oos) / k), p_oos)


def _check_balance(y, k, p_oos):
    if y.shape[0] == 0:
        raise ValueError("balance cost needs at least one row")
    if y.shape[1] != k + 1:
        raise ValueError(f"posteriors have {y.shape[1]} columns, expected k+1 = {k + 1}")
    if not 0.0 <= p_oos <= 1.0:
        raise ValueError(f"p_oos must lie in [0, 1], got {p_oos}")


def balance_cost(y, k, p_oos):
    """Cross-entropy between the assumed label prior and the batch-averaged posterior."""
    _check_balance(y, k, p_oos)
    p_av = y.mean(axis=0)
    return float(-(label_prior(k, p_oos) * _clamped_log(p_av)).sum())


def balance_grad(y, k, p_oos):
    _check_balance(y, k, p_oos)
    m = y.shape[0]
    p_av = y.mean(axis=0)
    col = np.where(p_av > LOG_FLOOR,
                   -label_prior(k, p_oos) / (m * np.maximum(p_av, LOG_FLOOR)), 0.0)
    return np.broadcast_to(col, y.shape).copy()


def entropy_cost(y):
    if y.shape[0] == 0:
        return 0.0
    return float(-(y * _clamped_log(y)).sum(axis=1).mean())


def entropy_grad(y):
    if y.shape[0] == 0:
        return np.zeros_like(y)
    return -(_clamped_log(y) + 1.0) / y.shape[0]


def total_cost(c1, c2, cd_per_layer, alpha, c_ent=None, entropy_weight=0.0):
    """Combine component costs. The denoising terms already carry their layer
    weights; the supervised term has weight 1."""
    total = c1 + alpha * c2 + sum(cd_per_layer)
    if c_ent is not None and entropy_weight:
        total += entropy_weight * c_ent
    return CostBreakdown(c1=float(c1), c2=float(c2), cd_per_layer=[float(c) for c in cd_per_layer],
                         alpha=float(alpha), total=float(total), c_ent=c_ent,
                         entropy_weight=float(entropy_weight))
