"""Ladder network: clean encoder, corrupted encoder and denoising decoder.

Layer ``l`` runs ``z_l = batchnorm(h_{l-1} @ W_l)`` followed by
``h_l = relu(gamma_l * (z_l + beta_l))``, softmax on the top layer. The input
layer is batch-normalized without learned parameters. The corrupted pass adds
Gaussian noise after normalization; the decoder walks back down, mixing the
vertical signal with the corrupted lateral signal where a skip connection
exists.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .tensor import BN_EPS, ShapeError, as_matrix, matmul, sample_gaussian, softmax_rows

# identity on the lateral path: mu = 0, gain = 1
COMB_INIT = np.array([0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0])


@dataclass
class LadderConfig:
    layer_sizes: list
    noise_sigma: float = 0.5
    lambdas: list = None
    lateral_layers: tuple = (0,)

    def __post_init__(self):
        self.layer_sizes = [int(s) for s in self.layer_sizes]
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError(f"bad layer sizes {self.layer_sizes}")
        if self.lambdas is None:
            self.lambdas = default_lambdas(len(self.layer_sizes))
        self.lambdas = [float(x) for x in self.lambdas]
        if len(self.lambdas) != len(self.layer_sizes):
            raise ValueError(
                f"need {len(self.layer_sizes)} denoising weights, got {len(self.lambdas)}")
        if min(self.lambdas) < 0:
            raise ValueError("denoising weights must be non-negative")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        self.lateral_layers = tuple(sorted({int(l) for l in self.lateral_layers}))
        if any(l < 0 or l > self.depth for l in self.lateral_layers):
            raise ValueError(f"lateral layers {self.lateral_layers} outside 0..{self.depth}")

    @property
    def depth(self):
        return len(self.layer_sizes) - 1

    @property
    def n_outputs(self):
        return self.layer_sizes[-1]


def default_lambdas(n_layers):
    return [1.0, 1.0] + [0.3] * (n_layers - 2) if n_layers > 2 else [1.0] * n_layers


@dataclass
class LadderParams:
    """Learnable parameters. ``W[l-1]``/``V[l-1]`` belong to layer ``l``;
    ``gamma``/``beta`` likewise; ``comb[l]`` holds the (10, w_l)
    combinator coefficients of decoded layer ``l``."""

    W: list
    V: list
    gamma: list
    beta: list
    comb: list

    @classmethod
    def init(cls, config, rng):
        sizes = config.layer_sizes
        W, V, gamma, beta = [], [], [], []
        for l in range(1, len(sizes)):
            fan_in, fan_out = sizes[l - 1], sizes[l]
            W.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out)))
            V.append(rng.normal(0.0, 1.0 / np.sqrt(fan_out), size=(fan_out, fan_in)))
            gamma.append(np.ones(fan_out))
            beta.append(np.zeros(fan_out))
        comb = [np.tile(COMB_INIT[:, None], (1, w)) for w in sizes]
        return cls(W, V, gamma, beta, comb)

    @classmethod
    def zeros_like(cls, other):
        z = lambda arrs: [np.zeros_like(a) for a in arrs]
        return cls(z(other.W), z(other.V), z(other.gamma), z(other.beta), z(other.comb))

    def copy(self):
        c = lambda arrs: [a.copy() for a in arrs]
        return LadderParams(c(self.W), c(self.V), c(self.gamma), c(self.beta), c(self.comb))

    def groups(self):
        """Name -> array view, in a fixed order. Arrays are shared, not copied."""
        out = {}
        for l, (w, v, g, b) in enumerate(zip(self.W, self.V, self.gamma, self.beta), start=1):
            out[f"W{l}"] = w
            out[f"V{l}"] = v
            out[f"gamma{l}"] = g
            out[f"beta{l}"] = b
        for l, a in enumerate(self.comb):
            out[f"comb{l}"] = a
        return out

    def check_shapes(self, config):
        sizes = config.layer_sizes
        for l in range(1, len(sizes)):
            if self.W[l - 1].shape != (sizes[l - 1], sizes[l]):
                raise ShapeError(f"W{l} has shape {self.W[l - 1].shape}")
            if self.V[l - 1].shape != (sizes[l], sizes[l - 1]):
                raise ShapeError(f"V{l} has shape {self.V[l - 1].shape}")
        for l, w in enumerate(sizes):
            if self.comb[l].shape != (10, w):
                raise ShapeError(f"comb{l} has shape {self.comb[l].shape}")


@dataclass
class BatchNormState:
    running_mean: list
    running_var: list
    momentum: float = 0.99

    @classmethod
    def init(cls, config, momentum=0.99):
        return cls([np.zeros(w) for w in config.layer_sizes],
                   [np.ones(w) for w in config.layer_sizes], momentum)

    def copy(self):
        return BatchNormState([m.copy() for m in self.running_mean],
                              [v.copy() for v in self.running_var], self.momentum)

    def update(self, l, mean, var):
        m = self.momentum
        self.running_mean[l] = m * self.running_mean[l] + (1.0 - m) * mean
        self.running_var[l] = m * self.running_var[l] + (1.0 - m) * var


@dataclass
class ForwardTrace:
    """Per-layer values of one clean pass, one corrupted pass and one decoding
    pass. Lists are indexed by layer 0..L; slots that do not exist for a layer
    (e.g. ``act[0]``) hold None."""

    x: np.ndarray
    # clean encoder
    z: list = field(default_factory=list)
    mean: list = field(default_factory=list)
    var: list = field(default_factory=list)
    std: list = field(default_factory=list)
    act: list = field(default_factory=list)
    h: list = field(default_factory=list)
    y: np.ndarray = None
    # corrupted encoder
    noise: list = None
    z_norm_t: list = field(default_factory=list)
    std_t: list = field(default_factory=list)
    z_t: list = field(default_factory=list)
    act_t: list = field(default_factory=list)
    h_t: list = field(default_factory=list)
    y_t: np.ndarray = None
    # decoder
    u: list = None
    u_std: list = None
    z_hat: list = None
    z_hat_bn: list = None


def _standardize(p):
    mean = p.mean(axis=0)
    var = ((p - mean) ** 2).mean(axis=0)
    std = np.sqrt(var + BN_EPS)
    return (p - mean) / std, mean, var, std


def _activate(a, top):
    return softmax_rows(a) if top else np.maximum(a, 0.0)


def _check_input(config, X):
    X = as_matrix(X)
    if X.shape[1] != config.layer_sizes[0]:
        raise ShapeError(f"input has {X.shape[1]} columns, network expects {config.layer_sizes[0]}")
    return X


def clean_forward(params, config, X, bn=None, mode="train"):
    """Noise-free encoder pass.

    In train mode batch statistics normalize every layer and, when ``bn`` is
    given, update its running averages. Eval mode normalizes with the running
    averages instead.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be train or eval, got {mode!r}")
    X = _check_input(config, X)
    if mode == "eval" and bn is None:
        raise ValueError("eval mode needs batch-norm running statistics")
    tr = ForwardTrace(x=X)
    L = config.depth
    p = X
    for l in range(L + 1):
        if l > 0:
            p = matmul(tr.h[l - 1], params.W[l - 1])
        if mode == "train":
            z, mean, var, std = _standardize(p)
            if bn is not None:
                bn.update(l, mean, var)
        else:
            mean, var = bn.running_mean[l], bn.running_var[l]
            std = np.sqrt(var + BN_EPS)
            z = (p - mean) / std
        tr.z.append(z)
        tr.mean.append(mean)
        tr.var.append(var)
        tr.std.append(std)
        if l == 0:
            tr.act.append(None)
            tr.h.append(z)
        else:
            a = params.gamma[l - 1] * (z + params.beta[l - 1])
            tr.act.append(a)
            tr.h.append(_activate(a, l == L))
    tr.y = tr.h[L]
    return tr


def sample_noise(config, rows, rng):
    return [sample_gaussian(rng, rows, w, config.noise_sigma) for w in config.layer_sizes]


def noisy_forward(params, config, X, rng=None, noise=None, trace=None):
    """Corrupted encoder pass with its own batch statistics.

    Pass either ``rng`` (noise is drawn) or a pre-drawn ``noise`` list, which
    keeps the pass deterministic for finite differencing. Results are written
    into ``trace`` when given.
    """
    X = _check_input(config, X)
    if noise is None:
        if rng is None and config.noise_sigma > 0:
            raise ValueError("noisy_forward needs an rng or explicit noise")
        noise = sample_noise(config, X.shape[0], rng)
    tr = trace if trace is not None else ForwardTrace(x=X)
    tr.noise = noise
    tr.z_norm_t, tr.std_t, tr.z_t, tr.act_t, tr.h_t = [], [], [], [], []
    L = config.depth
    p = X
    for l in range(L + 1):
        if l > 0:
            p = matmul(tr.h_t[l - 1], params.W[l - 1])
        zn, _, _, std = _standardize(p)
        zt = zn + noise[l]
        tr.z_norm_t.append(zn)
        tr.std_t.append(std)
        tr.z_t.append(zt)
        if l == 0:
            tr.act_t.append(None)
            tr.h_t.append(zt)
        else:
            a = params.gamma[l - 1] * (zt + params.beta[l - 1])
            tr.act_t.append(a)
            tr.h_t.append(_activate(a, l == L))
    tr.y_t = tr.h_t[L]
    return tr


def combinator(z_tilde, u, coeffs):
    """Gaussian combinator; ``z_tilde=None`` means no lateral input."""
    return kernels.combinator_forward(z_tilde, u, coeffs)


def decode(params, config, trace):
    """Denoising pass. Needs clean statistics and the corrupted pass in ``trace``.

    Fills ``u``, ``z_hat`` and ``z_hat_bn`` (the reconstruction standardized
    with the clean pass's batch statistics).
    """
    if not trace.z_t or not trace.std:
        raise ValueError("decode needs both the clean and the corrupted pass")
    L = config.depth
    lateral = set(config.lateral_layers)
    u = [None] * (L + 1)
    u_std = [None] * (L + 1)
    z_hat = [None] * (L + 1)
    for l in range(L, -1, -1):
        if l == L:
            u[l] = trace.h_t[L]
        else:
            q = matmul(z_hat[l + 1], params.V[l])
            u[l], _, _, u_std[l] = _standardize(q)
        zt = trace.z_t[l] if l in lateral else None
        z_hat[l] = combinator(zt, u[l], params.comb[l])
    trace.u = u
    trace.u_std = u_std
    trace.z_hat = z_hat
    trace.z_hat_bn = [(z_hat[l] - trace.mean[l]) / trace.std[l] for l in range(L + 1)]
    return trace


def full_trace(params, config, X, rng=None, noise=None, bn=None):
    tr = clean_forward(params, config, X, bn=bn, mode="train")
    noisy_forward(params, config, X, rng=rng, noise=noise, trace=tr)
    return decode(params, config, tr)


def predict(params, config, X, bn):
    """Posterior rows over the k+1 outputs (last column = out-of-set)."""
    return clean_forward(params, config, X, bn=bn, mode="eval").y
