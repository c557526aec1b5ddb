"""Backpropagation through the clean pass, the corrupted pass and the decoder;
Adam updates; mixed labeled/unlabeled batching; finite-difference checking."""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .ladder import BatchNormState, LadderParams, clean_forward, decode, noisy_forward, sample_noise
from .objective import (balance_cost, balance_grad, denoising_cost, denoising_grad, entropy_cost,
                        entropy_grad, supervised_cost, supervised_grad, total_cost)

log = logging.getLogger(__name__)


class NumericalError(RuntimeError):
    pass


@dataclass
class Objective:
    alpha: float = 0.15
    p_oos: float = 0.23
    entropy_weight: float = 0.0
    entropy_on: str = "noisy"
    c2_on: str = "noisy"

    def __post_init__(self):
        for name in ("entropy_on", "c2_on"):
            if getattr(self, name) not in ("noisy", "clean"):
                raise ValueError(f"{name} must be 'noisy' or 'clean'")


@dataclass
class Batch:
    """Labeled rows come first: ``X[:n_labeled]`` pairs with ``labels``."""

    X: np.ndarray
    labels: np.ndarray
    ids: np.ndarray = None

    @property
    def n_labeled(self):
        return len(self.labels)

    @property
    def n_unlabeled(self):
        return self.X.shape[0] - len(self.labels)


@dataclass
class TrainSchedule:
    epochs: int = 1000
    batch_size: int = 1024
    shuffle_seed: int = 0
    seed: int = 0
    policy: str = "proportional"
    labeled_per_batch: int = 0
    learning_rate: float = 0.002
    patience: int = 0
    bn_momentum: float = 0.99

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2 for batch normalization")
        if self.policy not in ("proportional", "fixed-count"):
            raise ValueError(f"unknown batch policy {self.policy!r}")


def _softmax_backward(y, g):
    return y * (g - (g * y).sum(axis=1, keepdims=True))


def forward_costs(params, config, batch, objective, rng=None, noise=None, bn=None):
    """Run all three passes on ``batch`` and evaluate the combined cost."""
    X = batch.X
    if X.shape[0] < 2:
        raise ValueError("a training batch needs at least 2 rows")
    nl = batch.n_labeled
    k = config.n_outputs - 1
    tr = clean_forward(params, config, X, bn=bn, mode="train")
    if noise is None:
        noise = sample_noise(config, X.shape[0], rng)
    noisy_forward(params, config, X, noise=noise, trace=tr)
    use_decoder = any(lam > 0 for lam in config.lambdas)
    if use_decoder:
        decode(params, config, tr)
        cd = denoising_cost(tr.z, tr.z_hat_bn, config.lambdas)
    else:
        cd = [0.0] * (config.depth + 1)
    c1 = supervised_cost(tr.y_t[:nl], batch.labels)
    c2 = 0.0
    c_ent = None
    if batch.n_unlabeled:
        post = tr.y_t if objective.c2_on == "noisy" else tr.y
        c2 = balance_cost(post[nl:], k, objective.p_oos)
        if objective.entropy_weight:
            post = tr.y_t if objective.entropy_on == "noisy" else tr.y
            c_ent = entropy_cost(post[nl:])
    cost = total_cost(c1, c2, cd, objective.alpha, c_ent, objective.entropy_weight)
    return tr, cost


def backward(params, config, batch, objective, rng=None, noise=None, bn=None):
    """Gradients of the total cost wrt every parameter, plus the cost itself.

    Batch statistics are differentiated through. Pass ``noise`` to replay a
    fixed corruption; otherwise it is drawn from ``rng``.
    """
    tr, cost = forward_costs(params, config, batch, objective, rng=rng, noise=noise, bn=bn)
    if not np.isfinite(cost.total):
        raise NumericalError(f"non-finite cost {cost.as_dict()}")
    L = config.depth
    nl = batch.n_labeled
    k = config.n_outputs - 1
    g = LadderParams.zeros_like(params)

    gy_t = np.zeros_like(tr.y_t)
    gy = np.zeros_like(tr.y)
    gy_t[:nl] += supervised_grad(tr.y_t[:nl], batch.labels)
    if batch.n_unlabeled:
        if objective.alpha:
            tgt = gy_t if objective.c2_on == "noisy" else gy
            post = tr.y_t if objective.c2_on == "noisy" else tr.y
            tgt[nl:] += objective.alpha * balance_grad(post[nl:], k, objective.p_oos)
        if objective.entropy_weight:
            tgt = gy_t if objective.entropy_on == "noisy" else gy
            post = tr.y_t if objective.entropy_on == "noisy" else tr.y
            tgt[nl:] += objective.entropy_weight * entropy_grad(post[nl:])

    # gradients arriving at the clean pass through the denoising targets and
    # through the statistics used to standardize the reconstructions
    gz_clean = [np.zeros_like(z) for z in tr.z]
    g_mean = [np.zeros_like(m) for m in tr.mean]
    g_std = [np.zeros_like(s) for s in tr.std]
    gz_lateral = [None] * (L + 1)
    gh_top = np.zeros_like(tr.y_t)

    if tr.z_hat is not None:
        g_zhat = [np.zeros_like(z) for z in tr.z_hat]
        for l in range(L + 1):
            lam = config.lambdas[l]
            if lam > 0:
                g_bn = denoising_grad(tr.z[l], tr.z_hat_bn[l], lam)
                gz_clean[l] -= g_bn
                g_zhat[l] += g_bn / tr.std[l]
                g_mean[l] -= g_bn.sum(axis=0) / tr.std[l]
                g_std[l] -= (g_bn * tr.z_hat_bn[l]).sum(axis=0) / tr.std[l]
            zt = tr.z_t[l] if l in config.lateral_layers else None
            gz_lateral[l], g_u, g_comb = kernels.combinator_backward(
                zt, tr.u[l], params.comb[l], g_zhat[l])
            g.comb[l] += g_comb
            if l == L:
                gh_top = g_u
            else:
                g_q = kernels.bn_backward(g_u, tr.u[l], tr.u_std[l])
                g.V[l] += tr.z_hat[l + 1].T @ g_q
                g_zhat[l + 1] += g_q @ params.V[l].T

    # corrupted encoder
    gh = gy_t + gh_top
    for l in range(L, 0, -1):
        ga = _softmax_backward(tr.y_t, gh) if l == L else gh * (tr.act_t[l] > 0)
        gamma, beta = params.gamma[l - 1], params.beta[l - 1]
        g.gamma[l - 1] += (ga * (tr.z_t[l] + beta)).sum(axis=0)
        g.beta[l - 1] += (ga * gamma).sum(axis=0)
        gz = ga * gamma
        if gz_lateral[l] is not None:
            gz = gz + gz_lateral[l]
        gp = kernels.bn_backward(gz, tr.z_norm_t[l], tr.std_t[l])
        g.W[l - 1] += tr.h_t[l - 1].T @ gp
        gh = gp @ params.W[l - 1].T

    # clean encoder
    gh = gy
    for l in range(L, 0, -1):
        ga = _softmax_backward(tr.y, gh) if l == L else gh * (tr.act[l] > 0)
        gamma, beta = params.gamma[l - 1], params.beta[l - 1]
        g.gamma[l - 1] += (ga * (tr.z[l] + beta)).sum(axis=0)
        g.beta[l - 1] += (ga * gamma).sum(axis=0)
        gz = ga * gamma + gz_clean[l]
        gp = kernels.bn_backward(gz, tr.z[l], tr.std[l], g_mean[l], g_std[l])
        g.W[l - 1] += tr.h[l - 1].T @ gp
        gh = gp @ params.W[l - 1].T

    for name, arr in g.groups().items():
        if not np.all(np.isfinite(arr)):
            raise NumericalError(f"non-finite gradient in {name}")
    return g, cost


@dataclass
class OptimizerState:
    m: LadderParams
    v: LadderParams
    step: int = 0
    learning_rate: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def init(cls, params, learning_rate=0.002, **kw):
        return cls(LadderParams.zeros_like(params), LadderParams.zeros_like(params),
                   learning_rate=learning_rate, **kw)


def adam_step(params, grads, opt):
    """In-place Adam update with bias correction; returns ``params``."""
    opt.step += 1
    b1, b2 = opt.beta1, opt.beta2
    corr1 = 1.0 - b1 ** opt.step
    corr2 = 1.0 - b2 ** opt.step
    pg, gg, mg, vg = params.groups(), grads.groups(), opt.m.groups(), opt.v.groups()
    for name, p in pg.items():
        g = gg[name]
        m, v = mg[name], vg[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= opt.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + opt.epsilon)
    return params


def make_batches(dataset, schedule, epoch_index):
    """Split one epoch into mixed batches.

    ``dataset`` needs ``X_labeled``, ``labels`` and ``X_unlabeled``. Both pools
    are shuffled independently with a seed derived from the schedule's
    shuffle seed and the epoch. Every example is used at most once; a trailing
    batch of fewer than 2 rows is dropped.
    """
    Xl, yl, Xu = dataset.X_labeled, np.asarray(dataset.labels), dataset.X_unlabeled
    n_l, n_u = Xl.shape[0], Xu.shape[0]
    total = n_l + n_u
    if total == 0:
        return []
    rng = np.random.default_rng([schedule.shuffle_seed, epoch_index])
    perm_l = rng.permutation(n_l)
    perm_u = rng.permutation(n_u)
    b = schedule.batch_size
    if schedule.policy == "proportional":
        per_l = int(round(b * n_l / total))
    else:
        per_l = min(schedule.labeled_per_batch, n_l)
    per_l = min(per_l, b)
    per_u = b - per_l
    if per_l == 0 and n_l:
        per_l, per_u = 1, b - 1
    if per_u == 0 and n_u:
        per_l, per_u = b - 1, 1
    n_batches = -(-total // b)
    batches = []
    for i in range(n_batches):
        # the proportional tail batch takes whatever is left of both pools
        last = i == n_batches - 1 and schedule.policy == "proportional"
        il = perm_l[i * per_l:] if last else perm_l[i * per_l:(i + 1) * per_l]
        iu = perm_u[i * per_u:] if last else perm_u[i * per_u:(i + 1) * per_u]
        if len(il) + len(iu) < 2:
            continue
        batches.append(Batch(X=np.vstack([Xl[il], Xu[iu]]), labels=yl[il]))
    return batches


@dataclass
class TrainResult:
    params: LadderParams
    bn: BatchNormState
    history: list = field(default_factory=list)
    stopped_epoch: int = None


def train_loop(dataset, config, schedule, objective, eval_hook=None, params=None, on_epoch=None):
    """Full training run; deterministic given the schedule seeds.

    ``eval_hook(params, bn)`` returns a held-out cost recorded per epoch.
    With ``schedule.patience > 0`` training stops once that cost has not
    improved for ``patience`` epochs, and the best parameters are returned.
    ``on_epoch(record)`` sees each metrics record as soon as it exists.
    """
    rng = np.random.default_rng(schedule.seed)
    if params is None:
        params = LadderParams.init(config, rng)
    params.check_shapes(config)
    bn = BatchNormState.init(config, schedule.bn_momentum)
    opt = OptimizerState.init(params, learning_rate=schedule.learning_rate)
    history = []
    best = (np.inf, None, None)
    since_best = 0
    stopped = None
    for epoch in range(schedule.epochs):
        sums = np.zeros(4)
        batches = make_batches(dataset, schedule, epoch)
        for bi, batch in enumerate(batches):
            try:
                grads, cost = backward(params, config, batch, objective, rng=rng, bn=bn)
            except NumericalError as exc:
                raise NumericalError(f"epoch {epoch + 1}, batch {bi}: {exc}") from exc
            adam_step(params, grads, opt)
            sums += (cost.c1, cost.c2, cost.cd_total, cost.total)
        means = sums / max(len(batches), 1)
        rec = {"epoch": epoch + 1, "c1": float(means[0]), "c2": float(means[1]),
               "cd_total": float(means[2]), "total": float(means[3]), "eval_cost": None}
        if eval_hook is not None:
            rec["eval_cost"] = float(eval_hook(params, bn))
        history.append(rec)
        if on_epoch is not None:
            on_epoch(rec)
        log.debug("epoch %d total %.5f eval %s", epoch + 1, rec["total"], rec["eval_cost"])
        if schedule.patience and eval_hook is not None:
            if rec["eval_cost"] < best[0]:
                best = (rec["eval_cost"], params.copy(), bn.copy())
                since_best = 0
            else:
                since_best += 1
                if since_best >= schedule.patience:
                    stopped = epoch + 1
                    break
    if stopped is not None:
        params, bn = best[1], best[2]
    return TrainResult(params=params, bn=bn, history=history, stopped_epoch=stopped)


@dataclass
class GradCheckReport:
    errors: dict
    tolerance: float
    step: float

    @property
    def passed(self):
        return all(e < self.tolerance for e in self.errors.values())

    @property
    def worst(self):
        return max(self.errors.items(), key=lambda kv: kv[1])

    def lines(self):
        return [f"{name:10s} {err:.3e} {'ok' if err < self.tolerance else 'FAIL'}"
                for name, err in self.errors.items()]


def relative_error(analytic, numeric):
    """Entry-wise relative error, floored at 1e-3 of the group's largest
    gradient so exact zeros do not divide finite-difference noise by zero."""
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0))
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), max(1e-3 * scale, 1e-12))
    return float((np.abs(analytic - numeric) / denom).max(initial=0.0))


def grad_check(params, config, batch, objective, noise, tolerance=1e-4, step=1e-5, analytic=None):
    """Compare analytic gradients against central differences of the total cost.

    ``noise`` is replayed for every evaluation so the objective is deterministic.
    ``analytic`` overrides the gradients under test.
    """
    if analytic is None:
        analytic, _ = backward(params, config, batch, objective, noise=noise)
    work = params.copy()
    errors = {}
    agroups = analytic.groups()

    def f():
        return forward_costs(work, config, batch, objective, noise=noise)[1].total

    for name, arr in work.groups().items():
        numeric = np.zeros_like(arr)
        flat = arr.reshape(-1)
        nflat = numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            fp = f()
            flat[i] = orig - step
            fm = f()
            flat[i] = orig
            nflat[i] = (fp - fm) / (2.0 * step)
        errors[name] = relative_error(agroups[name], numeric)
    return GradCheckReport(errors=errors, tolerance=tolerance, step=step)


def gradcheck_fixture(seed=0, lateral_layers=(0,), lambdas=(1.0, 1.0, 0.3), alpha=0.15):
    """Tiny [5, 4, 3] network with a 4 labeled + 4 unlabeled batch and
    randomized parameters so every coefficient path carries gradient."""
    from .ladder import LadderConfig

    rng = np.random.default_rng(seed)
    config = LadderConfig([5, 4, 3], noise_sigma=0.5, lambdas=list(lambdas),
                          lateral_layers=lateral_layers)
    params = LadderParams.init(config, rng)
    for g in params.gamma:
        g += rng.uniform(-0.3, 0.3, size=g.shape)
    for b in params.beta:
        b += rng.uniform(0.1, 0.5, size=b.shape)
    for a in params.comb:
        a += rng.normal(0.0, 0.5, size=a.shape)
    X = rng.normal(size=(8, 5))
    batch = Batch(X=X, labels=np.array([0, 1, 0, 1]))
    noise = sample_noise(config, 8, rng)
    objective = Objective(alpha=alpha, p_oos=0.23)
    return params, config, batch, objective, noise
