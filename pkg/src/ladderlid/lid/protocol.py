"""Cross-validation on labeled data with simulated out-of-set languages, and
tuning of the label-balance weight alpha on top of it."""

import logging
from dataclasses import dataclass, replace

import numpy as np

from ..ladder import LadderConfig, predict
from ..training import train_loop
from .data import DataError, IvectorDataset, IvectorTable
from .metric import ChallengeMetric, challenge_cost

log = logging.getLogger(__name__)


@dataclass
class SplitSpec:
    n_inset: int = 38
    n_oos: int = 12
    repeat: int = 5
    seed: int = 0
    train_fraction: float = 2.0 / 3.0


@dataclass
class CVFold:
    dataset: IvectorDataset  # labeled train + dev as the unlabeled pool
    dev_truth: np.ndarray
    test: IvectorTable
    test_truth: np.ndarray
    inset_langs: np.ndarray
    oos_langs: np.ndarray


def oos_languages(n_lang, split, repeat_index):
    """Languages held out as out-of-set for one repeat.

    Languages are permuted once per seed and consecutive windows of ``n_oos``
    are taken, wrapping around, so successive repeats rotate through all of
    them.
    """
    perm = np.random.default_rng(split.seed).permutation(n_lang)
    start = repeat_index * split.n_oos
    return np.sort(perm[(start + np.arange(split.n_oos)) % n_lang])


def cv_split(dataset, split, repeat_index):
    """Build train / dev / test for one repeat from a fully labeled dataset.

    In-set languages give ``train_fraction`` of their examples to training.
    Every language, in-set or not, then contributes the same number of
    remaining examples, split evenly between dev and test.
    """
    n_lang = dataset.k
    if split.n_inset + split.n_oos != n_lang:
        raise ValueError(f"{split.n_inset} + {split.n_oos} languages != {n_lang} in the data")
    lab = dataset.labeled
    counts = np.bincount(lab.labels, minlength=n_lang)
    per_lang = int(counts.min())
    n_train = int(np.floor(split.train_fraction * per_lang))
    n_rest = per_lang - n_train
    if n_train < 1 or n_rest < 2:
        raise DataError(f"too few examples per language ({per_lang}) for this split")
    n_dev = n_rest // 2

    oos = oos_languages(n_lang, split, repeat_index)
    inset = np.setdiff1d(np.arange(n_lang), oos)
    new_id = np.full(n_lang, split.n_inset)
    new_id[inset] = np.arange(split.n_inset)

    rng = np.random.default_rng([split.seed, repeat_index])
    tr_idx, dev_idx, test_idx = [], [], []
    for lang in range(n_lang):
        rows = np.flatnonzero(lab.labels == lang)
        rows = rows[rng.permutation(rows.size)]
        if lang in inset:
            tr_idx.append(rows[:n_train])
            rows = rows[n_train:]
        rows = rows[:n_rest]
        dev_idx.append(rows[:n_dev])
        test_idx.append(rows[n_dev:])
    tr_idx, dev_idx, test_idx = (np.concatenate(a) for a in (tr_idx, dev_idx, test_idx))
    dev_idx = dev_idx[rng.permutation(dev_idx.size)]
    test_idx = test_idx[rng.permutation(test_idx.size)]

    def take(idx, labels=None):
        return IvectorTable([lab.ids[i] for i in idx], lab.X[idx], labels)

    names = [dataset.class_names[i] for i in inset]
    train = take(tr_idx, new_id[lab.labels[tr_idx]])
    ds = IvectorDataset(names, train, take(dev_idx))
    return CVFold(ds, new_id[lab.labels[dev_idx]], take(test_idx),
                  new_id[lab.labels[test_idx]], inset, oos)


@dataclass
class TuneResult:
    best_alpha: float
    alphas: list
    table: np.ndarray  # repeats x candidates
    means: np.ndarray


def fit_and_score(dataset, test_X, test_truth, config, schedule, objective, eval_hook=None):
    """Train on ``dataset`` and return (TrainResult, scaled challenge cost)."""
    result = train_loop(dataset, config, schedule, objective, eval_hook=eval_hook)
    post = predict(result.params, config, test_X, result.bn)
    metric = ChallengeMetric(k=config.n_outputs - 1, p_oos=objective.p_oos)
    return result, challenge_cost(post.argmax(axis=1), test_truth, metric)


def tune_alpha(dataset, candidate_alphas, split, config, schedule, objective):
    """Average challenge cost over CV repeats for each alpha; lowest mean wins,
    ties going to the smaller alpha."""
    alphas = [float(a) for a in candidate_alphas]
    if not alphas:
        raise ValueError("need at least one candidate alpha")
    cfg = LadderConfig(config.layer_sizes[:-1] + [split.n_inset + 1], config.noise_sigma,
                       config.lambdas, config.lateral_layers)
    table = np.zeros((split.repeat, len(alphas)))
    for r in range(split.repeat):
        fold = cv_split(dataset, split, r)
        for j, a in enumerate(alphas):
            _, score = fit_and_score(fold.dataset, fold.test.X, fold.test_truth, cfg, schedule,
                                     replace(objective, alpha=a))
            table[r, j] = score
            log.info("repeat %d alpha %g score %.3f", r, a, score)
    means = table.mean(axis=0)
    order = sorted(range(len(alphas)), key=lambda j: (means[j], alphas[j]))
    return TuneResult(alphas[order[0]], alphas, table, means)


def heldout_cost(params, config, objective, X, truth, noise_seed=0):
    """The training objective evaluated on held-out data.

    In-set truth rows supply the likelihood term, every row enters the balance
    and denoising terms. Batch statistics come from the held-out set itself and
    the corruption is replayed from ``noise_seed`` so the value is a
    deterministic function of the parameters.
    """
    from ..ladder import full_trace, sample_noise
    from ..objective import balance_cost, denoising_cost, supervised_cost, total_cost

    noise = sample_noise(config, X.shape[0], np.random.default_rng(noise_seed))
    tr = full_trace(params, config, X, noise=noise)
    k = config.n_outputs - 1
    inset = truth < k
    c1 = supervised_cost(tr.y_t[inset], truth[inset])
    c2 = balance_cost(tr.y_t, k, objective.p_oos)
    cd = denoising_cost(tr.z, tr.z_hat_bn, config.lambdas)
    return total_cost(c1, c2, cd, objective.alpha).total
