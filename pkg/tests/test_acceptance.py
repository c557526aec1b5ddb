"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line; the lines are also
collected and repeated in the terminal summary (see conftest).
"""
import itertools
import json
import math
import time
import warnings

import numpy as np
import pytest

from ladderlid import lid
from ladderlid.cli import main
from ladderlid.ladder import LadderConfig, LadderParams, clean_forward, noisy_forward, predict
from ladderlid.lid.protocol import heldout_cost
from ladderlid.objective import balance_cost, denoising_cost, supervised_cost
from ladderlid.training import Objective, TrainSchedule, grad_check, gradcheck_fixture, train_loop

RESULTS = {}
SEEDS = range(5)
LAYERS = [20, 100, 50, 50, 20, 11]
EPOCHS = 200
BATCH = 256


def verdict(n, ok, detail=""):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
    RESULTS[n] = line
    print(line)
    assert ok, line


# ---------------------------------------------------------------- exact checks

def test_criterion_01_gradient_oracle():
    t0 = time.perf_counter()
    params, config, batch, objective, noise = gradcheck_fixture(seed=0)
    assert config.layer_sizes == [5, 4, 3] and batch.X.shape[0] == 8
    report = grad_check(params, config, batch, objective, noise, tolerance=1e-4, step=1e-5)
    elapsed = time.perf_counter() - t0
    worst = max(report.errors.values())
    verdict(1, report.passed and set(report.errors) == set(params.groups()) and elapsed < 30,
            f"max rel err {worst:.2e} over {len(report.errors)} groups in {elapsed:.2f}s")


def test_criterion_02_cost_values():
    checks = []
    y = np.full((4, 51), 1 / 51)
    checks.append(abs(supervised_cost(y, np.zeros(4, dtype=int)) - np.log(51)) <= 1e-9)
    y2 = np.array([[0.5, 0.5], [0.5, 0.5]])
    checks.append(abs(balance_cost(y2, 1, 0.5) - np.log(2)) <= 1e-12)
    z, zh = [np.array([[1.0, 0.0]])], [np.zeros((1, 2))]
    checks.append(abs(denoising_cost(z, zh, [1.0])[0] - 0.5) <= 1e-12)
    checks.append(abs(denoising_cost(z, zh, [0.3])[0] - 0.15) <= 1e-12)
    pred, truth = np.array([0, 1, 1, 1, 0]), np.array([0, 0, 1, 1, 2])
    checks.append(lid.challenge_cost(pred, truth, lid.ChallengeMetric(2, 0.23, scale=1.0)) == 0.4225)
    verdict(2, all(checks), f"{sum(checks)}/{len(checks)} fixtures exact")


def _confusion_oracle(pred, truth, k, p_oos):
    conf = np.zeros((k + 1, k + 1), dtype=np.int64)
    np.add.at(conf, (truth, pred), 1)
    total = conf.sum(axis=1)
    rates = [0.0 if total[c] == 0 else (total[c] - conf[c, c]) / total[c] for c in range(k + 1)]
    return 100 * ((1.0 - p_oos) / k * math.fsum(rates[:k]) + p_oos * rates[k])


def test_criterion_03_metric_oracle():
    rng = np.random.default_rng(3)
    k, metric = 50, lid.ChallengeMetric(50)
    mismatches = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(1000):
            n = int(rng.integers(1, 400))
            truth = rng.integers(0, k + 1, size=n)
            truth[rng.random(n) < 0.23] = k
            pred = np.where(rng.random(n) < 0.6, truth, rng.integers(0, k + 1, size=n))
            if lid.challenge_cost(pred, truth, metric) != _confusion_oracle(pred, truth, k, 0.23):
                mismatches += 1
    verdict(3, mismatches == 0, f"{mismatches} mismatches on 1000 pairs")


def test_criterion_04_noiseless_equivalence():
    rng = np.random.default_rng(4)
    worst = 0.0
    for i in range(100):
        sizes = [int(s) for s in rng.integers(1, 12, size=rng.integers(2, 6))]
        lateral = tuple(l for l in range(len(sizes)) if l == 0 or rng.random() < 0.5)
        config = LadderConfig(sizes, 0.0, None, lateral)
        params = LadderParams.init(config, np.random.default_rng(i))
        for g in params.gamma + params.beta:
            g[:] = rng.normal(size=g.shape)
        X = rng.normal(size=(int(rng.integers(2, 40)), sizes[0]))
        tr = clean_forward(params, config, X)
        noisy_forward(params, config, X, rng=np.random.default_rng(i), trace=tr)
        pairs = list(zip(tr.z, tr.z_t)) + list(zip(tr.h, tr.h_t)) + [(tr.y, tr.y_t)]
        worst = max(worst, max(float(np.max(np.abs(a - b))) for a, b in pairs))
    verdict(4, worst <= 1e-12, f"max deviation {worst:.1e} over 100 configs")


# ------------------------------------------------------------ training trends

def _run(seed, lambdas, alpha, with_hook=True):
    synth = lid.synth_generate(seed=seed)
    config = LadderConfig(LAYERS, 0.5, lambdas)
    schedule = TrainSchedule(epochs=EPOCHS, batch_size=BATCH, seed=seed, shuffle_seed=seed)
    objective = Objective(alpha=alpha)
    hook = None
    if with_hook:
        def hook(params, bn):
            return heldout_cost(params, config, objective, synth.test.X, synth.test_truth)
    result = train_loop(synth.dataset, config, schedule, objective, eval_hook=hook)
    post = predict(result.params, config, synth.test.X, result.bn)
    metric = lid.ChallengeMetric(10)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        raw = lid.challenge_cost(post.argmax(1), synth.test_truth, metric)
        pp = lid.challenge_cost(lid.postprocess_oos(post, 0.23), synth.test_truth, metric)
    evals = [r["eval_cost"] for r in result.history]
    return {"cost": raw, "pp": pp, "evals": evals}


@pytest.fixture(scope="module")
def runs():
    t0 = time.perf_counter()
    ladder = [_run(s, None, 0.15) for s in SEEDS]
    baseline = [_run(s, [0.0] * len(LAYERS), 0.0) for s in SEEDS]
    crit5_time = time.perf_counter() - t0
    no_c2 = [_run(s, None, 0.0, with_hook=False) for s in SEEDS]
    return {"ladder": ladder, "baseline": baseline, "no_c2": no_c2, "time": crit5_time}


def _mean(rs, key="cost"):
    return float(np.mean([r[key] for r in rs]))


@pytest.mark.slow
def test_criterion_05_semi_supervised_gain(runs):
    lad, base = _mean(runs["ladder"]), _mean(runs["baseline"])
    gain = (base - lad) / base
    verdict(5, gain >= 0.10 and runs["time"] < 600,
            f"ladder {lad:.2f} vs baseline {base:.2f}, gain {100 * gain:.1f}%, "
            f"{runs['time']:.0f}s")


@pytest.mark.slow
def test_criterion_06_balance_term_helps(runs):
    with_c2, without = _mean(runs["ladder"]), _mean(runs["no_c2"])
    verdict(6, with_c2 <= without, f"alpha 0.15 {with_c2:.2f} vs alpha 0 {without:.2f}")


def _gap(evals):
    return (evals[-1] - min(evals)) / abs(min(evals))


@pytest.mark.slow
def test_criterion_07_no_overfitting(runs):
    lad = [_gap(r["evals"]) for r in runs["ladder"]]
    base = [_gap(r["evals"]) for r in runs["baseline"]]
    ladder_ok = all(g <= 0.05 for g in lad)
    wider = sum(b > a for a, b in zip(lad, base))
    verdict(7, ladder_ok and wider >= 4,
            f"ladder gaps {[round(g, 3) for g in lad]}, baseline gaps "
            f"{[round(g, 3) for g in base]}, baseline wider in {wider}/5")


@pytest.mark.slow
def test_criterion_08_postprocessing(runs):
    rng = np.random.default_rng(8)
    count_ok = True
    for _ in range(500):
        n, c = int(rng.integers(1, 300)), int(rng.integers(2, 12))
        post = rng.dirichlet(np.full(c, rng.uniform(0.1, 3)), size=n)
        if rng.random() < 0.2:
            post = np.round(post, 1) + 1e-3
            post /= post.sum(1, keepdims=True)
        p = float(rng.uniform(0, 1))
        got = int(np.sum(lid.postprocess_oos(post, p) == c - 1))
        count_ok &= abs(got - round(p * n)) <= 1
    raw, pp = _mean(runs["baseline"]), _mean(runs["baseline"], "pp")
    verdict(8, count_ok and pp <= raw,
            f"count contract {'held' if count_ok else 'broken'}; baseline {raw:.2f} -> {pp:.2f}")


# ------------------------------------------------------------- tooling checks

def test_criterion_09_determinism(tmp_path):
    d = tmp_path / "data"
    main(["synth", "--out-dir", str(d), "-s", "synth_unlabeled=300", "-s", "synth_test=200"])
    reports = []
    for tag in "ab":
        out = tmp_path / f"{tag}.json"
        rc = main(["train", "-s", "layers=20,30,20,11", "-s", "lambdas=1,1,0.3,0.3",
                   "-s", "epochs=5", "-s", "batch_size=64", "-s", "seed=9",
                   "--labeled", str(d / "labeled.csv"), "--unlabeled", str(d / "unlabeled.csv"),
                   "--classes", str(d / "classes.txt"), "--test", str(d / "test.csv"),
                   "--truth", str(d / "truth.csv"), "--model", str(tmp_path / f"{tag}.bin"),
                   "--report", str(out)])
        assert rc == 0
        reports.append(json.loads(out.read_text()))
    same = json.dumps(reports[0]["epochs"]) == json.dumps(reports[1]["epochs"])
    same &= (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
    verdict(9, same, f"{len(reports[0]['epochs'])} epoch records compared")


def test_criterion_10_cv_protocol():
    data = lid.synth_generate(k=50, n_oos_langs=0, dim=4, per_class_labeled=30, n_unlabeled=0,
                              seed=10).dataset
    split = lid.SplitSpec()
    folds = [lid.cv_split(data, split, r) for r in range(split.repeat)]
    oos_sets = [frozenset(f.oos_langs) for f in folds]
    distinct = all(a != b for a, b in itertools.combinations(oos_sets, 2))
    disjoint = True
    for f in folds:
        parts = [set(f.dataset.labeled.ids), set(f.dataset.unlabeled.ids), set(f.test.ids)]
        disjoint &= all(not (a & b) for a, b in itertools.combinations(parts, 2))
        disjoint &= all(len(p) > 0 for p in parts)
    verdict(10, len(folds) == 5 and distinct and disjoint,
            f"{len(folds)} repeats, oos sets distinct={distinct}, partitions disjoint={disjoint}")
