import itertools

import numpy as np
import pytest

from ladderlid import lid
from ladderlid.ladder import LadderConfig
from ladderlid.lid.protocol import oos_languages
from ladderlid.training import Objective, TrainSchedule


@pytest.fixture(scope="module")
def fifty():
    return lid.synth_generate(k=50, n_oos_langs=0, dim=4, per_class_labeled=300, n_unlabeled=0,
                              seed=0).dataset


def test_split_contract(fifty):
    fold = lid.cv_split(fifty, lid.SplitSpec(), 0)
    assert fold.dataset.k == 38
    assert np.unique(fold.dataset.labeled.labels).size == 38
    names = np.array(fifty.class_names + ["?"])
    src = {i: l for i, l in zip(fifty.labeled.ids, fifty.labeled.labels)}
    for ids in (fold.dataset.unlabeled.ids, fold.test.ids):
        assert len({src[i] for i in ids}) == 50
    assert names.size == 51
    # every held-out language is labeled oos in the truth
    oos_rows = [src[i] in set(fold.oos_langs) for i in fold.test.ids]
    np.testing.assert_array_equal(np.array(oos_rows), fold.test_truth == 38)


def test_split_partitions_disjoint_and_reproducible(fifty):
    a = lid.cv_split(fifty, lid.SplitSpec(), 1)
    b = lid.cv_split(fifty, lid.SplitSpec(), 1)
    parts = [set(a.dataset.labeled.ids), set(a.dataset.unlabeled.ids), set(a.test.ids)]
    for x, y in itertools.combinations(parts, 2):
        assert not x & y
    assert a.test.ids == b.test.ids


def test_dev_and_test_balanced_across_languages(fifty):
    fold = lid.cv_split(fifty, lid.SplitSpec(), 2)
    src = dict(zip(fifty.labeled.ids, fifty.labeled.labels))
    counts = np.bincount([src[i] for i in fold.test.ids], minlength=50)
    assert counts.min() == counts.max() == 50
    assert np.mean(fold.test_truth == 38) == pytest.approx(12 / 50)


def test_rotation_covers_languages():
    split = lid.SplitSpec()
    sets = [frozenset(oos_languages(50, split, r)) for r in range(5)]
    assert len(set(sets)) == 5
    assert len(frozenset().union(*sets)) == 50


def test_split_validation(fifty):
    with pytest.raises(ValueError):
        lid.cv_split(fifty, lid.SplitSpec(n_inset=30, n_oos=12), 0)
    tiny = lid.synth_generate(k=5, n_oos_langs=0, dim=2, per_class_labeled=2, n_unlabeled=0)
    with pytest.raises(lid.DataError):
        lid.cv_split(tiny.dataset, lid.SplitSpec(n_inset=3, n_oos=2), 0)


def _tune(alphas, repeats):
    data = lid.synth_generate(k=10, n_oos_langs=0, dim=10, per_class_labeled=90, n_unlabeled=0,
                              seed=0)
    split = lid.SplitSpec(n_inset=7, n_oos=3, repeat=repeats, seed=0)
    config = LadderConfig([10, 40, 20, 11])
    schedule = TrainSchedule(epochs=100, batch_size=64, learning_rate=0.01)
    return lid.tune_alpha(data.dataset, alphas, split, config, schedule, Objective())


def test_tune_single_candidate():
    res = _tune([0.15], 1)
    assert res.best_alpha == 0.15 and res.table.shape == (1, 1)


@pytest.mark.slow
def test_tune_prefers_label_balance_term():
    res = _tune([0.0, 0.15], 2)
    assert res.table.shape == (2, 2) and np.all(np.isfinite(res.table))
    assert res.best_alpha == 0.15
    assert res.means[1] == res.means.min()


def test_tune_rejects_empty():
    with pytest.raises(ValueError):
        _tune([], 1)
