"""i-vector datasets: CSV reading/writing and a synthetic Gaussian-cluster generator.

File formats, one example per line, no header, UTF-8:

* labeled:   ``id,label,v1,...,vd``
* unlabeled: ``id,v1,...,vd``
* truth:     ``id,label`` (``oos`` for out-of-set rows)
* classes:   one class name per line; line order gives class ids 0..k-1
"""

from dataclasses import dataclass

import numpy as np

OOS_NAME = "oos"


class DataError(ValueError):
    pass


@dataclass
class IvectorTable:
    ids: list
    X: np.ndarray
    labels: np.ndarray = None

    def __len__(self):
        return len(self.ids)

    @property
    def dim(self):
        return self.X.shape[1]


@dataclass
class IvectorDataset:
    """Labeled in-set examples plus unlabeled examples. Class ids run
    0..k-1; id ``k`` is reserved for out-of-set."""

    class_names: list
    labeled: IvectorTable
    unlabeled: IvectorTable

    def __post_init__(self):
        k = len(self.class_names)
        dims = {t.X.shape[1] for t in (self.labeled, self.unlabeled) if len(t)}
        if len(dims) > 1:
            raise DataError(f"labeled and unlabeled dimensions differ: {sorted(dims)}")
        lab = self.labeled.labels
        if lab is not None and lab.size and (lab.min() < 0 or lab.max() >= k):
            raise DataError(f"labeled class ids must lie in [0, {k})")
        ids = list(self.labeled.ids) + list(self.unlabeled.ids)
        if len(set(ids)) != len(ids):
            raise DataError("example ids must be unique across the dataset")

    @property
    def k(self):
        return len(self.class_names)

    @property
    def oos_class_id(self):
        return self.k

    @property
    def dim(self):
        for t in (self.labeled, self.unlabeled):
            if len(t):
                return t.X.shape[1]
        return 0

    # the attributes training.make_batches consumes
    @property
    def X_labeled(self):
        return self.labeled.X

    @property
    def labels(self):
        return self.labeled.labels

    @property
    def X_unlabeled(self):
        return self.unlabeled.X


def read_class_list(path):
    with open(path, encoding="utf-8") as fh:
        names = [line.strip() for line in fh if line.strip()]
    if len(set(names)) != len(names):
        raise DataError(f"{path}: duplicate class names")
    return names


def write_class_list(path, names):
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(f"{n}\n" for n in names)


def load_ivectors(path, has_labels, class_names=None):
    """Parse an i-vector CSV. Dimension is fixed by the first row.

    Labels are resolved to ids through ``class_names`` when given.
    """
    index = {n: i for i, n in enumerate(class_names)} if class_names is not None else None
    ids, rows, labels = [], [], []
    seen = set()
    dim = None
    skip = 2 if has_labels else 1
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            fields = line.split(",")
            if len(fields) <= skip:
                raise DataError(f"{path}:{lineno}: no vector values")
            ex_id = fields[0]
            if ex_id in seen:
                raise DataError(f"{path}:{lineno}: duplicate id {ex_id!r}")
            seen.add(ex_id)
            values = fields[skip:]
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise DataError(f"{path}:{lineno}: expected {dim} values, got {len(values)}")
            try:
                rows.append([float(v) for v in values])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            ids.append(ex_id)
            if has_labels:
                name = fields[1]
                if index is None:
                    labels.append(name)
                elif name not in index:
                    raise DataError(f"{path}:{lineno}: unknown class {name!r}")
                else:
                    labels.append(index[name])
    X = np.array(rows, dtype=np.float64).reshape(len(rows), dim or 0)
    if not has_labels:
        return IvectorTable(ids, X)
    lab = np.array(labels, dtype=np.int64 if index is not None else object)
    return IvectorTable(ids, X, lab)


def _fmt(v):
    return repr(float(v))


def write_ivectors(path, table, class_names=None):
    """Write ``table``; labels (ids) are written as class names when present."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, ex_id in enumerate(table.ids):
            head = [ex_id]
            if table.labels is not None:
                head.append(class_names[table.labels[i]])
            fh.write(",".join(head + [_fmt(v) for v in table.X[i]]) + "\n")


def load_truth(path, class_names):
    """Read ``id,label`` rows into ``{id: class id}``; ``oos`` maps to k."""
    index = {n: i for i, n in enumerate(class_names)}
    index[OOS_NAME] = len(class_names)
    truth = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected id,label")
            if parts[1] not in index:
                raise DataError(f"{path}:{lineno}: unknown class {parts[1]!r}")
            if parts[0] in truth:
                raise DataError(f"{path}:{lineno}: duplicate id {parts[0]!r}")
            truth[parts[0]] = index[parts[1]]
    return truth


def write_truth(path, ids, class_ids, class_names):
    names = list(class_names) + [OOS_NAME]
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(f"{i},{names[c]}\n" for i, c in zip(ids, class_ids))


@dataclass
class SynthData:
    dataset: IvectorDataset
    test: IvectorTable
    unlabeled_truth: np.ndarray
    test_truth: np.ndarray
    unlabeled_lang: np.ndarray
    test_lang: np.ndarray
    centroids: np.ndarray


def _mixed_classes(rng, n, k, n_oos_langs, p_oos):
    """Class ids (k = oos) and source-language ids for ``n`` rows; in-set rows
    are spread evenly over the k classes."""
    n_out = int(round(p_oos * n)) if n_oos_langs else 0
    n_in = n - n_out
    lang = np.concatenate([np.arange(n_in) % k, k + np.arange(n_out) % max(n_oos_langs, 1)])
    lang = lang[rng.permutation(n)]
    cls = np.where(lang < k, lang, k)
    return cls, lang


def synth_generate(k=10, n_oos_langs=3, dim=20, per_class_labeled=20, n_unlabeled=2000,
                   p_oos=0.23, cluster_sep=1.0, cluster_std=1.0, seed=0, n_test=None):
    """Gaussian clusters standing in for i-vectors of k + n_oos_langs languages.

    Labeled data covers only the k in-set languages; the unlabeled and test
    sets mix in out-of-set languages at rate ``p_oos``.
    """
    if min(k, dim, per_class_labeled) < 1 or n_unlabeled < 0 or n_oos_langs < 0:
        raise ValueError("counts must be positive")
    n_test = n_unlabeled if n_test is None else n_test
    rng = np.random.default_rng(seed)
    n_lang = k + n_oos_langs
    centroids = rng.normal(0.0, cluster_sep, size=(n_lang, dim))

    def draw(lang):
        return centroids[lang] + rng.normal(0.0, cluster_std, size=(len(lang), dim))

    lab_lang = np.repeat(np.arange(k), per_class_labeled)
    lab_lang = lab_lang[rng.permutation(lab_lang.size)]
    labeled = IvectorTable([f"L{i:06d}" for i in range(lab_lang.size)], draw(lab_lang), lab_lang)
    u_cls, u_lang = _mixed_classes(rng, n_unlabeled, k, n_oos_langs, p_oos)
    unlabeled = IvectorTable([f"U{i:06d}" for i in range(n_unlabeled)], draw(u_lang))
    t_cls, t_lang = _mixed_classes(rng, n_test, k, n_oos_langs, p_oos)
    test = IvectorTable([f"T{i:06d}" for i in range(n_test)], draw(t_lang))
    names = [f"lang{i:02d}" for i in range(k)]
    return SynthData(IvectorDataset(names, labeled, unlabeled), test, u_cls, t_cls, u_lang, t_lang,
                     centroids)
