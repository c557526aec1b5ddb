"""Flat ``key = value`` run configuration, the run report, and the model file.

Defaults describe the full-size setup: 400-dim input, hidden layers
500/500/500/100, 51 outputs, noise 0.5, batch 1024, 1000 epochs, denoising
weights 1, 1, 0.3, ... and alpha 0.15.
"""

import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .ladder import BatchNormState, LadderConfig, LadderParams
from .lid.protocol import SplitSpec
from .training import Objective, TrainSchedule


class ConfigError(ValueError):
    pass


def _ints(s):
    return tuple(int(x) for x in s.split(",") if x.strip())


def _floats(s):
    return tuple(float(x) for x in s.split(",") if x.strip())


@dataclass
class RunConfig:
    layers: tuple = (400, 500, 500, 500, 100, 51)
    noise_sigma: float = 0.5
    lambdas: tuple = (1.0, 1.0, 0.3, 0.3, 0.3, 0.3)
    lateral_layers: tuple = (0,)
    epochs: int = 1000
    batch_size: int = 1024
    seed: int = 0
    shuffle_seed: int = 0
    batch_policy: str = "proportional"
    labeled_per_batch: int = 0
    learning_rate: float = 0.002
    bn_momentum: float = 0.99
    patience: int = 0
    alpha: float = 0.15
    p_oos: float = 0.23
    entropy_weight: float = 0.0
    entropy_on: str = "noisy"
    c2_on: str = "noisy"
    n_inset: int = 38
    n_oos: int = 12
    repeats: int = 5
    split_seed: int = 0
    train_fraction: float = 2.0 / 3.0
    synth_k: int = 10
    synth_oos_langs: int = 3
    synth_dim: int = 20
    synth_per_class: int = 20
    synth_unlabeled: int = 2000
    synth_test: int = 2000
    synth_p_oos: float = 0.23
    synth_sep: float = 1.0
    synth_std: float = 1.0
    synth_seed: int = 0
    labeled: str = ""
    unlabeled: str = ""
    classes: str = ""
    test: str = ""
    truth: str = ""

    @classmethod
    def parse_value(cls, key, text):
        f = {f.name: f for f in fields(cls)}.get(key)
        if f is None:
            raise ConfigError(f"unknown config key {key!r}")
        default = f.default
        text = text.strip()
        try:
            if isinstance(default, tuple):
                return _ints(text) if all(isinstance(x, int) for x in default) else _floats(text)
            if isinstance(default, bool):
                return text.lower() in ("1", "true", "yes")
            if isinstance(default, int):
                return int(text)
            if isinstance(default, float):
                return float(text)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
        return text

    @classmethod
    def from_text(cls, text):
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            values[key] = cls.parse_value(key, val)
        return cls(**values)

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def override(self, assignments):
        for item in assignments:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            key, val = item.split("=", 1)
            setattr(self, key.strip(), self.parse_value(key.strip(), val))
        return self

    def to_text(self):
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            out.append(f"{f.name} = {v}")
        return "\n".join(out) + "\n"

    def as_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    def ladder_config(self):
        try:
            return LadderConfig(list(self.layers), self.noise_sigma, list(self.lambdas),
                                self.lateral_layers)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def schedule(self):
        try:
            return TrainSchedule(epochs=self.epochs, batch_size=self.batch_size,
                                 shuffle_seed=self.shuffle_seed, seed=self.seed,
                                 policy=self.batch_policy,
                                 labeled_per_batch=self.labeled_per_batch,
                                 learning_rate=self.learning_rate, patience=self.patience,
                                 bn_momentum=self.bn_momentum)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def objective(self):
        try:
            return Objective(alpha=self.alpha, p_oos=self.p_oos,
                             entropy_weight=self.entropy_weight, entropy_on=self.entropy_on,
                             c2_on=self.c2_on)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def split_spec(self):
        return SplitSpec(n_inset=self.n_inset, n_oos=self.n_oos, repeat=self.repeats,
                         seed=self.split_seed, train_fraction=self.train_fraction)


@dataclass
class RunReport:
    config: dict
    seed: int
    epochs: list = field(default_factory=list)
    final_challenge_cost: float = None
    oos_ratio: float = None
    oos_ratio_postprocessed: float = None
    postprocessed_challenge_cost: float = None
    wall_clock: float = None

    def to_json(self):
        return json.dumps(asdict(self), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


MODEL_MAGIC = b"LADDERLID-MODEL 1\n"


def save_model(path, params, bn, config, class_names, p_oos):
    """Write the parameters and running statistics: a magic line, one JSON
    header line listing every array's name and shape, then raw little-endian
    float64 data in header order."""
    arrays = dict(params.groups())
    for l, (m, v) in enumerate(zip(bn.running_mean, bn.running_var)):
        arrays[f"bn_mean{l}"] = m
        arrays[f"bn_var{l}"] = v
    header = {
        "layer_sizes": config.layer_sizes, "noise_sigma": config.noise_sigma,
        "lambdas": config.lambdas, "lateral_layers": list(config.lateral_layers),
        "bn_momentum": bn.momentum, "class_names": list(class_names), "p_oos": p_oos,
        "arrays": [[name, list(a.shape)] for name, a in arrays.items()],
    }
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for a in arrays.values():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_model(path):
    """Returns (params, bn, config, header)."""
    with open(path, "rb") as fh:
        if fh.readline() != MODEL_MAGIC:
            raise ValueError(f"{path}: not a model file")
        header = json.loads(fh.readline())
        arrays = {}
        for name, shape in header["arrays"]:
            n = int(np.prod(shape))
            data = np.frombuffer(fh.read(8 * n), dtype="<f8")
            if data.size != n:
                raise ValueError(f"{path}: truncated at {name}")
            arrays[name] = data.reshape(shape).astype(np.float64)
    config = LadderConfig(header["layer_sizes"], header["noise_sigma"], header["lambdas"],
                          header["lateral_layers"])
    L = config.depth
    params = LadderParams(
        [arrays[f"W{l}"] for l in range(1, L + 1)], [arrays[f"V{l}"] for l in range(1, L + 1)],
        [arrays[f"gamma{l}"] for l in range(1, L + 1)],
        [arrays[f"beta{l}"] for l in range(1, L + 1)], [arrays[f"comb{l}"] for l in range(L + 1)])
    bn = BatchNormState([arrays[f"bn_mean{l}"] for l in range(L + 1)],
                        [arrays[f"bn_var{l}"] for l in range(L + 1)], header["bn_momentum"])
    return params, bn, config, header
