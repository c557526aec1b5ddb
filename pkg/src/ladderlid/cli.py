"""Command-line entry point: ``ladderlid {synth,train,eval,tune,gradcheck}``.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numerical failure.
"""

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from . import lid
from .config import ConfigError, RunConfig, RunReport, load_model, save_model
from .ladder import LadderConfig, predict
from .lid.data import DataError, OOS_NAME
from .lid.protocol import heldout_cost
from .training import NumericalError, grad_check, gradcheck_fixture, train_loop

log = logging.getLogger("ladderlid")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_config(args):
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    return cfg.override(args.set or [])


def _path(args, cfg, name):
    return getattr(args, name, None) or getattr(cfg, name)


def cmd_synth(args):
    cfg = _load_config(args)
    data = lid.synth_generate(k=cfg.synth_k, n_oos_langs=cfg.synth_oos_langs, dim=cfg.synth_dim,
                              per_class_labeled=cfg.synth_per_class,
                              n_unlabeled=cfg.synth_unlabeled, p_oos=cfg.synth_p_oos,
                              cluster_sep=cfg.synth_sep, cluster_std=cfg.synth_std,
                              seed=cfg.synth_seed, n_test=cfg.synth_test)
    out = args.out_dir
    os.makedirs(out, exist_ok=True)
    ds = data.dataset
    lid.write_class_list(os.path.join(out, "classes.txt"), ds.class_names)
    lid.write_ivectors(os.path.join(out, "labeled.csv"), ds.labeled, ds.class_names)
    lid.write_ivectors(os.path.join(out, "unlabeled.csv"), ds.unlabeled)
    lid.write_ivectors(os.path.join(out, "test.csv"), data.test)
    lid.write_truth(os.path.join(out, "truth.csv"),
                    list(ds.unlabeled.ids) + list(data.test.ids),
                    np.concatenate([data.unlabeled_truth, data.test_truth]), ds.class_names)
    print(f"wrote {out}: {ds.k} classes, dim {ds.dim}, {len(ds.labeled)} labeled, "
          f"{len(ds.unlabeled)} unlabeled ({np.mean(data.unlabeled_truth == ds.k):.3f} oos), "
          f"{len(data.test)} test")
    return 0


def _truth_for(table, truth_map, path):
    missing = [i for i in table.ids if i not in truth_map]
    if missing:
        raise DataError(f"{path}: no truth for {len(missing)} ids, e.g. {missing[0]!r}")
    return np.array([truth_map[i] for i in table.ids], dtype=np.int64)


def _check_compat(config, dim, k, what):
    if dim and config.layer_sizes[0] != dim:
        raise DataError(f"{what} has dimension {dim}, network input is {config.layer_sizes[0]}")
    if config.n_outputs != k + 1:
        raise DataError(f"{k} classes need {k + 1} outputs, network has {config.n_outputs}")


def _score(post, truth, k, p_oos):
    metric = lid.ChallengeMetric(k=k, p_oos=p_oos)
    pred = post.argmax(axis=1)
    pp = lid.postprocess_oos(post, p_oos)
    return {
        "challenge_cost": lid.challenge_cost(pred, truth, metric),
        "oos_ratio": float(np.mean(pred == k)),
        "challenge_cost_postprocessed": lid.challenge_cost(pp, truth, metric),
        "oos_ratio_postprocessed": float(np.mean(pp == k)),
    }


def cmd_train(args):
    cfg = _load_config(args)
    if args.baseline:
        cfg.lambdas = tuple(0.0 for _ in cfg.lambdas)
    config = cfg.ladder_config()
    schedule = cfg.schedule()
    objective = cfg.objective()
    classes_path = _path(args, cfg, "classes")
    if not classes_path or not _path(args, cfg, "labeled"):
        raise ConfigError("train needs --classes and --labeled")
    names = lid.read_class_list(classes_path)
    labeled = lid.load_ivectors(_path(args, cfg, "labeled"), True, names)
    unl_path = _path(args, cfg, "unlabeled")
    unlabeled = (lid.load_ivectors(unl_path, False) if unl_path
                 else lid.IvectorTable([], np.zeros((0, labeled.dim))))
    if len(unlabeled) == 0:
        unlabeled = lid.IvectorTable([], np.zeros((0, labeled.dim)))
    dataset = lid.IvectorDataset(names, labeled, unlabeled)
    _check_compat(config, dataset.dim, dataset.k, "training data")

    test_path, truth_path = _path(args, cfg, "test"), _path(args, cfg, "truth")
    test = truth = None
    if test_path and truth_path:
        test = lid.load_ivectors(test_path, False)
        _check_compat(config, test.dim, dataset.k, test_path)
        truth = _truth_for(test, lid.load_truth(truth_path, names), truth_path)

    metrics_fh = open(args.metrics, "w", encoding="utf-8") if args.metrics else None
    hook = None
    if test is not None:
        def hook(params, bn):
            return heldout_cost(params, config, objective, test.X, truth)

    def on_epoch(rec):
        if metrics_fh:
            metrics_fh.write(json.dumps(rec, sort_keys=True) + "\n")
            metrics_fh.flush()

    t0 = time.perf_counter()
    try:
        result = train_loop(dataset, config, schedule, objective, eval_hook=hook,
                            on_epoch=on_epoch)
    finally:
        if metrics_fh:
            metrics_fh.close()
    report = RunReport(config=cfg.as_dict(), seed=cfg.seed, epochs=result.history)
    if test is not None:
        scores = _score(predict(result.params, config, test.X, result.bn), truth, dataset.k,
                        cfg.p_oos)
        report.final_challenge_cost = scores["challenge_cost"]
        report.oos_ratio = scores["oos_ratio"]
        report.oos_ratio_postprocessed = scores["oos_ratio_postprocessed"]
        report.postprocessed_challenge_cost = scores["challenge_cost_postprocessed"]
    report.wall_clock = time.perf_counter() - t0
    save_model(args.model, result.params, result.bn, config, names, cfg.p_oos)
    text = report.to_json()
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    last = result.history[-1] if result.history else {}
    print(f"trained {len(result.history)} epochs, final cost {last.get('total')}, "
          f"challenge cost {report.final_challenge_cost}")
    return 0


def cmd_eval(args):
    params, bn, config, header = load_model(args.model)
    names = header["class_names"]
    k = len(names)
    test = lid.load_ivectors(args.test, False)
    if len(test) == 0:
        raise DataError(f"{args.test}: no examples")
    _check_compat(config, test.dim, k, args.test)
    post = predict(params, config, test.X, bn)
    if args.postprocess is not None:
        pred = lid.postprocess_oos(post, args.postprocess)
    else:
        pred = post.argmax(axis=1)
    labels = names + [OOS_NAME]
    if args.predictions:
        with open(args.predictions, "w", encoding="utf-8") as fh:
            fh.writelines(f"{i},{labels[c]}\n" for i, c in zip(test.ids, pred))
    out = {"n": len(test), "oos_ratio": float(np.mean(pred == k))}
    if args.truth:
        truth = _truth_for(test, lid.load_truth(args.truth, names), args.truth)
        p_oos = header["p_oos"] if args.postprocess is None else args.postprocess
        metric = lid.ChallengeMetric(k=k, p_oos=p_oos)
        out["challenge_cost"] = lid.challenge_cost(pred, truth, metric)
        rates = lid.per_class_error(pred, truth, k)
        out["per_class_error"] = {labels[i]: (None if np.isnan(r) else float(r))
                                  for i, r in enumerate(rates)}
    elif args.score:
        raise DataError("scoring requested but no --truth given")
    text = json.dumps(out, indent=1, sort_keys=True)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def cmd_tune(args):
    cfg = _load_config(args)
    if args.baseline:
        cfg.lambdas = tuple(0.0 for _ in cfg.lambdas)
    names = lid.read_class_list(_path(args, cfg, "classes"))
    labeled = lid.load_ivectors(_path(args, cfg, "labeled"), True, names)
    dataset = lid.IvectorDataset(names, labeled, lid.IvectorTable([], np.zeros((0, labeled.dim))))
    config = cfg.ladder_config()
    if config.layer_sizes[0] != dataset.dim:
        raise DataError(f"data dimension {dataset.dim} != network input {config.layer_sizes[0]}")
    split = cfg.split_spec()
    alphas = [float(a) for a in args.alphas.split(",")]
    result = lid.tune_alpha(dataset, alphas, split, config, cfg.schedule(), cfg.objective())
    print("repeat " + " ".join(f"{a:>10g}" for a in result.alphas))
    for r, row in enumerate(result.table):
        print(f"{r:6d} " + " ".join(f"{v:10.3f}" for v in row))
    print("mean   " + " ".join(f"{v:10.3f}" for v in result.means))
    print(f"selected alpha {result.best_alpha:g}")
    return 0


def cmd_gradcheck(args):
    params, config, batch, objective, noise = gradcheck_fixture(
        seed=args.seed, lateral_layers=tuple(range(3)) if args.all_lateral else (0,))
    report = grad_check(params, config, batch, objective, noise, tolerance=args.tolerance)
    for line in report.lines():
        print(line)
    name, err = report.worst
    if report.passed:
        print(f"PASS (worst {name} {err:.3e} < {args.tolerance:g})")
        return 0
    print(f"FAIL: worst offender {name} relative error {err:.3e} >= {args.tolerance:g}")
    return EXIT_NUMERIC


def build_parser():
    p = _Parser(prog="ladderlid", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_config(sp):
        sp.add_argument("-c", "--config", help="key = value config file")
        sp.add_argument("-s", "--set", action="append", metavar="KEY=VALUE",
                        help="override one config key (repeatable)")

    sp = sub.add_parser("synth", help="generate a synthetic i-vector task")
    with_config(sp)
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train", help="train a ladder (or baseline) network")
    with_config(sp)
    for name in ("labeled", "unlabeled", "classes", "test", "truth"):
        sp.add_argument(f"--{name}")
    sp.add_argument("--baseline", action="store_true", help="set every denoising weight to 0")
    sp.add_argument("--model", required=True, help="output model file")
    sp.add_argument("--report", help="output RunReport JSON")
    sp.add_argument("--metrics", help="per-epoch JSON lines")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="predict and score a test set")
    sp.add_argument("--model", required=True)
    sp.add_argument("--test", required=True)
    sp.add_argument("--truth")
    sp.add_argument("--score", action="store_true", help="fail unless truth is available")
    sp.add_argument("--postprocess", type=float, metavar="P_OOS",
                    help="force the out-of-set ratio towards P_OOS")
    sp.add_argument("--predictions", help="output CSV id,predicted_class_name")
    sp.add_argument("--report")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("tune", help="cross-validate alpha on labeled data")
    with_config(sp)
    sp.add_argument("--labeled")
    sp.add_argument("--classes")
    sp.add_argument("--alphas", default="0,0.15")
    sp.add_argument("--baseline", action="store_true")
    sp.set_defaults(func=cmd_tune)

    sp = sub.add_parser("gradcheck", help="finite-difference check on a tiny network")
    sp.add_argument("--tolerance", type=float, default=1e-4)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--all-lateral", action="store_true", help="lateral skips on every layer")
    sp.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
