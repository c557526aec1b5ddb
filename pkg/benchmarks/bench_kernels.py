"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--rows 1024] [--width 500] [--repeat 20]

Times the three fused kernels at the given batch shape and one full
training step (forward, backward, Adam) on the default 400-500-500-500-100-51
network, once per available backend.
"""
import argparse
import timeit

import numpy as np

from ladderlid import kernels
from ladderlid.ladder import LadderConfig, LadderParams
from ladderlid.training import Batch, Objective, OptimizerState, adam_step, backward


def kernel_cases(rows, width, rng):
    zt, u, g = (rng.normal(size=(rows, width)) for _ in range(3))
    a = rng.normal(size=(10, width))
    z = rng.normal(size=(rows, width))
    std = rng.uniform(0.5, 2.0, size=width)
    return {
        "combinator_forward": lambda: kernels.combinator_forward(zt, u, a),
        "combinator_backward": lambda: kernels.combinator_backward(zt, u, a, g),
        "bn_backward": lambda: kernels.bn_backward(g, z, std, g[0], g[1]),
    }


def step_case(rows, rng):
    config = LadderConfig([400, 500, 500, 500, 100, 51], 0.5)
    params = LadderParams.init(config, np.random.default_rng(0))
    opt = OptimizerState.init(params)
    n_lab = rows // 4
    batch = Batch(rng.normal(size=(rows, 400)), rng.integers(0, 50, size=n_lab))
    objective = Objective()
    step_rng = np.random.default_rng(1)

    def run():
        grads, _ = backward(params, config, batch, objective, rng=step_rng)
        adam_step(params, grads, opt)
    return run


def best_of(fn, repeat):
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=1024)
    ap.add_argument("--width", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    backends = kernels.available()
    previous = kernels.BACKEND
    rng = np.random.default_rng(0)
    cases = dict(kernel_cases(args.rows, args.width, rng))
    cases["train_step"] = step_case(args.rows, rng)
    timings = {}
    for name in backends:
        kernels.use_backend(name)
        for case, fn in cases.items():
            reps = max(3, args.repeat // 4) if case == "train_step" else args.repeat
            timings[case, name] = best_of(fn, reps)
    kernels.use_backend(previous)

    print(f"rows={args.rows} width={args.width} best of {args.repeat}, milliseconds")
    print(f"{'case':<22}" + "".join(f"{b:>12}" for b in backends)
          + ("     speedup" if len(backends) > 1 else ""))
    for case in cases:
        row = [timings[case, b] * 1e3 for b in backends]
        line = f"{case:<22}" + "".join(f"{t:12.3f}" for t in row)
        if "compiled" in backends and "python" in backends:
            line += f"{timings[case, 'python'] / timings[case, 'compiled']:11.2f}x"
        print(line)
    if "compiled" not in backends:
        print("compiled extension not built; only the numpy backend was timed")


if __name__ == "__main__":
    main()
