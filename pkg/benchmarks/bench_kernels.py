"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py --batch 512 --hidden 64,64 --repeat 5

Reports the best wall time for batched forward passes, weight-space Fisher
factors and a full monitor build, once per kernel path.
"""
import argparse
import time

import numpy as np

from scod import _accel, model, monitor
from scod.distributions import CategoricalLogits


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--batch", type=int, default=512)
    p.add_argument("--hidden", default="64,64")
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--T", type=int, default=124)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    hidden = tuple(int(h) for h in args.hidden.split(","))
    config = model.ModelConfig((2, *hidden, args.classes), "tanh")
    family = CategoricalLogits(args.classes)
    w = model.init_weights(config, rng)
    X = rng.normal(size=(args.batch, 2))

    paths = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])
    print(f"N={config.n_weights} batch={args.batch} T={args.T} k={args.k}")
    print(f"{'path':8s} {'forward':>10s} {'factors':>10s} {'build':>10s}")
    results = {}
    for path in paths:
        _accel.USE_NUMBA = path == "numba"
        # warm up (and trigger JIT compilation) outside the timed region
        model.weight_factors(config, w, X[:2], family)
        row = (
            best_of(lambda: model.forward(config, w, X), args.repeat),
            best_of(lambda: model.weight_factors(config, w, X, family), args.repeat),
            best_of(lambda: monitor.build(config, w, family, X, args.T, args.k), args.repeat),
        )
        results[path] = row
        print(f"{path:8s} " + " ".join(f"{t * 1e3:9.2f}ms" for t in row))
    if len(results) == 2:
        speed = np.array(results["numpy"]) / np.array(results["numba"])
        print("speedup  " + " ".join(f"{s:10.2f}x" for s in speed))


if __name__ == "__main__":
    main()
