"""Compiled vs numpy kernels on a trained two-moons MLP.

    python benchmarks/bench_kernels.py [--samples 50] [--repeat 3]

Times forward passes, value-and-gradient calls, one iterative-penalty Adam
run, and a full closest-boundary bisection, then prints the speedups.
"""

import argparse
import time

import numpy as np

from tubecert import _backend, diffnet, oracle, rootfind, strategies
from tubecert.diffnet import ScalarSelector
from tubecert.harness import datasets, train


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _backend.compiled is None:
        raise SystemExit("compiled kernels not built; run `pip install -e . --no-build-isolation`")

    ds = datasets.generate_dataset("two_moons", {"n": 1000, "noise": 0.1}, 7)
    tr, te = ds.split(0.3, 7)
    net = train.train(train.ModelSpec((16, 16), "tanh"), tr.X, tr.y,
                      train.TrainerSpec(epochs=150, seed=7)).net
    cfg = rootfind.RootConfig().for_data(ds.X)
    pts = [(x, int(l)) for x, l in zip(te.X, te.y) if diffnet.predicted_class(net, x) == l][:args.samples]
    sel = ScalarSelector.outer(1)
    pen = oracle.PenaltyConfig()

    cases = {
        "forward x1000": lambda: [diffnet.class_scores(net, x) for x, _ in pts for _ in range(1000 // len(pts))],
        "value+grad x1000": lambda: [diffnet.value_and_gradient(net, x, sel)
                                     for x, _ in pts for _ in range(1000 // len(pts))],
        "penalty adam (c=1)": lambda: [oracle.penalty_descent(net, x, l, 1.0, pen) for x, l in pts[:5]],
        "cb bisection": lambda: [strategies.closest_boundary(net, x, l, "bisection", cfg) for x, l in pts],
    }
    print(f"{'case':<22}{'compiled s':>12}{'python s':>12}{'speedup':>10}")
    for name, fn in cases.items():
        with _backend.use("compiled"):
            tc = best_of(fn, args.repeat)
        with _backend.use("python"):
            tp = best_of(fn, args.repeat)
        print(f"{name:<22}{tc:>12.4f}{tp:>12.4f}{tp / tc:>9.1f}x")
    # sanity: both backends agree on the penalty run
    x, l = pts[0]
    with _backend.use("compiled"):
        a = oracle.penalty_descent(net, x, l, 1.0, pen)
    with _backend.use("python"):
        b = oracle.penalty_descent(net, x, l, 1.0, pen)
    print(f"penalty result |delta_c - delta_py| = {np.linalg.norm(a[0] - b[0]):.2e}, iters {a[2]} vs {b[2]}")


if __name__ == "__main__":
    main()
