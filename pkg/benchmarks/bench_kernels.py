"""Time the compiled state recursion against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--n 100000] [--repeat 5]

Both backends run the same simulate and predict calls on the bundled
example system; outputs are compared before timings are reported.
"""

import argparse
import timeit

import numpy as np

from lpvssa import casestudy, kernels
from lpvssa.model import generate


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    model = casestudy.example_model()
    data, v = generate(model, args.n, 0, casestudy.example_signals())
    mats = (model.A, model.B, model.K, model.C, model.D)
    impls = kernels.backends()
    if "cython" not in impls:
        print("compiled backend not built; only the numpy fallback is timed")

    results = {}
    for name, impl in impls.items():
        def sim():
            return kernels.run_simulate(*mats, data.u, data.mu, v, 1e12, impl=impl)

        def pred():
            return kernels.run_predict(*mats, data.u, data.mu, data.y, 1e12, impl=impl)

        results[name] = (sim(), pred())
        t_sim = min(timeit.repeat(sim, number=1, repeat=args.repeat))
        t_pred = min(timeit.repeat(pred, number=1, repeat=args.repeat))
        print(f"{name:>7}: simulate {t_sim * 1e3:9.2f} ms   predict {t_pred * 1e3:9.2f} ms   (N={args.n})")
        results[name] += (t_sim, t_pred)

    if len(results) == 2:
        py, cy = results["python"], results["cython"]
        agree = all(np.allclose(a[0], b[0], rtol=1e-10, atol=1e-12) for a, b in zip(py[:2], cy[:2]))
        print(f"speed-up: simulate x{py[2] / cy[2]:.1f}, predict x{py[3] / cy[3]:.1f}; outputs agree: {agree}")


if __name__ == "__main__":
    main()
