"""Compare the compiled and pure-Python quadrature kernels.

Times CDF and integrated-CDF evaluations on weight sets shaped like the
ones the active learning loop produces (M = 12 and 20 outputs) and reports
the largest disagreement between the two backends.

Usage: python benchmarks/bench_backends.py [--cases N] [--repeat R]
"""
import argparse
import time

import numpy as np

from invbo import _backend


def cases(n, M, seed):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        # a few dominant directions and a long tail, as in fitted posteriors
        lam = np.sort(10.0 ** rng.uniform(-5, 0.5, M))[::-1].copy()
        nc = 10.0 ** rng.uniform(-2, 2.5, M)
        mean = float(np.sum(lam * (1 + nc)))
        yield lam, nc, mean * 10.0 ** rng.uniform(-1.5, 0.3)


def time_calls(fn, args_list, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = [fn(*a) for a in args_list]
        best = min(best, time.perf_counter() - t0)
    return best / len(args_list), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--cases", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _backend.COMPILED:
        print("compiled kernel not built; only the Python backend is available")
    print(f"{'M':>3} {'operation':<10} " + " ".join(f"{b:>12}" for b in _backend.BACKENDS)
          + "   speedup   max |diff|")
    for M in (12, 20):
        data = list(cases(args.cases, M, seed=M))
        ops = {
            "cdf": [(lam, nc, x, 1e-9) for lam, nc, x in data],
            "contour": [(lam, nc, x, 1e-10 * x) for lam, nc, x in data],
            "simpson": [(lam, nc, x, 1e-6, 1e-12, 2**14, 1e-10) for lam, nc, x in data[:10]],
        }
        fns = {"cdf": "cdf_weighted", "contour": "ei_contour", "simpson": "ei_simpson"}
        for op, op_args in ops.items():
            times, values = {}, {}
            for b in _backend.BACKENDS:
                k = _backend.get(b)
                times[b], out = time_calls(getattr(k, fns[op]), op_args, args.repeat)
                values[b] = np.array([o[0] for o in out])
            cols = " ".join(f"{times[b] * 1e3:10.3f}ms" for b in _backend.BACKENDS)
            if len(_backend.BACKENDS) == 2:
                speed = times["python"] / times["compiled"]
                diff = float(np.max(np.abs(values["python"] - values["compiled"])))
                print(f"{M:>3} {op:<10} {cols} {speed:8.1f}x   {diff:.1e}")
            else:
                print(f"{M:>3} {op:<10} {cols}")


if __name__ == "__main__":
    main()
