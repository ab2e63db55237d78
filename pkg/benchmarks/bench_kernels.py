"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the median wall time of each kernel on both backends, the speed-up,
and the largest difference between their outputs.
"""
import argparse
import statistics
import time

import numpy as np

from biteweight import kernels
from biteweight.estimators.svr import rbf_kernel


def cases(rng):
    X = rng.standard_normal((300, 5))
    y = np.sin(X[:, 0]) + 0.1 * rng.standard_normal(300)
    K = rbf_kernel(X, X, 0.5)
    D = np.vstack([rng.standard_normal((2000, 13)) + 4 * rng.standard_normal(13) for _ in range(8)])
    C0 = D[rng.choice(len(D), 16, replace=False)]
    chew = rng.standard_normal(4000)
    return {
        "smo_solve (n=300)": (lambda: kernels.smo_solve(K, y, 10.0, 0.05, 1e-3, 10 ** 6), lambda r: r[0]),
        "lloyd (16000x13, k=16)": (lambda: kernels.lloyd(D, C0.copy(), 100, 1e-6), lambda r: r[0]),
        "assign (16000x13, k=16)": (lambda: kernels.assign(D, C0), lambda r: r[1]),
        "katz_fd (4000 samples) x200": (lambda: [kernels.katz_fd(chew) for _ in range(200)], np.asarray),
    }


def timeit(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = kernels.available()
    print(f"backends: {', '.join(backends)}")
    if "cython" not in backends:
        print("compiled kernels not built; only the Python backend can be timed")
    print(f"{'kernel':30s} {'python':>10s} {'cython':>10s} {'speed-up':>9s} {'max |diff|':>11s}")
    for name, (fn, pick) in cases(np.random.default_rng(0)).items():
        res = {}
        for b in backends:
            with kernels.use_backend(b):
                res[b] = timeit(fn, args.repeat)
        tp, op = res["python"]
        if "cython" in res:
            tc, oc = res["cython"]
            diff = float(np.max(np.abs(np.asarray(pick(op), float) - np.asarray(pick(oc), float))))
            print(f"{name:30s} {tp * 1e3:9.1f}ms {tc * 1e3:9.1f}ms {tp / tc:8.1f}x {diff:11.1e}")
        else:
            print(f"{name:30s} {tp * 1e3:9.1f}ms {'-':>10s}")


if __name__ == "__main__":
    main()
