"""Compare the numba and numpy backends of the normal-form lattice kernels.

Run with ``python benchmarks/bench_kernels.py``. Each line reports the best
of several repeats and the max difference between the two backends.
"""

import argparse
import time

import numpy as np

from ilwlab import _kernels
from ilwlab.spectral import make_grid


def _best(fn, repeat):
    fn()  # warm-up (triggers compilation)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def _random(rng, n, positive=False):
    c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    if positive:
        c[make_grid(n).indices < 1] = 0
    return c


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="32,64,128,256")
    ap.add_argument("--tri-sizes", default="16,32,64")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _kernels.HAS_NUMBA:
        print("numba not available; only the numpy backend can run")
        return
    rng = np.random.default_rng(0)
    shells = np.zeros(5)
    print(f"{'kernel':<10}{'n':>6}{'numba [ms]':>14}{'numpy [ms]':>14}{'speedup':>10}{'max diff':>12}")
    for n in (int(x) for x in args.sizes.split(",")):
        idx = make_grid(n).indices
        w, v = _random(rng, n, True), _random(rng, n)
        res = {}
        for b in ("numba", "numpy"):
            res[b] = _kernels.bilinear(2, w, v, idx, 10.0, 0.3, shells, b)
            res[b + "_t"] = _best(lambda b=b: _kernels.bilinear(2, w, v, idx, 10.0, 0.3, shells, b), args.repeat)
        diff = np.max(np.abs(res["numba"] - res["numpy"]))
        print(f"{'bilinear':<10}{n:>6}{1e3 * res['numba_t']:>14.3f}{1e3 * res['numpy_t']:>14.3f}"
              f"{res['numpy_t'] / res['numba_t']:>10.1f}{diff:>12.2e}")
    for n in (int(x) for x in args.tri_sizes.split(",")):
        idx = make_grid(n).indices
        w, v1, v2 = _random(rng, n, True), _random(rng, n), _random(rng, n)
        res = {}
        for b in ("numba", "numpy"):
            res[b] = _kernels.trilinear(4, w, v1, v2, idx, 10.0, 0.3, shells, b)[0]
            res[b + "_t"] = _best(
                lambda b=b: _kernels.trilinear(4, w, v1, v2, idx, 10.0, 0.3, shells, b), args.repeat
            )
        diff = np.max(np.abs(res["numba"] - res["numpy"]))
        print(f"{'trilinear':<10}{n:>6}{1e3 * res['numba_t']:>14.3f}{1e3 * res['numpy_t']:>14.3f}"
              f"{res['numpy_t'] / res['numba_t']:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
