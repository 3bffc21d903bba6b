"""Compare the compiled and numpy ball-sum kernels behind the Morrey norm.

    python3 benchmarks/bench_kernels.py --n 16 32 --stride 4 2 --repeat 5
"""

import argparse
import timeit

import numpy as np

from micropolar import _ballsum_py, kernels
from micropolar.norms import _ball_geometry, _centers, morrey_radii
from micropolar.spectral import Grid


def _inputs(n, stride, seed=0):
    grid = Grid(n)
    cells = tuple(r / grid.spacing for r in morrey_radii(grid))
    offsets, breaks = _ball_geometry(n, cells)
    centers = _centers(n, stride)
    weights = np.random.default_rng(seed).random(grid.shape) ** 2
    return weights, centers, offsets, breaks


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, nargs="+", default=[16, 32])
    ap.add_argument("--stride", type=int, nargs="+", default=[4, 2])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = {"numpy": _ballsum_py.ball_sums}
    if kernels.BACKEND == "cython":
        backends["cython"] = kernels.ball_sums
    else:
        print("compiled kernel unavailable; timing the numpy fallback only")

    print(f"{'n':>4} {'stride':>6} {'centers':>8} {'offsets':>8} " + " ".join(f"{b + ' ms':>11}" for b in backends)
          + f" {'speedup':>8} {'max diff':>9}")
    for n in args.n:
        for stride in args.stride:
            inp = _inputs(n, stride)
            times, results = {}, {}
            for name, fn in backends.items():
                results[name] = fn(*inp)
                times[name] = min(timeit.repeat(lambda: fn(*inp), number=1, repeat=args.repeat)) * 1e3
            speed = times["numpy"] / times["cython"] if "cython" in times else float("nan")
            diff = float(np.abs(results["numpy"] - results.get("cython", results["numpy"])).max())
            print(f"{n:>4} {stride:>6} {len(inp[1]):>8} {int(inp[3].max()):>8} "
                  + " ".join(f"{times[b]:>11.2f}" for b in backends) + f" {speed:>8.1f} {diff:>9.1e}")


if __name__ == "__main__":
    main()
