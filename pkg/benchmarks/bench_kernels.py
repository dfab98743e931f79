"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from gvc import _pykernels

try:
    from gvc import _ckernels
except ImportError:
    _ckernels = None


def dijkstra_case(n, density=0.3, seed=0):
    rng = np.random.default_rng(seed)
    L = np.where(rng.random((n, n)) < density, rng.uniform(0.1, 5.0, (n, n)), np.inf)
    np.fill_diagonal(L, np.inf)
    return (L,)


def demean_case(n, groups, k=5, seed=0):
    rng = np.random.default_rng(seed)
    codes = [rng.integers(0, g, n).astype(np.int_) for g in groups]
    return rng.normal(size=(n, k)), codes, list(groups)


CASES = [
    ("dijkstra_all_pairs n=40", "dijkstra_all_pairs", dijkstra_case(40)),
    ("dijkstra_all_pairs n=200", "dijkstra_all_pairs", dijkstra_case(200)),
    ("dijkstra_all_pairs n=600", "dijkstra_all_pairs", dijkstra_case(600)),
    ("demean 2-way n=5k", "demean", demean_case(5_000, (200, 20))),
    ("demean 2-way n=50k", "demean", demean_case(50_000, (2_000, 30))),
    ("demean 3-way n=50k", "demean", demean_case(50_000, (2_000, 50, 30))),
]


def best(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if _ckernels is None:
        print("compiled extension not available; timing the fallback only")
    print(f"{'case':<28}{'python s':>12}{'cython s':>12}{'speedup':>10}")
    for label, name, case in CASES:
        t_py = best(getattr(_pykernels, name), case, args.repeat)
        if _ckernels is None:
            print(f"{label:<28}{t_py:>12.4f}{'-':>12}{'-':>10}")
            continue
        t_c = best(getattr(_ckernels, name), case, args.repeat)
        a, b = getattr(_pykernels, name)(*case), getattr(_ckernels, name)(*case)
        a, b = (a[0], b[0]) if name == "demean" else (a, b)
        assert np.allclose(a, b, atol=1e-9), label
        print(f"{label:<28}{t_py:>12.4f}{t_c:>12.4f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
