"""Compare the compiled and fallback kernels.

    python bench/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from stratcal import kernels
from stratcal.binning import equal_count_bins
from stratcal.data import FixedLevels, SyntheticSpec, generate_synthetic
from stratcal.sensitivity import mc_metric, mc_verdict_fraction


def workloads(backend):
    gen = np.random.default_rng(0)
    y = np.cumsum(gen.normal(0, 1, 200_000)) + gen.normal(0, 20, 200_000)
    w = np.ones_like(y)
    u = np.sort(gen.uniform(0.005, 0.05, 13_885))
    e = gen.normal(size=u.size) * u
    grid = [equal_count_bins(u.size, n) for n in (15, 50, 150, 400)]
    levels = tuple(np.geomspace(0.004, 0.05, 40))
    d = generate_synthetic(SyntheticSpec(13_885, FixedLevels(levels), 1.1, 0))
    return {
        "pava n=200k": lambda: kernels.pava(y, w, backend),
        "binned moments M=13885 x4 grids": lambda: [kernels.binned_moments(u, e, b, backend)
                                                   for b in grid],
        "mc_metric ENCE N=50 x50 draws": lambda: mc_metric(d, "ENCE", 50, 50, 1, backend=backend),
        "verdict fraction ZVE x20 draws": lambda: mc_verdict_fraction(d, "ZVE", n_draws=20,
                                                                      master_seed=1,
                                                                      backend=backend),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    names = kernels.available_backends()
    if "cython" not in names:
        print("compiled core not built; only the fallback is available")
    times = {}
    for name in names:
        for label, fn in workloads(name).items():
            fn()
            times[label, name] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
    labels = list(dict.fromkeys(label for label, _ in times))
    print(f"{'workload':36s}" + "".join(f"{n:>12s}" for n in names) + "     speedup")
    for label in labels:
        row = [times[label, n] for n in names]
        speed = f"{row[-1] / row[0]:10.1f}x" if len(row) > 1 else ""
        print(f"{label:36s}" + "".join(f"{t * 1e3:10.2f}ms" for t in row) + speed)


if __name__ == "__main__":
    main()
