"""Time the numba kernels against the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--quick]

Each kernel runs once untimed first so numba compilation is excluded. Results
are also checked for agreement between the two backends.
"""
import argparse
import time

import numpy as np

from weightscope import kernels


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng, quick):
    scale = 1 if quick else 2
    a = rng.standard_normal((64 * scale, 784))
    b = rng.standard_normal((784, 100))
    x = rng.standard_normal((500 * scale, 60))
    cov = np.cov(x, rowvar=False)
    pts = rng.standard_normal((2000 * scale, 10))
    eps = 2.5
    indptr, indices = kernels.radius_neighbors(pts, eps)
    return {
        "matmul": lambda m: m.matmul(a, b),
        "jacobi_eigh": lambda m: m.jacobi_eigh(cov, 1e-12, 100)[0],
        "radius_neighbors": lambda m: m.radius_neighbors(pts, eps)[1],
        "knn_distances": lambda m: m.knn_distances(pts, 5),
        "dbscan_expand": lambda m: m.dbscan_expand(indptr, indices, 3)[0],
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--quick", action="store_true", help="smaller inputs")
    args = parser.parse_args()

    backends = kernels.backends()
    if "numba" not in backends:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}  agree")
    for name, run in cases(rng, args.quick).items():
        t_nb = best_of(lambda: run(backends["numba"]), args.repeat)
        t_np = best_of(lambda: run(backends["numpy"]), args.repeat)
        got_nb, got_np = run(backends["numba"]), run(backends["numpy"])
        agree = np.allclose(got_nb, got_np, rtol=1e-10, atol=1e-12)
        print(f"{name:<18}{t_nb * 1e3:>12.2f}{t_np * 1e3:>12.2f}{t_np / t_nb:>9.1f}x  {agree}")


if __name__ == "__main__":
    main()
