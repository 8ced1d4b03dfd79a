"""Time the numba kernels against their numpy twins and check they agree.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--json out.json]
"""
import argparse
import json
import time

import numpy as np

from cfgdrift import kernels


def _time(fn, args, repeat):
    fn(*args)  # warm-up (triggers JIT compilation)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _adam_args(rng, n):
    return (rng.normal(size=n), rng.normal(size=n), np.zeros(n), np.zeros(n),
            1e-3, 0.9, 0.999, 0.1, 0.001, 1e-8)


def cases(rng):
    n_nodes, n_edges, d = 4000, 12000, 64
    rows = rng.integers(0, n_nodes, n_edges)
    cols = rng.integers(0, n_nodes, n_edges)
    vals = rng.random(n_edges)
    H = rng.normal(size=(n_nodes, d))
    offsets = np.unique(np.r_[0, rng.integers(1, n_nodes, 200), n_nodes]).astype(np.int64)
    X = rng.normal(size=(300, 32))
    D = kernels.pairwise_dist_exact_numpy(X)
    labels = rng.integers(0, 5, 300)
    Z = rng.normal(size=(300, 8))
    Q = np.exp(-0.1 * kernels.pairwise_sqdist_numpy(Z, Z))
    return {
        "coo_matmul": ((rows, cols, vals, H, n_nodes), {}),
        "segment_sum": ((H, offsets), {}),
        "pairwise_sqdist": ((X, X), {}),
        "pairwise_dist_exact": ((X,), {}),
        "label_distance_sums": ((D, labels, 5), {}),
        "smo_one_class": ((Q, 30.0, 1e-4, 100000), {}),
        "adam_update": (_adam_args(rng, 200_000), {"inplace": True}),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json")
    args = ap.parse_args(argv)

    if kernels.numba is None:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(args.seed)
    results = []
    print(f"{'kernel':<22}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}  max|diff|")
    for name, (fargs, opts) in cases(rng).items():
        f_np = getattr(kernels, f"{name}_numpy")
        f_nb = getattr(kernels, f"{name}_numba")
        if opts.get("inplace"):
            a_np = [a.copy() if isinstance(a, np.ndarray) else a for a in fargs]
            a_nb = [a.copy() if isinstance(a, np.ndarray) else a for a in fargs]
            f_np(*a_np)
            f_nb(*a_nb)
            diff = float(np.max(np.abs(a_np[0] - a_nb[0])))
        else:
            out_np, out_nb = f_np(*fargs), f_nb(*fargs)
            first = lambda o: o[0] if isinstance(o, tuple) else o
            diff = float(np.max(np.abs(first(out_np) - first(out_nb))))
        t_np = _time(f_np, fargs, args.repeat)
        t_nb = _time(f_nb, fargs, args.repeat)
        results.append({"kernel": name, "numpy_s": t_np, "numba_s": t_nb, "max_abs_diff": diff})
        print(f"{name:<22}{t_np * 1e3:>10.3f}{t_nb * 1e3:>10.3f}{t_np / t_nb:>8.1f}x  {diff:.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
