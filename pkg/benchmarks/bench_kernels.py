"""Time the compiled kernels against the numpy fallback on round-sized inputs.

    python benchmarks/bench_kernels.py [--dim 5010] [--clients 20] [--repeat 200]
"""

import argparse
import timeit

import numpy as np

from gmfsim import _pykernels

try:
    from gmfsim import _ckernels
except ImportError:
    _ckernels = None


def cases(dim, clients, rng):
    keep = max(1, dim // 10)
    z = np.abs(rng.standard_normal(dim))
    z_ties = np.round(z, 1)
    idx = np.sort(rng.choice(dim, keep, replace=False)).astype(np.int64)
    msgs_idx = [np.sort(rng.choice(dim, keep, replace=False)).astype(np.int64) for _ in range(clients)]
    msgs_val = [rng.standard_normal(keep) for _ in range(clients)]
    return {
        "topk_indices": lambda k: k.topk_indices(z, keep),
        "topk_indices (ties)": lambda k: k.topk_indices(z_ties, keep),
        "split_by_mask": lambda k: k.split_by_mask(z, idx),
        "sparse_sum": lambda k: k.sparse_sum(msgs_idx, msgs_val, dim, 1.0 / clients),
        "mean_pairwise_jaccard": lambda k: k.mean_pairwise_jaccard(msgs_idx),
    }


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dim", type=int, default=5010)
    ap.add_argument("--clients", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    print(f"dim={args.dim} clients={args.clients} best of {args.repeat}")
    print(f"{'kernel':<24} {'numpy us':>10} {'cython us':>10} {'speedup':>8}")
    for name, call in cases(args.dim, args.clients, rng).items():
        py = best_of(lambda: call(_pykernels), args.repeat) * 1e6
        if _ckernels is None:
            print(f"{name:<24} {py:>10.1f} {'n/a':>10} {'':>8}")
            continue
        cy = best_of(lambda: call(_ckernels), args.repeat) * 1e6
        print(f"{name:<24} {py:>10.1f} {cy:>10.1f} {py / cy:>7.1f}x")


if __name__ == "__main__":
    main()
