"""Time the compiled kernels against the numpy fallback on training-sized inputs.

    python benchmarks/bench_kernels.py [--repeat 5] [--users 2000]
"""

import argparse
import timeit

import numpy as np
import scipy.sparse as sp

from sharerec import _pykernels, kernels

try:
    from sharerec import _ckernels
except ImportError:
    _ckernels = None


def make_inputs(users, items, per_user, edges, dim, batch, seed=0):
    rng = np.random.default_rng(seed)
    rows = np.repeat(np.arange(users), per_user)
    cols = rng.integers(0, items, size=len(rows))
    R = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(users, items))
    R.sum_duplicates()
    R.sort_indices()
    er, ec = rng.integers(0, users, size=(2, edges))
    S = sp.csr_matrix((np.ones(edges), (er, ec)), shape=(users, users))
    S = ((S + S.T) > 0).astype(float).tocsr()
    S.sort_indices()
    C = rng.uniform(-1, 1, size=(users, users))
    C = (C + C.T) / 2
    P, Q = rng.normal(size=(users, dim)), rng.normal(size=(items, dim))
    bu = rng.integers(0, users, size=batch)
    seen = np.diff(R.indptr)
    return {
        "jaccard_pairs": (R.indptr, R.indices, er, ec),
        "nth_unseen_items": (R.indptr, R.indices, bu, rng.integers(0, items - seen[bu])),
        "bpr_batch": (P, Q, bu, rng.integers(0, items, batch), rng.integers(0, items, batch)),
        "positive_nonedge_pairs": (C, S.indptr, S.indices),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--users", type=int, default=2000)
    ap.add_argument("--items", type=int, default=3000)
    ap.add_argument("--per-user", type=int, default=30)
    ap.add_argument("--edges", type=int, default=20000)
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--batch", type=int, default=2048)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; only the fallback can be timed")
    inputs = make_inputs(args.users, args.items, args.per_user, args.edges, args.dim, args.batch)
    print(f"{'kernel':<24}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, call_args in inputs.items():
        fn = getattr(kernels, name)
        t_py = min(timeit.repeat(lambda: fn(*call_args, impl=_pykernels), number=1, repeat=args.repeat))
        if _ckernels is None:
            print(f"{name:<24}{t_py * 1e3:>12.2f}{'-':>12}{'-':>10}")
            continue
        t_c = min(timeit.repeat(lambda: fn(*call_args, impl=_ckernels), number=1, repeat=args.repeat))
        print(f"{name:<24}{t_py * 1e3:>12.2f}{t_c * 1e3:>12.2f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
