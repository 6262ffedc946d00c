"""Benchmark the numba kernels against the pure NumPy/Python fallback.

The hot spots are Gram construction and the grounded-graph forward and
backward sweeps.  With numba enabled each kernel keeps its uncompiled
body on ``.py_func``, so both paths run in one process on identical
inputs and the results are checked for agreement.

Usage:
    python benchmarks/bench_backends.py [--samples 50] [--repeats 30]
"""

import argparse
import time

import numpy as np

from folkm._accel import USING_NUMBA
from folkm.data import SampleSet
from folkm.fol import PredicateSignature, parse_clause_text
from folkm.grounding import _backward_jit, _forward_jit, ground_clause
from folkm.kernels import _gram_rbf_jit, _gram_rbf_numpy


def timeit(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_gram(n, repeats):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((n, 4))
    rows = [("numpy (vectorized rows)", lambda: _gram_rbf_numpy(X, 0.8))]
    if USING_NUMBA:
        _gram_rbf_jit(X[:4], 0.8)  # warm up the JIT
        rows.insert(0, ("numba loops", lambda: _gram_rbf_jit(X, 0.8)))
        rows.append(("python loops (fallback)", lambda: _gram_rbf_jit.py_func(X, 0.8)))
    print(f"\nrbf gram matrix, {n} x {n}:")
    results = {}
    base = None
    for name, fn in rows:
        t = timeit(fn, repeats)
        results[name] = fn()
        base = base or t
        print(f"  {name:<26} {t * 1e3:9.2f} ms   x{base / t:5.1f}")
    vals = list(results.values())
    if len(vals) > 1:
        dev = max(np.abs(v - vals[0]).max() for v in vals[1:])
        print(f"  max deviation between backends: {dev:.2e}")


def bench_graph(n_samples, repeats):
    sigs = [
        PredicateSignature("A", 1, "learnable"),
        PredicateSignature("E", 2, "learnable"),
    ]
    rng = np.random.default_rng(1)
    samples = SampleSet(rng.standard_normal((n_samples, 2)))
    ast = parse_clause_text("forall x forall y: E(x,y) -> A(x)", sigs)
    g = ground_clause(ast, samples, {}, max_groundings=10_000_000)
    raw = rng.uniform(-0.2, 1.2, size=len(g.atoms))
    values = np.empty(g.n_nodes)
    adj = np.zeros(g.n_nodes)
    agrad = np.zeros(len(g.atoms))
    scratch = np.empty(g._max_children)
    args = (g.kinds, g.arg0, g.arg1, g.fconst, g.extra, g.child_idx)

    def forward(fn):
        fn(*args, raw, values)

    def backward(fn):
        adj[:] = 0.0
        agrad[:] = 0.0
        fn(*args, raw, values, 1.0, adj, agrad, scratch)

    print(f"\ngrounded graph, {g.grounding_count} groundings, {g.n_nodes} nodes:")
    forward(_forward_jit)  # warm up / populate values for backward
    grads = {}
    rows = [("forward numba", lambda: forward(_forward_jit)),
            ("backward numba", lambda: backward(_backward_jit))]
    if not USING_NUMBA:
        rows = []
    rows += [("forward python (fallback)",
              lambda: forward(getattr(_forward_jit, "py_func", _forward_jit))),
             ("backward python (fallback)",
              lambda: backward(getattr(_backward_jit, "py_func", _backward_jit)))]
    times = {}
    for name, fn in rows:
        times[name] = timeit(fn, repeats)
        if name.startswith("backward"):
            grads[name] = agrad.copy()
        print(f"  {name:<26} {times[name] * 1e3:9.2f} ms")
    if USING_NUMBA:
        print(f"  forward speedup  x{times['forward python (fallback)'] / times['forward numba']:.1f}")
        print(f"  backward speedup x{times['backward python (fallback)'] / times['backward numba']:.1f}")
        dev = np.abs(grads["backward numba"] - grads["backward python (fallback)"]).max()
        print(f"  max gradient deviation between backends: {dev:.2e}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=50,
                        help="pool size for the graph benchmark (groundings = samples^2)")
    parser.add_argument("--gram-size", type=int, default=800)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    print(f"numba enabled: {USING_NUMBA} (set FOLKM_NO_NUMBA=1 to disable)")
    bench_gram(args.gram_size, args.repeats)
    bench_graph(args.samples, args.repeats)


if __name__ == "__main__":
    main()
