#!/usr/bin/env python3
"""Time the numba kernels against their pure-numpy fallbacks.

Workloads mirror real use: the fused train pass at the standard corpus
shape, the LCS batch behind one homogenization call, one full training
epoch, and one full evaluation. Run after `pip install -e .`:

    python3 benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import time

import numpy as np

from ddsi import kernels
from ddsi.corpus import SyntheticConfig, generate_synthetic
from ddsi.metrics import evaluate
from ddsi.model import init_model
from ddsi.train import TrainConfig, train


def timeit(fn, repeats):
    fn()  # warmup (JIT compile on the numba path)
    best = min(timed(fn) for _ in range(repeats))
    return best


def timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def bench(repeats):
    corpus, train_q, test_q = generate_synthetic(SyntheticConfig())
    cfg = TrainConfig(alpha=0.5)
    params = init_model(corpus.vocab.size, cfg.dim, corpus.num_docs, cfg.seed)

    batch = train_q[: cfg.batch_size]
    tok, lengths = kernels.pack_token_matrix([q.tokens for q in batch])
    golds = np.array([q.gold_docid for q in batch], dtype=np.int64)

    doc_tok, doc_lengths = kernels.pack_token_matrix([d.tokens for d in corpus.documents[:10]])
    pa, pb = (x.astype(np.int64) for x in np.triu_indices(10, k=1))

    workloads = {
        "train_pass (batch=32, N=200, d=64)": lambda: kernels.train_pass(
            *params.arrays(), tok, lengths, golds, cfg.k, cfg.alpha
        ),
        "lcs_pairs (45 pairs of 60 tokens)": lambda: kernels.lcs_lengths_pairs(doc_tok, doc_lengths, pa, pb),
        "train 1 epoch (787 queries)": lambda: train(
            corpus, train_q, TrainConfig(alpha=0.5, epochs=1)
        ),
        "evaluate (213 queries, cutoff 10)": lambda: evaluate(params, test_q, corpus),
    }

    results = {}
    for backend in ("numpy", "numba") if kernels.HAS_NUMBA else ("numpy",):
        kernels.set_backend(backend)
        for name, fn in workloads.items():
            results.setdefault(name, {})[backend] = timeit(fn, repeats)

    width = max(len(n) for n in workloads)
    header = f"{'workload'.ljust(width)}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, times in results.items():
        np_t = times["numpy"]
        if "numba" in times:
            nb_t = times["numba"]
            print(f"{name.ljust(width)}  {np_t * 1e3:9.2f}ms  {nb_t * 1e3:9.2f}ms  {np_t / nb_t:7.1f}x")
        else:
            print(f"{name.ljust(width)}  {np_t * 1e3:9.2f}ms  {'n/a':>10}  {'':>8}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3, help="best-of-N timing")
    args = parser.parse_args()
    if not kernels.HAS_NUMBA:
        print("numba not installed; timing the numpy path only")
    bench(args.repeats)
