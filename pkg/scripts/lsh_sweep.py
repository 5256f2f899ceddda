"""Sweep LSH (tables, bits) and report recall@1 against exhaustive cosine and candidate set size.

    python scripts/lsh_sweep.py --names 200 --queries 1000
"""

import argparse
import random
import time

import numpy as np

from retmem.dataset import FIRST_NAMES, LAST_NAMES
from retmem.evaluation import single_edit
from retmem.index import LshIndex, embed

GRID = [(8, 16), (8, 12), (12, 10), (16, 8), (24, 8), (32, 6)]


def sweep(n_names, n_queries, threshold, seed):
    rng = random.Random(seed)
    names = sorted({f"{rng.choice(FIRST_NAMES)} {rng.choice(LAST_NAMES)}" for _ in range(n_names * 3)})[:n_names]
    matrix = np.array([embed(n) for n in names])
    queries = [embed(single_edit(rng.choice(names), rng)) for _ in range(n_queries)]
    oracle = []
    for q in queries:
        s = matrix @ q
        b = int(np.argmax(s))
        oracle.append(names[b] if s[b] >= threshold else None)
    print(f"{'tables':>6} {'bits':>4} {'recall':>7} {'median cand':>11} {'ms/query':>8}")
    for tables, bits in GRID:
        index = LshIndex(n_tables=tables, n_bits=bits)
        for n, e in zip(names, matrix):
            index.insert(1, n, e)
        hits, sizes = 0, []
        t0 = time.perf_counter()
        for q, want in zip(queries, oracle):
            got = index.nearest(1, q, threshold)
            hits += (got[0] if got else None) == want
            sizes.append(index.last_candidates)
        ms = 1000 * (time.perf_counter() - t0) / n_queries
        print(f"{tables:>6} {bits:>4} {hits / n_queries:>7.3f} {int(np.median(sizes)):>11} {ms:>8.3f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--names", type=int, default=200)
    ap.add_argument("--queries", type=int, default=1000)
    ap.add_argument("--threshold", type=float, default=0.7)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    sweep(a.names, a.queries, a.threshold, a.seed)
