"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat N]

Covers greedy book matching at several book sizes and the shared-path
sensitivity matrix on the bundled 33-node feeder and on larger random
radial trees.  Compilation happens once before timing.
"""
import argparse
import time

import numpy as np

from gridmarket.market.kernels import greedy_match
from gridmarket.netmodel import Line, Network, Node
from gridmarket.scenario_io import load_feeder
from gridmarket.vetting import _shared_path_r, _shared_path_r_numpy


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def random_tree(n, rng):
    nodes = [Node(1)] + [Node(i) for i in range(2, n + 1)]
    lines = []
    for i in range(2, n + 1):
        # bias toward long feeders: attach mostly to recent nodes
        parent = int(rng.integers(max(1, i - 4), i))
        lines.append(Line(parent, i, 0.01, 0.01, 1000.0, 1.0))
    return Network(nodes, lines, root=1)


def book(n, rng):
    ap = np.sort(rng.uniform(20, 60, n))
    bp = np.sort(rng.uniform(30, 70, n))[::-1].copy()
    return ap, rng.uniform(1, 10, n), bp, rng.uniform(1, 10, n)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    print(f"{'kernel':<28}{'size':>8}{'numba ms':>12}{'numpy ms':>12}{'ratio':>8}")
    for n in (10, 100, 1000, 10000):
        b = book(n, rng)
        greedy_match(*b, use_numba=True)
        t_nb = best_of(lambda: greedy_match(*b, use_numba=True), args.repeat)
        t_np = best_of(lambda: greedy_match(*b, use_numba=False), args.repeat)
        print(f"{'greedy_match':<28}{n:>8}{t_nb * 1e3:>12.4f}{t_np * 1e3:>12.4f}{t_np / t_nb:>8.1f}")

    nets = [("ieee33", load_feeder("ieee33"))] + [(f"random-{n}", random_tree(n, rng)) for n in (200, 1000)]
    for name, net in nets:
        args_ = (np.asarray(net.bfs_order, dtype=np.int64), net.parent, net.parent_line, net.r, net.path_incidence)
        _shared_path_r(*args_)
        t_nb = best_of(lambda: _shared_path_r(*args_), max(1, args.repeat // 4))
        t_np = best_of(lambda: _shared_path_r_numpy(*args_), max(1, args.repeat // 4))
        print(f"{'shared_path_r ' + name:<28}{net.n_nodes:>8}{t_nb * 1e3:>12.4f}{t_np * 1e3:>12.4f}"
              f"{t_np / t_nb:>8.1f}")


if __name__ == "__main__":
    main()
