"""Time the max-min kernel, compiled against pure Python, on random route sets.

    python benchmarks/bench_waterfill.py --routes 400 --edges 60 --repeat 20
"""

import argparse
import timeit

import numpy as np

from interdc import kernels


def random_instance(rng, routes, edges, hops):
    lengths = rng.integers(1, hops + 1, size=routes)
    ptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    flat = np.concatenate([rng.choice(edges, size=k, replace=False) for k in lengths]).astype(np.int64)
    avail = rng.uniform(0.1, 1.0, size=edges)
    caps = np.where(rng.random(routes) < 0.3, rng.uniform(0.01, 0.2, size=routes), np.inf)
    return ptr, flat, avail, caps


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--routes", type=int, default=400)
    parser.add_argument("--edges", type=int, default=60)
    parser.add_argument("--hops", type=int, default=5)
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    args_tuple = random_instance(np.random.default_rng(args.seed), args.routes, args.edges, args.hops)
    backends = {"python": kernels.waterfill_python}
    if kernels.waterfill_compiled is not None:
        backends["compiled"] = kernels.waterfill_compiled
    results = {}
    for name, fn in backends.items():
        per_call = min(timeit.repeat(lambda: fn(*args_tuple), number=1, repeat=args.repeat))
        results[name] = np.asarray(fn(*args_tuple))
        print(f"{name:>9}: {per_call * 1e3:8.3f} ms per call")
    if len(results) == 2:
        assert np.allclose(results["python"], results["compiled"], atol=1e-12)
        print("backends agree")


if __name__ == "__main__":
    main()
