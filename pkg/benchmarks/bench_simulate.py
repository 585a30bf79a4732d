"""Time the batched UCB simulation kernel: numba loop vs vectorized numpy.

    python3 benchmarks/bench_simulate.py --repeats 2000 -T 20

Both engines are checked for identical outputs before timing.
"""

import argparse
import time

import numpy as np

from vidstory import _accel
from vidstory.kernels import simulate_ucb


def inputs(repeats, T, seed):
    rng = np.random.default_rng(seed)
    tv = np.array([[45, 60, 82, 0], [55, 80, 40, 0], [35, 84, 50, 65]], float)
    valid = (np.arange(4)[None, :] < np.array([3, 3, 4])[:, None]).astype(float)
    noise = rng.standard_normal((repeats, T, 3))
    pv = rng.uniform(0.3, 0.9, (repeats, 3, 4)) * valid
    pp = np.broadcast_to(valid, (repeats, 3, 4)).copy()
    return tv, noise, pv, pp


def best_of(fn, n):
    times = []
    for _ in range(n):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=2000)
    ap.add_argument("-T", type=int, default=20)
    ap.add_argument("--runs", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    tv, noise, pv, pp = inputs(args.repeats, args.T, args.seed)
    engines = ["numpy"] + (["numba"] if _accel.HAS_NUMBA else [])
    outs = {e: simulate_ucb(tv, [3, 3, 4], noise, pv, pp, sigma=5.0, engine=e) for e in engines}  # also warms the JIT
    if len(outs) == 2:
        same = all(np.array_equal(outs["numpy"][k], outs["numba"][k]) for k in outs["numpy"])
        print(f"outputs identical: {same}")
    results = {}
    for e in engines:
        results[e] = best_of(lambda: simulate_ucb(tv, [3, 3, 4], noise, pv, pp, sigma=5.0, engine=e), args.runs)
        steps = args.repeats * args.T
        print(f"{e:>6}: {results[e] * 1e3:8.2f} ms  ({steps / results[e] / 1e6:.2f} M bandit steps/s)")
    if len(results) == 2:
        print(f"speedup numba/numpy: {results['numpy'] / results['numba']:.1f}x")


if __name__ == "__main__":
    main()
