"""Time the compiled kernel against the pure-Python fallback.

    python3 benchmarks/bench_core.py [--repeat N]

Each workload runs once per backend per repeat; the best time is reported.
"""
import argparse
import random
import time
from array import array

from fase_sim import CacheGeometry, Mode, SimConfig, run_simulation
from fase_sim._backend import CoreCompiled, core_class
from fase_sim.attack import AttackConfig, run_prime_probe
from fase_sim.workloads import aes_like, half_cache, random_workload

FULL = CacheGeometry()


_rng = random.Random(7)
_N = 200_000
_KINDS = array("q", (_rng.random() < 0.3 for _ in range(_N)))
_SETS = array("q", (_rng.randrange(FULL.num_sets) for _ in range(_N)))
_TAGS = array("q", (_rng.randrange(24) for _ in range(_N)))
_ZERO = array("q", bytes(8 * _N))


def w_kernel_only(backend):
    # pre-decoded events straight into the kernel, with a flush every 5000
    core = core_class(backend)(FULL.num_sets, FULL.num_ways)
    flags = bytearray(5000)
    for start in range(0, _N, 5000):
        core.run(start // 5000 % 3, _KINDS, _SETS, _TAGS, _ZERO, start, start + 5000, 0, flags)
        core.flush(2, True)


def w_trace_replay(backend):
    traces, slices = random_workload(FULL, seed=1, nproc=4, max_events=20_000)
    run_simulation(SimConfig(traces, FULL, Mode.BASELINE, slices=slices, backend=backend))


def w_half_cache_llsf(backend):
    traces, slices = half_cache(FULL, rounds=40, store=True)
    run_simulation(SimConfig(traces, FULL, Mode.LLSF, slices=slices, backend=backend))


def w_aes_all_modes(backend):
    traces, slices = aes_like(FULL, rounds=24)
    for m in Mode:
        run_simulation(SimConfig(traces, FULL, m, slices=slices, backend=backend))


def w_prime_probe(backend):
    run_prime_probe(AttackConfig(FULL, backend=backend), Mode.LLSF, 200)


WORKLOADS = [w_kernel_only, w_trace_replay, w_half_cache_llsf, w_aes_all_modes, w_prime_probe]


def best_of(fn, backend, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(backend)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    random.seed(0)
    backends = ["python"] + (["cython"] if CoreCompiled is not None else [])
    if len(backends) == 1:
        print("compiled kernel not built; timing the Python fallback only")
    print(f"{'workload':<20}" + "".join(f"{b:>12}" for b in backends) + ("   speedup" if len(backends) > 1 else ""))
    for fn in WORKLOADS:
        times = [best_of(fn, b, args.repeat) for b in backends]
        row = f"{fn.__name__[2:]:<20}" + "".join(f"{t:>11.3f}s" for t in times)
        if len(times) > 1:
            row += f"{times[0] / times[1]:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
