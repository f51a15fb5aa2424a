"""Synthetic workloads used by the comparison experiments and the test suite."""
from __future__ import annotations

import random

from .cache_model import CacheGeometry
from .sim import SliceConfig, TraceEvent


def sweep(geometry: CacheGeometry, base: int, nbytes: int, store: bool = False) -> list[TraceEvent]:
    """Touch every block of ``[base, base + nbytes)`` once, in address order."""
    make = TraceEvent.store if store else TraceEvent.load
    return [make(base + off) for off in range(0, nbytes, geometry.block_bytes)]


def half_cache(geometry: CacheGeometry, rounds: int = 8, store: bool = False):
    """Two processes, each sweeping its own half-cache-sized array once per slice.

    Returns ``(traces, slices)``; slice length equals one sweep.
    """
    half = geometry.capacity // 2
    one = sweep(geometry, 0, half, store)
    traces = {"A": one * rounds, "B": sweep(geometry, half, half, store) * rounds}
    return traces, SliceConfig(slice_length=len(one), schedule=("A", "B"))


def aes_like(geometry: CacheGeometry, rounds: int = 12, critical_rounds: tuple = (0,),
             table_bytes: int = 4096, buffer_bytes: int = 8192, seed: int = 0):
    """Encryption-style process next to a background process.

    Each "aes" slice does T-table lookups (loads in key-dependent order) and
    then writes an output buffer.  Only slices listed in ``critical_rounds``
    bracket their lookups with scf=1/scf=0, the way a key-schedule call would
    be marked as the critical segment.  The "bg" process streams stores
    through its own half-cache-sized array.
    """
    rng = random.Random(seed)
    blk = geometry.block_bytes
    table_blocks = table_bytes // blk
    lookups = 2 * table_blocks
    out_base, bg_base = 1 << 24, 1 << 28
    slice_len = lookups + 2 + buffer_bytes // blk
    bg_blocks = geometry.capacity // 2 // blk
    aes, bg = [], []
    for r in range(rounds):
        crit = r in critical_rounds
        aes.append(TraceEvent.scf(1) if crit else TraceEvent.load(0))
        aes += [TraceEvent.load(rng.randrange(table_blocks) * blk) for _ in range(lookups)]
        aes.append(TraceEvent.scf(0) if crit else TraceEvent.load(0))
        aes += sweep(geometry, out_base, buffer_bytes, store=True)
        bg += [TraceEvent.store(bg_base + ((r * slice_len + i) % bg_blocks) * blk) for i in range(slice_len)]
    return {"aes": aes, "bg": bg}, SliceConfig(slice_length=slice_len, schedule=("aes", "bg"))


def random_workload(geometry: CacheGeometry, seed: int, nproc: int | None = None,
                    allow_scf: bool = False, max_events: int = 120):
    """Small seeded multi-process workload for property checks.

    Addresses are drawn from a per-process pool a few times the cache size,
    so hits, conflict misses and dirty evictions all occur.
    """
    rng = random.Random(seed)
    nproc = nproc or rng.randint(1, 4)
    pool_blocks = geometry.num_lines * rng.choice((1, 2, 4))
    traces = {}
    for p in range(nproc):
        events = []
        hot = [rng.randrange(pool_blocks) for _ in range(rng.randint(1, geometry.num_lines))]
        for _ in range(rng.randint(0, max_events)):
            x = rng.random()
            if allow_scf and x < 0.08:
                events.append(TraceEvent.scf(rng.randint(0, 1)))
                continue
            block = rng.choice(hot) if rng.random() < 0.7 else rng.randrange(pool_blocks)
            addr = block * geometry.block_bytes + rng.randrange(geometry.block_bytes)
            events.append(TraceEvent.store(addr) if rng.random() < 0.35 else TraceEvent.load(addr))
        traces[p] = events
    pids = list(traces)
    schedule = tuple(rng.choice(pids) for _ in range(rng.randint(1, 2 * nproc + 1)))
    for p in pids:
        if p not in schedule:
            schedule += (p,)
    return traces, SliceConfig(slice_length=rng.randint(1, 40), schedule=schedule)
