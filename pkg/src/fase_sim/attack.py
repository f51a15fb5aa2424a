"""Prime+Probe against a secret-dependent victim, under each mitigation mode."""
from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .cache_model import CacheGeometry, Latencies
from .errors import ConfigError
from .flush import CostParams, Mode
from .sim import CompiledTrace, Simulator, TraceEvent

ATTACKER = "attacker"
VICTIM = "victim"

# tag ranges keep attacker and victim addresses apart (not required for
# isolation, since lines are owner-tagged, but it keeps traces readable)
ATTACKER_TAG_BASE = 0
VICTIM_TAG_BASE = 1 << 20


def prime(geometry: CacheGeometry, tag_base: int = ATTACKER_TAG_BASE) -> list[TraceEvent]:
    """One load per (set, way): fills every line of the cache, ways in ascending order."""
    return [TraceEvent.load(geometry.address(tag_base + w, s))
            for s in range(geometry.num_sets) for w in range(geometry.num_ways)]


def probe_events(geometry: CacheGeometry, tag_base: int = ATTACKER_TAG_BASE) -> list[TraceEvent]:
    # Reverse order within each set: the primed lines still resident are hit
    # first, so a refill only ever evicts a line the victim brought in and
    # never one of our own still-unprobed lines.
    return [TraceEvent.load(geometry.address(tag_base + w, s))
            for s in range(geometry.num_sets) for w in reversed(range(geometry.num_ways))]


def probe(sim: Simulator, pid=ATTACKER, tag_base: int = ATTACKER_TAG_BASE,
          compiled: CompiledTrace | None = None) -> list[int]:
    """Replay the primed addresses as ``pid`` and return the summed latency per set.

    ``compiled`` is a pre-compiled probe trace, to skip decoding on every sample.
    """
    g = sim.geometry
    events = compiled if compiled is not None else sim.compile(probe_events(g, tag_base))
    sim.extend_trace(pid, events)
    stats = sim.run_slice(pid, len(events), record=True)
    hit, miss = sim.latencies.hit, sim.latencies.miss
    per_set = [0] * g.num_sets
    ways = g.num_ways
    for j, flag in enumerate(stats.hit_flags):
        per_set[j // ways] += hit if flag else miss
    return per_set


@dataclass(frozen=True)
class VictimModel:
    secret: tuple = (0, 2, 3)  # set indices the victim touches
    accesses_per_set: int = 1
    critical: bool = True  # wrap the accesses in scf=1 ... scf=0

    def validate(self, geometry: CacheGeometry) -> None:
        bad = [s for s in self.secret if not 0 <= s < geometry.num_sets]
        if bad:
            raise ConfigError(f"secret set indices {bad} outside 0..{geometry.num_sets - 1}")
        if self.accesses_per_set < 1:
            raise ConfigError("accesses_per_set must be >= 1")

    def trace(self, geometry: CacheGeometry) -> list[TraceEvent]:
        self.validate(geometry)
        events = []
        if self.critical:
            events.append(TraceEvent.scf(1))
        for s in self.secret:
            for k in range(self.accesses_per_set):
                events.append(TraceEvent.load(geometry.address(VICTIM_TAG_BASE + k, s)))
        if self.critical:
            events.append(TraceEvent.scf(0))
        return events


@dataclass(frozen=True)
class AttackConfig:
    geometry: CacheGeometry = CacheGeometry()
    latencies: Latencies = Latencies()
    cost: CostParams = CostParams()
    victim: VictimModel = VictimModel()
    noise: int = 0  # +/- cycles of uniform jitter per matrix entry
    seed: int = 0
    backend: Optional[str] = None


@dataclass
class ProbeMatrix:
    latencies: np.ndarray  # samples x num_sets, summed over ways
    num_ways: int
    hit_latency: int
    miss_latency: int

    @property
    def samples(self) -> int:
        return self.latencies.shape[0]

    @property
    def num_sets(self) -> int:
        return self.latencies.shape[1]

    def set_means(self) -> np.ndarray:
        return self.latencies.mean(axis=0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"set_{s}" for s in range(self.num_sets)])
        w.writerows(row.tolist() for row in self.latencies)
        return buf.getvalue()


@dataclass(frozen=True)
class LeakageScore:
    recovered: tuple
    secret: tuple
    accuracy: float
    exact: bool
    false_positives: int = 0

    def to_csv(self) -> str:
        fmt = lambda sets: " ".join(str(s) for s in sets)  # noqa: E731
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("recovered", "secret", "accuracy", "exact", "false_positives"))
        w.writerow((fmt(self.recovered), fmt(self.secret), f"{self.accuracy:.6f}", int(self.exact),
                    self.false_positives))
        return buf.getvalue()


def run_prime_probe(config: AttackConfig, mode: Mode, samples: int,
                    victim_trace: Sequence[TraceEvent] | None = None) -> ProbeMatrix:
    """Repeat prime -> switch -> victim -> switch -> probe, one matrix row per sample.

    The cache state threads through all samples.  ``victim_trace`` replaces
    the trace generated from ``config.victim``.
    """
    if samples < 1:
        raise ConfigError(f"samples must be >= 1, got {samples}")
    g = config.geometry
    if victim_trace is None:
        victim_trace = config.victim.trace(g)
    sim = Simulator(g, config.latencies, mode, config.cost, backend=config.backend)
    sim.add_process(ATTACKER)
    sim.add_process(VICTIM)
    prime_ev = sim.compile(prime(g))
    victim_ev = sim.compile(victim_trace)
    probe_ev = sim.compile(probe_events(g))
    rows = np.empty((samples, g.num_sets), dtype=np.int64)
    for i in range(samples):
        sim.extend_trace(ATTACKER, prime_ev)
        sim.run_slice(ATTACKER, len(prime_ev))
        sim.context_switch(ATTACKER, VICTIM)
        sim.extend_trace(VICTIM, victim_ev)
        sim.run_slice(VICTIM, len(victim_ev))
        sim.context_switch(VICTIM, ATTACKER)
        rows[i] = probe(sim, compiled=probe_ev)
    if config.noise:
        rng = random.Random(config.seed)
        jitter = np.array([[rng.randint(-config.noise, config.noise) for _ in range(g.num_sets)]
                           for _ in range(samples)], dtype=np.int64)
        rows = np.maximum(rows + jitter, g.num_ways * config.latencies.hit)
    return ProbeMatrix(rows, g.num_ways, config.latencies.hit, config.latencies.miss)


def default_threshold(matrix: ProbeMatrix) -> float:
    """Half of one miss/hit gap: midway between an all-hit set and a set with one eviction."""
    return (matrix.miss_latency - matrix.hit_latency) / 2


def infer_secret(matrix: ProbeMatrix, secret: Sequence[int] = (), threshold: float | None = None) -> LeakageScore:
    """Flag sets whose mean probe time stands out from the quietest set.

    A set counts as victim-accessed when its mean latency exceeds the lowest
    per-set mean by more than ``threshold``.  Uniform matrices (all hits, or
    all misses after a flush) therefore recover nothing.

    accuracy = |recovered & secret| / |secret|; an empty secret scores 1.0
    when nothing is recovered and 0.0 otherwise.
    """
    if matrix.samples == 0:
        raise ConfigError("probe matrix is empty")
    if threshold is None:
        threshold = default_threshold(matrix)
    means = matrix.set_means()
    floor = means.min()
    recovered = tuple(int(s) for s in np.flatnonzero(means - floor > threshold))
    truth = tuple(sorted(set(secret)))
    hits = len(set(recovered) & set(truth))
    if truth:
        accuracy = hits / len(truth)
    else:
        accuracy = 1.0 if not recovered else 0.0
    return LeakageScore(recovered, truth, accuracy, recovered == truth, len(recovered) - hits)
