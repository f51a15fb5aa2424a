"""Multi-process execution: time slices, flush points at context switches,
csr.scf save/restore, and cycle accounting including the cold-cache penalty.
"""
from __future__ import annotations

import csv
import io
import logging
from array import array
from dataclasses import dataclass, field
from enum import Enum
from typing import Hashable, Iterable, Optional, Sequence

from .cache_model import CacheGeometry, CacheState, Coherence, Latencies, decompose
from .errors import ConfigError
from .flush import CostParams, FlushReport, Mode, flush

log = logging.getLogger(__name__)

# compiled event kinds, shared with the kernels
_EV_LOAD, _EV_STORE, _EV_SCF, _EV_FORCE = 0, 1, 2, 3


class EventKind(Enum):
    LOAD = "load"
    STORE = "store"
    SCF = "scf"
    FORCE = "force"


@dataclass(frozen=True)
class TraceEvent:
    kind: EventKind
    address: int = 0
    scf_value: int = 0
    forced: Optional[tuple] = None  # (set, way, Coherence), test traces only

    def __post_init__(self):
        if self.kind is EventKind.SCF and self.scf_value not in (0, 1):
            raise ConfigError(f"scf writes take 0 or 1, got {self.scf_value!r}")

    @classmethod
    def load(cls, address):
        return cls(EventKind.LOAD, address)

    @classmethod
    def store(cls, address):
        return cls(EventKind.STORE, address)

    @classmethod
    def scf(cls, value):
        return cls(EventKind.SCF, scf_value=value)

    @classmethod
    def force(cls, set_index, way, state):
        if isinstance(state, str):
            state = Coherence.parse(state)
        return cls(EventKind.FORCE, forced=(set_index, way, Coherence(state)))

    @property
    def is_access(self):
        return self.kind in (EventKind.LOAD, EventKind.STORE)


@dataclass
class Process:
    pid: Hashable
    owner: int  # owner id used in the cache's tag array
    trace: list = field(default_factory=list)
    cursor: int = 0
    csr_scf: int = 0
    saved_scf: int = 0
    idle: bool = False  # scheduled placeholder with no events of its own
    kinds: array = field(default_factory=lambda: array("q"))
    arg_a: array = field(default_factory=lambda: array("q"))
    arg_b: array = field(default_factory=lambda: array("q"))
    arg_c: array = field(default_factory=lambda: array("q"))

    @property
    def remaining(self) -> int:
        return len(self.trace) - self.cursor


@dataclass(frozen=True)
class CompiledTrace:
    events: list
    kinds: array
    arg_a: array
    arg_b: array
    arg_c: array

    def __len__(self):
        return len(self.events)


@dataclass(frozen=True)
class SliceConfig:
    slice_length: int = 1000
    schedule: tuple = ()
    total_slices: Optional[int] = None

    def __post_init__(self):
        if self.slice_length < 1:
            raise ConfigError(f"slice_length must be >= 1, got {self.slice_length}")
        if self.total_slices is not None and self.total_slices < 0:
            raise ConfigError("total_slices must be >= 0")


@dataclass(frozen=True)
class SliceStats:
    events_run: int
    hits: int
    misses: int
    cycles: int
    hit_flags: Optional[bytes] = None


@dataclass(frozen=True)
class SwitchStats:
    flush_report: Optional[FlushReport]
    switch_cycles: int


@dataclass
class SimReport:
    mode: Mode
    total_cycles: int
    access_cycles: int
    flush_cycles: int
    switch_cycles: int
    hits: int
    misses: int
    writebacks_on_eviction: int
    cold_miss_penalty: int
    slices_run: int
    switches: int
    per_flush: list
    per_process_cycles: dict
    pre_flush_occupancy: list = field(default_factory=list)

    @property
    def lines_flushed(self) -> int:
        return sum(r.lines_flushed for r in self.per_flush)

    @property
    def lines_valid_at_flush(self) -> int:
        """Lines a naive flush would have cleaned, summed over this run's own flush points."""
        return sum(v for v, _ in self.pre_flush_occupancy)

    def summary_rows(self):
        return [
            ("mode", self.mode.value),
            ("total_cycles", self.total_cycles),
            ("access_cycles", self.access_cycles),
            ("flush_cycles", self.flush_cycles),
            ("switch_cycles", self.switch_cycles),
            ("hits", self.hits),
            ("misses", self.misses),
            ("writebacks_on_eviction", self.writebacks_on_eviction),
            ("cold_miss_penalty", self.cold_miss_penalty),
            ("flush_events", len(self.per_flush)),
            ("lines_flushed", self.lines_flushed),
            ("slices_run", self.slices_run),
            ("switches", self.switches),
        ]

    def summary_csv(self) -> str:
        return _rows_csv(("key", "value"), self.summary_rows())

    def per_flush_csv(self) -> str:
        from .flush import flush_reports_to_csv
        return flush_reports_to_csv(self.per_flush)

    def per_process_csv(self) -> str:
        return _rows_csv(("pid", "cycles"), [(str(p), c) for p, c in self.per_process_cycles.items()])

    def to_csv(self) -> str:
        return "\n".join([
            "# summary", self.summary_csv(),
            "# per-flush", self.per_flush_csv(),
            "# per-process", self.per_process_csv(),
        ])


def _rows_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


class Simulator:
    """Single-core machine running owner-tagged processes on one L1 D-cache."""

    def __init__(self, geometry: CacheGeometry | None = None, latencies: Latencies | None = None,
                 mode: Mode = Mode.BASELINE, cost: CostParams | None = None,
                 switch_overhead: int = 0, backend: str | None = None):
        self.geometry = geometry or CacheGeometry()
        self.latencies = latencies or Latencies()
        self.mode = mode
        self.cost = cost or CostParams()
        if switch_overhead < 0:
            raise ConfigError("switch_overhead must be >= 0")
        self.switch_overhead = switch_overhead
        self.cache = CacheState(self.geometry, self.latencies, backend=backend)
        self.processes: dict = {}
        self.flush_reports: list[FlushReport] = []
        # (valid, dirty) lines just before each flush event: what a naive
        # flush of that same state would have cleaned
        self.pre_flush_occupancy: list[tuple] = []
        self.access_cycles = 0
        self.flush_cycles = 0
        self.switch_cycles = 0
        self.slices_run = 0
        self.switches = 0
        self.per_process_cycles: dict = {}
        self._cold_pending: set = set()
        self._cold_penalty = 0

    def add_process(self, pid: Hashable, trace: Iterable[TraceEvent] = (), idle: bool = False) -> Process:
        if pid in self.processes:
            raise ConfigError(f"process {pid!r} registered twice")
        proc = Process(pid, owner=len(self.processes), idle=idle)
        self.cache.register(proc.owner)
        self.processes[pid] = proc
        self.per_process_cycles[pid] = 0
        self.extend_trace(pid, trace)
        return proc

    def process(self, pid) -> Process:
        try:
            return self.processes[pid]
        except KeyError:
            raise ConfigError(f"unknown process id {pid!r}") from None

    def compile(self, events: Iterable[TraceEvent]) -> "CompiledTrace":
        """Decode events against this cache's geometry once, for repeated appends."""
        g = self.geometry
        out = CompiledTrace([], array("q"), array("q"), array("q"), array("q"))
        for ev in events:
            if ev.kind is EventKind.SCF:
                row = (_EV_SCF, ev.scf_value, 0, 0)
            elif ev.kind is EventKind.FORCE:
                s, w, st = ev.forced
                if not (0 <= s < g.num_sets and 0 <= w < g.num_ways):
                    raise ConfigError(f"force target set={s} way={w} outside the cache")
                row = (_EV_FORCE, s, w, int(st))
            else:
                parts = decompose(ev.address, g)
                row = (_EV_STORE if ev.kind is EventKind.STORE else _EV_LOAD, parts.set_index, parts.tag, 0)
            out.events.append(ev)
            out.kinds.append(row[0])
            out.arg_a.append(row[1])
            out.arg_b.append(row[2])
            out.arg_c.append(row[3])
        return out

    def extend_trace(self, pid, events: "Iterable[TraceEvent] | CompiledTrace") -> None:
        proc = self.process(pid)
        if not isinstance(events, CompiledTrace):
            events = self.compile(events)
        proc.trace.extend(events.events)
        proc.kinds.extend(events.kinds)
        proc.arg_a.extend(events.arg_a)
        proc.arg_b.extend(events.arg_b)
        proc.arg_c.extend(events.arg_c)

    def run_slice(self, pid, budget: int, record: bool = False) -> SliceStats:
        """Run up to ``budget`` events of ``pid``'s trace on the cache."""
        proc = self.process(pid)
        n = max(0, min(budget, proc.remaining))
        if n == 0:
            return SliceStats(0, 0, 0, 0, b"" if record else None)
        start = proc.cursor
        flags = bytearray(n)
        hits, misses, _, proc.csr_scf = self.cache.run_compiled(
            proc.owner, proc.kinds, proc.arg_a, proc.arg_b, proc.arg_c,
            start, start + n, proc.csr_scf, flags)
        proc.cursor += n
        if misses and self._cold_pending:
            self._attribute_cold(proc, start, flags)
        cycles = hits * self.latencies.hit + misses * self.latencies.miss
        self.access_cycles += cycles
        self.per_process_cycles[pid] += cycles
        return SliceStats(n, hits, misses, cycles, bytes(flags) if record else None)

    def _attribute_cold(self, proc, start, flags):
        # A flushed block is invalid, so its first re-access is always a miss;
        # looking at misses alone is enough.
        pending = self._cold_pending
        kinds, a, b = proc.kinds, proc.arg_a, proc.arg_b
        for off, hit in enumerate(flags):
            k = start + off
            if hit or kinds[k] > _EV_STORE:
                continue
            key = (proc.owner, b[k], a[k])
            if key in pending:
                pending.discard(key)
                self._cold_penalty += self.latencies.gap
                if not pending:
                    break

    def context_switch(self, from_pid, to_pid) -> SwitchStats:
        """Flush point between two slices; saves/restores csr.scf as process context."""
        src = self.process(from_pid)
        dst = self.process(to_pid)
        src.saved_scf, src.csr_scf = src.csr_scf, 0
        report = None
        cycles = self.switch_overhead
        if self.mode.flushes:
            flushed = []
            self.pre_flush_occupancy.append(self.cache.core.occupancy())
            report = flush(self.cache, self.mode, self.cost, collect=flushed)
            self._cold_pending = set(flushed)
            self.flush_reports.append(report)
            self.flush_cycles += report.cycles
            cycles += report.cycles
        dst.csr_scf = dst.saved_scf
        self.switches += 1
        self.switch_cycles += cycles
        return SwitchStats(report, cycles)

    def cold_cache_penalty(self) -> int:
        return self._cold_penalty

    @property
    def total_cycles(self) -> int:
        return self.access_cycles + self.switch_cycles

    def report(self) -> SimReport:
        return SimReport(
            mode=self.mode,
            total_cycles=self.total_cycles,
            access_cycles=self.access_cycles,
            flush_cycles=self.flush_cycles,
            switch_cycles=self.switch_cycles,
            hits=self.cache.hits,
            misses=self.cache.misses,
            writebacks_on_eviction=self.cache.writebacks,
            cold_miss_penalty=self._cold_penalty,
            slices_run=self.slices_run,
            switches=self.switches,
            per_flush=list(self.flush_reports),
            per_process_cycles=dict(self.per_process_cycles),
            pre_flush_occupancy=list(self.pre_flush_occupancy),
        )


@dataclass(frozen=True)
class SimConfig:
    traces: dict  # pid -> list[TraceEvent], in registration order
    geometry: CacheGeometry = CacheGeometry()
    mode: Mode = Mode.BASELINE
    cost: CostParams = CostParams()
    latencies: Latencies = Latencies()
    slices: SliceConfig = SliceConfig()
    switch_overhead: int = 0
    backend: Optional[str] = None


def _schedule_for(config: SimConfig) -> Sequence:
    schedule = tuple(config.slices.schedule) or tuple(config.traces)
    if not schedule:
        raise ConfigError("schedule is empty")
    unknown = [p for p in schedule if p not in config.traces]
    if unknown:
        raise ConfigError(f"schedule names processes without a trace: {unknown}")
    missing = [p for p, t in config.traces.items() if t and p not in schedule]
    if missing:
        raise ConfigError(f"processes with events are not in the schedule: {missing}")
    return schedule


def run_simulation(config: SimConfig, sim: Simulator | None = None) -> SimReport:
    """Round-robin the schedule until every trace is consumed or total_slices is hit.

    A process switch (and thus a flush point) happens whenever the next slice
    belongs to a different process than the last one.  Processes with an empty
    trace are idle placeholders (e.g. a kernel pid): they still take a slot in
    the rotation, so they still cause flush points.
    """
    schedule = _schedule_for(config)
    if sim is None:
        sim = Simulator(config.geometry, config.latencies, config.mode, config.cost,
                        config.switch_overhead, config.backend)
    for pid, trace in config.traces.items():
        sim.add_process(pid, trace, idle=len(trace) == 0)
    limit = config.slices.total_slices
    current = None
    pos = 0
    while limit is None or sim.slices_run < limit:
        if not any(sim.processes[p].remaining for p in schedule):
            break
        while True:
            pid = schedule[pos % len(schedule)]
            pos += 1
            proc = sim.processes[pid]
            if proc.remaining or proc.idle:
                break
        if current is not None and current != pid:
            sim.context_switch(current, pid)
        sim.run_slice(pid, config.slices.slice_length)
        sim.slices_run += 1
        current = pid
    report = sim.report()
    log.info("simulation done: mode=%s cycles=%d flushes=%d", config.mode.value,
             report.total_cycles, len(report.per_flush))
    return report
