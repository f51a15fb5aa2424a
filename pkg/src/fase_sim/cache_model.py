"""Set-associative L1 data cache with coherence metadata and selective-flush state.

Only metadata is simulated: each line carries an owner process id, an
address tag, a MESI state, the per-line FaSe bit and an LRU stamp.  The
cache also holds the single CLSF flag.  Lines are owner-tagged, so a
process can never hit a line installed by another process.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Iterable, Iterator, Optional

from ._backend import core_class
from .errors import ConfigError

ADDRESS_BITS = 64


class Coherence(IntEnum):
    """MESI state; the integer value is the two-bit tag-array encoding."""

    I = 0  # noqa: E741
    S = 1
    E = 2
    M = 3

    @property
    def bits(self) -> str:
        return format(int(self), "02b")

    @property
    def valid(self) -> bool:
        return self is not Coherence.I

    @property
    def dirty(self) -> bool:
        return self is Coherence.M

    @classmethod
    def parse(cls, text: str) -> "Coherence":
        key = text.strip().upper()
        if key in cls.__members__:
            return cls[key]
        for member in cls:
            if member.bits == key:
                return member
        raise ConfigError(f"unknown coherence state {text!r} (expected M/E/S/I or 11/10/01/00)")


class Op(Enum):
    LOAD = "load"
    STORE = "store"


def _is_pow2(n: int) -> bool:
    return isinstance(n, int) and n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class CacheGeometry:
    num_sets: int = 64
    num_ways: int = 8
    block_bytes: int = 64

    def __post_init__(self):
        for name in ("num_sets", "num_ways", "block_bytes"):
            value = getattr(self, name)
            if not _is_pow2(value):
                raise ConfigError(f"{name} must be a power of two >= 1, got {value!r}")

    @property
    def num_lines(self) -> int:
        return self.num_sets * self.num_ways

    @property
    def capacity(self) -> int:
        return self.num_sets * self.num_ways * self.block_bytes

    @property
    def offset_bits(self) -> int:
        return self.block_bytes.bit_length() - 1

    @property
    def index_bits(self) -> int:
        return self.num_sets.bit_length() - 1

    def address(self, tag: int, set_index: int, offset: int = 0) -> int:
        """Recompose a byte address from its parts."""
        return (((tag << self.index_bits) | set_index) << self.offset_bits) | offset


@dataclass(frozen=True)
class Latencies:
    hit: int = 30
    miss: int = 120

    def __post_init__(self):
        # probe-time threshold: misses read above 100 cycles, hits below
        if not (self.miss > 100 > self.hit >= 1):
            raise ConfigError(
                f"latencies must satisfy miss > 100 > hit >= 1 (got hit={self.hit}, miss={self.miss})"
            )

    @property
    def gap(self) -> int:
        return self.miss - self.hit


@dataclass(frozen=True)
class AddrParts:
    tag: int
    set_index: int
    offset: int


def decompose(address: int, geometry: CacheGeometry) -> AddrParts:
    if not 0 <= address < (1 << ADDRESS_BITS):
        raise ConfigError(f"address {address:#x} does not fit in {ADDRESS_BITS} bits")
    offset = address & (geometry.block_bytes - 1)
    block = address >> geometry.offset_bits
    return AddrParts(
        tag=block >> geometry.index_bits,
        set_index=block & (geometry.num_sets - 1),
        offset=offset,
    )


@dataclass(frozen=True)
class LineMeta:
    owner: Optional[int]
    tag: int
    coherence: Coherence
    fase: int
    recency: int = 0  # 0 = most recently used within its set


@dataclass(frozen=True)
class AccessResult:
    hit: bool
    latency: int
    way: int
    writeback_occurred: bool = False
    evicted: Optional[LineMeta] = None


SNAPSHOT_COLUMNS = ("set", "way", "owner", "tag", "coherence", "fase", "recency")


@dataclass(frozen=True)
class Snapshot:
    """Lossless dump of every line (set-major, way-minor) plus the CLSF flag."""

    geometry: CacheGeometry
    rows: tuple  # of (set, way, owner, tag, coherence, fase, recency); owner -1 = none
    clsf_flag: int

    def without_recency(self) -> tuple:
        return tuple(r[:6] for r in self.rows)

    def lines_owned_by(self, pid: int) -> list:
        return [(r[0], r[1]) for r in self.rows if r[2] == pid and r[4] != "I"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        g = self.geometry
        buf.write(f"# sets={g.num_sets} ways={g.num_ways} block_bytes={g.block_bytes} clsf_flag={self.clsf_flag}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SNAPSHOT_COLUMNS)
        for s, way, owner, tag, coh, fase, rec in self.rows:
            w.writerow((s, way, "" if owner < 0 else owner, f"{tag:#x}", coh, fase, rec))
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Snapshot":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("#"):
            raise ConfigError("snapshot CSV must start with a '# sets=... clsf_flag=...' header")
        meta = dict(item.split("=", 1) for item in lines[0][1:].split())
        geometry = CacheGeometry(int(meta["sets"]), int(meta["ways"]), int(meta["block_bytes"]))
        rows = []
        for rec in csv.DictReader(lines[1:]):
            rows.append((
                int(rec["set"]), int(rec["way"]),
                int(rec["owner"]) if rec["owner"] else -1,
                int(rec["tag"], 0), Coherence.parse(rec["coherence"]).name,
                int(rec["fase"]), int(rec["recency"]),
            ))
        if len(rows) != geometry.num_lines:
            raise ConfigError(f"snapshot has {len(rows)} lines, geometry needs {geometry.num_lines}")
        return cls(geometry, tuple(rows), int(meta["clsf_flag"]))


class CacheState:
    """One L1 data cache instance.

    ``backend`` selects the kernel ("python" or "cython"); default is the one
    chosen at import.  Hit/miss/writeback counters cover every access made
    through :meth:`access` and :meth:`run_compiled`.
    """

    def __init__(self, geometry: CacheGeometry | None = None, latencies: Latencies | None = None,
                 pids: Iterable[int] = (), backend: str | None = None):
        self.geometry = geometry or CacheGeometry()
        self.latencies = latencies or Latencies()
        self.backend = backend
        self.core = core_class(backend)(self.geometry.num_sets, self.geometry.num_ways)
        self.pids: set[int] = set()
        for pid in pids:
            self.register(pid)
        self.hits = 0
        self.misses = 0
        self.writebacks = 0

    def register(self, pid: int) -> None:
        if not isinstance(pid, int) or pid < 0:
            raise ConfigError(f"process ids must be non-negative integers, got {pid!r}")
        self.pids.add(pid)

    def _check_pid(self, pid):
        if pid not in self.pids:
            raise ConfigError(f"unknown process id {pid!r}")

    @property
    def clsf_flag(self) -> int:
        return self.core.clsf_flag

    @clsf_flag.setter
    def clsf_flag(self, value: int) -> None:
        self.core.clsf_flag = int(bool(value))

    @property
    def accesses(self) -> int:
        return self.hits + self.misses

    def access(self, pid: int, op: Op | str, address: int, scf: int = 0) -> AccessResult:
        self._check_pid(pid)
        op = Op(op)
        parts = decompose(address, self.geometry)
        hit, way, ev_valid, ev_owner, ev_tag, ev_state, ev_fase = self.core.access(
            parts.set_index, pid, parts.tag, op is Op.STORE, bool(scf))
        if hit:
            self.hits += 1
            return AccessResult(True, self.latencies.hit, way)
        self.misses += 1
        evicted = None
        if ev_valid:
            evicted = LineMeta(ev_owner, ev_tag, Coherence(ev_state), ev_fase)
        wb = ev_valid and ev_state == Coherence.M
        if wb:
            self.writebacks += 1
        return AccessResult(False, self.latencies.miss, way, wb, evicted)

    def run_compiled(self, pid, kinds, a, b, c, start, stop, scf, hits_out):
        """Batch path used by the execution simulator; see ``CacheCore.run``."""
        hits, misses, wbs, scf = self.core.run(pid, kinds, a, b, c, start, stop, scf, hits_out)
        self.hits += hits
        self.misses += misses
        self.writebacks += wbs
        return hits, misses, wbs, scf

    def select_victim_way(self, set_index: int) -> int:
        if not 0 <= set_index < self.geometry.num_sets:
            raise IndexError(f"set index {set_index} out of range")
        return self.core.victim_way(set_index)

    def force_state(self, pid: int, set_index: int, way: int, state: Coherence | str) -> None:
        """Overwrite one line's coherence state (test directive; leaves FaSe alone)."""
        if isinstance(state, str):
            state = Coherence.parse(state)
        g = self.geometry
        if not (0 <= set_index < g.num_sets and 0 <= way < g.num_ways):
            raise ConfigError(f"force target set={set_index} way={way} outside the cache")
        self.core.force(set_index, way, pid, int(state))

    def set_fase(self, set_index: int, way: int, bit: int) -> None:
        i = set_index * self.geometry.num_ways + way
        owner, tag, state, _, stamp = self.core.get_line(i)
        if bit and state == Coherence.I:
            raise ValueError("an invalid line cannot carry fase=1")
        self.core.set_line(i, owner, tag, state, int(bool(bit)), stamp)

    def _ranks(self, set_index):
        ways = self.geometry.num_ways
        base = set_index * ways
        stamps = [self.core.get_line(base + w)[4] for w in range(ways)]
        # lower way wins LRU ties, so it ranks as older
        order = sorted(range(ways), key=lambda w: (-stamps[w], -w))
        ranks = [0] * ways
        for r, w in enumerate(order):
            ranks[w] = r
        return ranks

    def line(self, set_index: int, way: int) -> LineMeta:
        owner, tag, state, fase, _ = self.core.get_line(set_index * self.geometry.num_ways + way)
        return LineMeta(None if owner < 0 else owner, tag, Coherence(state), fase,
                        self._ranks(set_index)[way])

    def lines(self) -> Iterator[tuple[int, int, LineMeta]]:
        for s in range(self.geometry.num_sets):
            for w in range(self.geometry.num_ways):
                yield s, w, self.line(s, w)

    def snapshot(self) -> Snapshot:
        g = self.geometry
        rows = []
        for s in range(g.num_sets):
            ranks = self._ranks(s)
            for w in range(g.num_ways):
                owner, tag, state, fase, _ = self.core.get_line(s * g.num_ways + w)
                rows.append((s, w, owner, tag, Coherence(state).name, fase, ranks[w]))
        return Snapshot(g, tuple(rows), self.core.clsf_flag)

    def restore(self, snap: Snapshot) -> None:
        if snap.geometry != self.geometry:
            raise ConfigError("snapshot geometry does not match this cache")
        ways = self.geometry.num_ways
        for s, w, owner, tag, coh, fase, rank in snap.rows:
            self.core.set_line(s * ways + w, owner, tag, int(Coherence.parse(coh)), fase, ways - rank)
        self.core.clock = ways
        self.core.clsf_flag = snap.clsf_flag

    def copy(self) -> "CacheState":
        other = CacheState(self.geometry, self.latencies, self.pids, self.backend)
        other.restore(self.snapshot())
        other.hits, other.misses, other.writebacks = self.hits, self.misses, self.writebacks
        return other
