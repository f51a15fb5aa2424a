"""Plain-text run configuration (key=value) and line-oriented trace files.

Config keys::

    sets, ways, block_bytes, mode, alpha, beta, hit_latency, miss_latency,
    slice_length, schedule, total_slices, switch_overhead, seed, output_dir

Trace lines::

    <pid> load 0xADDR
    <pid> store 0xADDR
    <pid> scf 0|1
    <pid> force SET WAY STATE      (test traces only)

``#`` starts a comment in both formats.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

from .cache_model import CacheGeometry, Coherence, Latencies
from .errors import ConfigError
from .flush import CostParams, Mode
from .sim import SimConfig, SliceConfig, TraceEvent

_INT_KEYS = ("sets", "ways", "block_bytes", "alpha", "beta", "hit_latency", "miss_latency",
             "slice_length", "switch_overhead", "seed")
KNOWN_KEYS = _INT_KEYS + ("mode", "schedule", "total_slices", "output_dir")


def parse_pid(token: str):
    """Numeric pids become ints, anything else stays a string label."""
    token = token.strip()
    if not token:
        raise ConfigError("empty process id")
    try:
        return int(token, 10)
    except ValueError:
        return token


@dataclass(frozen=True)
class RunConfig:
    geometry: CacheGeometry = CacheGeometry()
    mode: Mode = Mode.BASELINE
    cost: CostParams = CostParams()
    latencies: Latencies = Latencies()
    slices: SliceConfig = SliceConfig()
    switch_overhead: int = 0
    seed: int = 0
    output_dir: Optional[str] = None

    def sim_config(self, traces: dict, mode: Mode | None = None, backend: str | None = None) -> SimConfig:
        return SimConfig(traces=traces, geometry=self.geometry, mode=mode or self.mode, cost=self.cost,
                         latencies=self.latencies, slices=self.slices,
                         switch_overhead=self.switch_overhead, backend=backend)

    def with_mode(self, mode: Mode) -> "RunConfig":
        return replace(self, mode=mode)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    values: dict = {}
    where: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {raw.strip()!r}", source, lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown config key {key!r}", source, lineno)
        if key in values:
            raise ConfigError(f"duplicate config key {key!r}", source, lineno)
        if key in _INT_KEYS:
            try:
                value = int(value, 0)
            except ValueError:
                raise ConfigError(f"{key} must be an integer, got {value!r}", source, lineno) from None
        values[key] = value
        where[key] = lineno

    def build(keys, fn):
        try:
            return fn()
        except ConfigError as e:
            lineno = next((where[k] for k in keys if k in where), None)
            raise ConfigError(e.message, source, lineno) from None

    geometry = build(("sets", "ways", "block_bytes"), lambda: CacheGeometry(
        values.get("sets", 64), values.get("ways", 8), values.get("block_bytes", 64)))
    mode = build(("mode",), lambda: Mode.parse(values.get("mode", "baseline")))
    cost = build(("alpha", "beta"), lambda: CostParams(values.get("alpha", 30), values.get("beta", 1)))
    latencies = build(("hit_latency", "miss_latency"), lambda: Latencies(
        values.get("hit_latency", 30), values.get("miss_latency", 120)))

    def slices():
        schedule = values.get("schedule", "")
        pids = tuple(parse_pid(t) for t in schedule.split(",")) if schedule.strip() else ()
        total = values.get("total_slices")
        if total is not None and total.strip().lower() not in ("", "none"):
            try:
                total = int(total, 0)
            except ValueError:
                raise ConfigError(f"total_slices must be an integer or 'none', got {total!r}") from None
        else:
            total = None
        return SliceConfig(values.get("slice_length", 1000), pids, total)

    slice_cfg = build(("slice_length", "schedule", "total_slices"), slices)
    switch_overhead = values.get("switch_overhead", 0)
    if switch_overhead < 0:
        raise ConfigError("switch_overhead must be >= 0", source, where["switch_overhead"])
    return RunConfig(geometry, mode, cost, latencies, slice_cfg, switch_overhead,
                     values.get("seed", 0), values.get("output_dir") or None)


def dump_config(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config`."""
    s = cfg.slices
    lines = [
        f"sets={cfg.geometry.num_sets}",
        f"ways={cfg.geometry.num_ways}",
        f"block_bytes={cfg.geometry.block_bytes}",
        f"mode={cfg.mode.value}",
        f"alpha={cfg.cost.alpha}",
        f"beta={cfg.cost.beta}",
        f"hit_latency={cfg.latencies.hit}",
        f"miss_latency={cfg.latencies.miss}",
        f"slice_length={s.slice_length}",
        f"schedule={','.join(str(p) for p in s.schedule)}",
        f"total_slices={'none' if s.total_slices is None else s.total_slices}",
        f"switch_overhead={cfg.switch_overhead}",
        f"seed={cfg.seed}",
    ]
    if cfg.output_dir:
        lines.append(f"output_dir={cfg.output_dir}")
    return "\n".join(lines) + "\n"


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), str(path))


def parse_trace(text: str, source: str = "<trace>", allow_force: bool = False,
                traces: dict | None = None) -> dict:
    """Parse trace lines into ``{pid: [TraceEvent, ...]}`` (pids in first-seen order).

    Pass ``traces`` to append to an existing mapping (multiple files).
    """
    traces = {} if traces is None else traces
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if len(parts) < 3:
                raise ConfigError(f"expected '<pid> <op> <arg>', got {raw.strip()!r}")
            pid = parse_pid(parts[0])
            op = parts[1].lower()
            if op in ("load", "store"):
                if len(parts) != 3:
                    raise ConfigError(f"{op} takes one address")
                try:
                    address = int(parts[2], 0)
                except ValueError:
                    raise ConfigError(f"bad address {parts[2]!r}") from None
                if not 0 <= address < 1 << 64:
                    raise ConfigError(f"address {parts[2]} does not fit in 64 bits")
                ev = TraceEvent.load(address) if op == "load" else TraceEvent.store(address)
            elif op == "scf":
                if len(parts) != 3 or parts[2] not in ("0", "1"):
                    raise ConfigError("scf takes 0 or 1")
                ev = TraceEvent.scf(int(parts[2]))
            elif op == "force":
                if not allow_force:
                    raise ConfigError("force directives are only allowed in test traces")
                if len(parts) != 5:
                    raise ConfigError("force takes SET WAY STATE")
                ev = TraceEvent.force(int(parts[2], 0), int(parts[3], 0), Coherence.parse(parts[4]))
            else:
                raise ConfigError(f"unknown trace op {parts[1]!r}")
        except ConfigError as e:
            raise ConfigError(e.message, source, lineno) from None
        except ValueError as e:
            raise ConfigError(str(e), source, lineno) from None
        traces.setdefault(pid, []).append(ev)
    return traces


def load_traces(paths, allow_force: bool = False) -> dict:
    traces: dict = {}
    for path in paths:
        path = Path(path)
        parse_trace(path.read_text(), str(path), allow_force, traces)
    return traces


def dump_trace(traces: dict) -> str:
    """Serialize ``{pid: events}`` back into trace lines (process by process)."""
    out = []
    for pid, events in traces.items():
        for ev in events:
            if ev.kind.value in ("load", "store"):
                out.append(f"{pid} {ev.kind.value} {ev.address:#x}")
            elif ev.kind.value == "scf":
                out.append(f"{pid} scf {ev.scf_value}")
            else:
                s, w, st = ev.forced
                out.append(f"{pid} force {s} {w} {st.name}")
    return "\n".join(out) + "\n"
