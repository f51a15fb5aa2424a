"""fase_sim: L1 data cache simulator with selective flushing and a Prime+Probe harness."""
from ._backend import BACKEND
from .cache_model import (AccessResult, AddrParts, CacheGeometry, CacheState, Coherence,
                          Latencies, LineMeta, Op, Snapshot, decompose)
from .errors import ConfigError
from .flush import (CostParams, FlushAction, FlushReport, Mode, decide_line_flush, flush,
                    flush_cost)
from .sim import (EventKind, Process, SimConfig, SimReport, SliceConfig, SliceStats,
                  Simulator, SwitchStats, TraceEvent, run_simulation)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "AccessResult", "AddrParts", "CacheGeometry", "CacheState", "Coherence", "Latencies",
    "LineMeta", "Op", "Snapshot", "decompose", "ConfigError", "CostParams", "FlushAction",
    "FlushReport", "Mode", "decide_line_flush", "flush", "flush_cost", "EventKind", "Process",
    "SimConfig", "SimReport", "SliceConfig", "SliceStats", "Simulator", "SwitchStats", "TraceEvent",
    "run_simulation",
]
