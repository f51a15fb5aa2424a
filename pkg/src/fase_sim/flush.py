"""Flush mechanisms: naive, line-level selective (LLSF), cache-level selective (CLSF).

The per-line decision table lives here as a pure function; the kernels in
``_core``/``_core_py`` embody the same table in their traversal loop and the
test suite checks the two against each other row by row.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .cache_model import CacheState, Coherence
from .errors import ConfigError


class Mode(Enum):
    """Mitigation mode of a run.  BASELINE never flushes."""

    BASELINE = "baseline"
    NAIVE = "naive"
    LLSF = "llsf"
    CLSF = "clsf"

    @property
    def flushes(self) -> bool:
        return self is not Mode.BASELINE

    @classmethod
    def parse(cls, text: str) -> "Mode":
        try:
            return cls(text.strip().lower())
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ConfigError(f"unknown mode {text!r} (expected one of: {names})") from None


_KERNEL_MODE = {Mode.NAIVE: 1, Mode.LLSF: 2, Mode.CLSF: 3}


class FlushAction(Enum):
    FLUSH_LINE = "flush"
    NULLIFY_LINE = "nullify"
    NO_ACTION = "none"


def decide_line_flush(coherence: Coherence, fase: int) -> FlushAction:
    """LLSF per-line decision.

    Valid lines touched this slice (fase=1) are kept; valid lines that were
    not are flushed; invalid lines need nothing either way.
    """
    if not Coherence(coherence).valid:
        return FlushAction.NO_ACTION
    return FlushAction.NULLIFY_LINE if fase else FlushAction.FLUSH_LINE


@dataclass(frozen=True)
class CostParams:
    alpha: int = 30  # cycles to clean + invalidate one dirty line
    beta: int = 1  # cycles to visit one line

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be non-negative")
        if self.alpha < 10 * self.beta:
            raise ConfigError(
                f"alpha must be an order of magnitude larger than beta "
                f"(alpha >= 10*beta), got alpha={self.alpha}, beta={self.beta}"
            )


@dataclass(frozen=True)
class FlushReport:
    mode: Mode
    lines_traversed: int
    lines_flushed: int
    writebacks: int
    nullified_event: bool
    cycles: int


def flush_cost(report: FlushReport, params: CostParams) -> int:
    """Recompute the cycle cost of a flush event from its counts."""
    return params.alpha * report.writebacks + params.beta * report.lines_traversed


def flush(cache: CacheState, mode: Mode, params: CostParams | None = None,
          collect: list | None = None) -> FlushReport:
    """Run one flush event on ``cache``.

    If ``collect`` is a list, ``(owner, tag, set)`` of every invalidated line
    is appended to it (used for cold-cache attribution).
    """
    params = params or CostParams()
    if not mode.flushes:
        raise ValueError("baseline mode has no flush events")
    traversed, flushed, wbs, nullified, keys = cache.core.flush(_KERNEL_MODE[mode], collect is not None)
    if collect is not None:
        collect.extend(keys)
    cycles = params.alpha * wbs + params.beta * traversed
    return FlushReport(mode, traversed, flushed, wbs, bool(nullified), cycles)


FLUSH_CSV_COLUMNS = ("event_id", "mode", "lines_traversed", "lines_flushed", "writebacks", "nullified", "cycles")


def flush_reports_to_csv(reports: Iterable[FlushReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FLUSH_CSV_COLUMNS)
    for i, r in enumerate(reports):
        w.writerow((i, r.mode.value, r.lines_traversed, r.lines_flushed, r.writebacks,
                    int(r.nullified_event), r.cycles))
    return buf.getvalue()


def flush_reports_from_csv(text: str) -> list[FlushReport]:
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        out.append(FlushReport(Mode.parse(rec["mode"]), int(rec["lines_traversed"]),
                               int(rec["lines_flushed"]), int(rec["writebacks"]),
                               bool(int(rec["nullified"])), int(rec["cycles"])))
    return out
