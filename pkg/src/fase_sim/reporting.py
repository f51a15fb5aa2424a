"""Cross-mode comparison: overhead vs. baseline and flush savings vs. naive."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .config import RunConfig
from .errors import ConfigError
from .flush import Mode
from .sim import SimReport, run_simulation


@dataclass(frozen=True)
class ModeRow:
    mode: Mode
    total_cycles: int
    flush_events: int
    lines_flushed: int
    flush_cycles: int
    cold_miss_penalty: int
    overhead: float  # (cycles - baseline) / baseline
    flush_savings: float | None  # 1 - lines_flushed / naive lines_flushed
    overhead_reduction: float | None  # 1 - overhead / naive overhead
    same_state_savings: float | None = None  # 1 - lines_flushed / lines valid at this run's flush points


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple
    reports: dict  # Mode -> SimReport

    def row(self, mode: Mode) -> ModeRow:
        for r in self.rows:
            if r.mode is mode:
                return r
        raise KeyError(mode)

    def overhead_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("mode", "total_cycles", "flush_events", "flush_cycles", "cold_miss_penalty",
                    "overhead", "overhead_pct"))
        for r in self.rows:
            w.writerow((r.mode.value, r.total_cycles, r.flush_events, r.flush_cycles,
                        r.cold_miss_penalty, f"{r.overhead:.6f}", f"{100 * r.overhead:.3f}"))
        return buf.getvalue()

    def savings_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("mode", "lines_flushed", "flush_savings", "overhead_reduction", "same_state_savings"))
        opt = lambda v: "" if v is None else f"{v:.6f}"  # noqa: E731
        for r in self.rows:
            if r.mode is Mode.BASELINE:
                continue
            w.writerow((r.mode.value, r.lines_flushed, opt(r.flush_savings), opt(r.overhead_reduction),
                        opt(r.same_state_savings)))
        return buf.getvalue()

    def table(self) -> str:
        lines = [f"{'mode':<9} {'cycles':>12} {'flushes':>8} {'flushed':>9} {'overhead%':>10} "
                 f"{'savings':>8} {'same-state':>10}"]
        fmt = lambda v, w: f"{'':>{w}}" if v is None else f"{v:>{w}.3f}"  # noqa: E731
        for r in self.rows:
            lines.append(f"{r.mode.value:<9} {r.total_cycles:>12} {r.flush_events:>8} "
                         f"{r.lines_flushed:>9} {100 * r.overhead:>10.3f} "
                         f"{fmt(r.flush_savings, 8)} {fmt(r.same_state_savings, 10)}")
        return "\n".join(lines)


def compare_modes(cfg: RunConfig, traces: dict, modes, backend: str | None = None) -> ComparisonReport:
    """Run the same traces under each mode.

    Baseline is always run as the overhead reference, and naive as the
    savings reference whenever a selective mode is requested.
    """
    modes = list(dict.fromkeys(modes))
    if len(modes) < 2:
        raise ConfigError("compare needs at least two modes")
    run = list(modes)
    if Mode.BASELINE not in run:
        run.insert(0, Mode.BASELINE)
    if Mode.NAIVE not in run and any(m in (Mode.LLSF, Mode.CLSF) for m in run):
        run.insert(1, Mode.NAIVE)
    order = [Mode.BASELINE, Mode.NAIVE, Mode.LLSF, Mode.CLSF]
    run.sort(key=order.index)
    reports: dict = {m: run_simulation(cfg.sim_config(traces, m, backend)) for m in run}
    base = reports[Mode.BASELINE].total_cycles
    naive = reports.get(Mode.NAIVE)

    def overhead(rep: SimReport) -> float:
        return (rep.total_cycles - base) / base if base else 0.0

    rows = []
    for m in run:
        rep = reports[m]
        savings = reduction = None
        if naive is not None and m is not Mode.BASELINE:
            nl = naive.lines_flushed
            savings = 1 - rep.lines_flushed / nl if nl else 0.0
            no = overhead(naive)
            reduction = 1 - overhead(rep) / no if no else 0.0
        same = None
        if m is not Mode.BASELINE:
            valid = rep.lines_valid_at_flush
            same = 1 - rep.lines_flushed / valid if valid else 0.0
        rows.append(ModeRow(m, rep.total_cycles, len(rep.per_flush), rep.lines_flushed, rep.flush_cycles,
                            rep.cold_miss_penalty, overhead(rep), savings, reduction, same))
    return ComparisonReport(tuple(rows), reports)
