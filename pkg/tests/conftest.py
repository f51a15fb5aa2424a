import importlib

import pytest

from fase_sim import _backend

# the package re-exports a ``flush`` function that shadows the submodule name
flush_mod = importlib.import_module("fase_sim.flush")
sim_mod = importlib.import_module("fase_sim.sim")

BACKENDS = ["python"] + (["cython"] if _backend.CoreCompiled is not None else [])

# Every flush event and every SimReport produced anywhere in the suite is
# checked here; the acceptance module reads these counters.
ACCOUNTING = {"flush_events": 0, "reports": 0, "violations": []}
ACCEPTANCE_LINES = []


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def _checked_flush(real):
    def wrapper(cache, mode, params=None, collect=None):
        report = real(cache, mode, params, collect)
        params = params or flush_mod.CostParams()
        ACCOUNTING["flush_events"] += 1
        n = cache.geometry.num_lines
        ok = (flush_mod.flush_cost(report, params) == report.cycles
              and report.lines_flushed <= report.lines_traversed <= n
              and report.writebacks <= report.lines_flushed
              and (not report.nullified_event or report.lines_flushed == 0))
        if not ok:
            ACCOUNTING["violations"].append(("flush", report))
        return report
    return wrapper


def _checked_report(real):
    def wrapper(self):
        rep = real(self)
        ACCOUNTING["reports"] += 1
        ok = (rep.total_cycles == rep.access_cycles + rep.switch_cycles
              and rep.switch_cycles == rep.flush_cycles + self.switch_overhead * rep.switches
              and rep.flush_cycles == sum(r.cycles for r in rep.per_flush)
              and rep.access_cycles == sum(rep.per_process_cycles.values())
              and rep.access_cycles == rep.hits * self.latencies.hit + rep.misses * self.latencies.miss)
        if not ok:
            ACCOUNTING["violations"].append(("report", rep))
        return rep
    return wrapper


@pytest.fixture(autouse=True, scope="session")
def _accounting_watch():
    mp = pytest.MonkeyPatch()
    checked = _checked_flush(flush_mod.flush)
    mp.setattr(flush_mod, "flush", checked)
    mp.setattr(sim_mod, "flush", checked)
    mp.setattr(sim_mod.Simulator, "report", _checked_report(sim_mod.Simulator.report))
    yield
    mp.undo()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def pytest_sessionfinish(session, exitstatus):
    # accounting identities are checked on every flush of the whole run
    line = (f"{'PASS' if not ACCOUNTING['violations'] else 'FAIL'} [9*] session-wide accounting: "
            f"{ACCOUNTING['flush_events']} flush events, {ACCOUNTING['reports']} reports, "
            f"{len(ACCOUNTING['violations'])} violations (tolerance: exact)")
    ACCEPTANCE_LINES.append(line)
    if ACCOUNTING["violations"] and exitstatus == 0:
        session.exitstatus = 1
