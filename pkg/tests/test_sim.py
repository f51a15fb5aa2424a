import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fase_sim import (CacheGeometry, EventKind, ConfigError, CostParams, Latencies, Mode, SimConfig, Simulator,
                      SliceConfig, TraceEvent, run_simulation)
from fase_sim.workloads import half_cache, random_workload

G = CacheGeometry(4, 4, 64)
L, S, SCF = TraceEvent.load, TraceEvent.store, TraceEvent.scf


def expected_scf(proc):
    """Last scf value written in the executed prefix of a trace (0 if none)."""
    v = 0
    for ev in proc.trace[:proc.cursor]:
        if ev.kind is EventKind.SCF:
            v = ev.scf_value
    return v


def test_zero_budget(backend):
    sim = Simulator(G, backend=backend)
    sim.add_process("p", [L(0)])
    st_ = sim.run_slice("p", 0)
    assert (st_.events_run, st_.cycles) == (0, 0)


def test_critical_bracket_sets_flag(backend):
    sim = Simulator(G, backend=backend)
    sim.add_process("p", [SCF(1), L(0x40), SCF(0)])
    st_ = sim.run_slice("p", 10)
    assert st_.events_run == 3 and st_.misses == 1
    assert sim.cache.clsf_flag == 1
    assert sim.process("p").csr_scf == 0


def test_temporal_locality(backend):
    sim = Simulator(G, backend=backend)
    sim.add_process("p", [L(0x80), L(0x80)])
    st_ = sim.run_slice("p", 2)
    assert (st_.misses, st_.hits, st_.cycles) == (1, 1, 120 + 30)


def test_unknown_pid(backend):
    sim = Simulator(G, backend=backend)
    with pytest.raises(ConfigError):
        sim.run_slice("ghost", 1)


def test_baseline_switch_is_free(backend):
    sim = Simulator(G, backend=backend)
    sim.add_process("a", [L(0)])
    sim.add_process("b")
    sw = sim.context_switch("a", "b")
    assert sw.flush_report is None and sw.switch_cycles == 0


def test_scf_restored_after_preemption(backend):
    sim = Simulator(G, mode=Mode.LLSF, backend=backend)
    sim.add_process("a", [SCF(1), L(0), L(64)])
    sim.add_process("b", [L(0)])
    sim.run_slice("a", 2)
    assert sim.process("a").csr_scf == 1
    sim.context_switch("a", "b")
    assert sim.process("a").csr_scf == 0 and sim.process("a").saved_scf == 1
    sim.run_slice("b", 1)
    assert sim.cache.clsf_flag == 0  # b's fill is not critical
    sim.context_switch("b", "a")
    assert sim.process("a").csr_scf == 1
    sim.run_slice("a", 1)
    assert sim.cache.clsf_flag == 1


def test_naive_switch_on_dirty_cache(backend):
    sim = Simulator(G, mode=Mode.NAIVE, cost=CostParams(30, 1), backend=backend)
    sim.add_process("a", [S(G.address(t, s)) for s in range(4) for t in range(4)])
    sim.add_process("b")
    sim.run_slice("a", 16)
    sw = sim.context_switch("a", "b")
    assert sw.switch_cycles == 30 * 16 + 16 == 496
    assert sw.flush_report.writebacks == 16


def test_switch_overhead_added(backend):
    sim = Simulator(G, mode=Mode.NAIVE, switch_overhead=7, backend=backend)
    sim.add_process("a", [L(0)])
    sim.add_process("b")
    sim.run_slice("a", 1)
    assert sim.context_switch("a", "b").switch_cycles == 7 + 16
    rep = sim.report()
    assert rep.switch_cycles == rep.flush_cycles + 7


def test_single_process_no_switch(backend):
    for mode in Mode:
        cfg = SimConfig({"p": [L(64 * i) for i in range(40)]}, G, mode,
                        slices=SliceConfig(slice_length=100), backend=backend)
        rep = run_simulation(cfg)
        assert rep.per_flush == [] and rep.total_cycles == rep.access_cycles


def test_single_process_many_slices_no_switch(backend):
    cfg = SimConfig({"p": [L(64 * (i % 8)) for i in range(40)]}, G, Mode.NAIVE,
                    slices=SliceConfig(slice_length=3), backend=backend)
    rep = run_simulation(cfg)
    assert rep.switches == 0 and rep.slices_run == 14


def test_deterministic(backend):
    traces, slices = random_workload(G, seed=5, nproc=3, allow_scf=True)
    cfg = SimConfig(traces, G, Mode.CLSF, slices=slices, backend=backend)
    assert run_simulation(cfg) == run_simulation(cfg)


def test_total_slices_limit(backend):
    cfg = SimConfig({"a": [L(0)] * 50, "b": [L(64)] * 50}, G, Mode.LLSF,
                    slices=SliceConfig(slice_length=5, total_slices=4), backend=backend)
    rep = run_simulation(cfg)
    assert rep.slices_run == 4 and rep.switches == 3 and len(rep.per_flush) == 3


def test_schedule_validation():
    with pytest.raises(ConfigError):
        run_simulation(SimConfig({"a": [L(0)]}, G, slices=SliceConfig(schedule=("a", "zz"))))
    with pytest.raises(ConfigError):
        run_simulation(SimConfig({"a": [L(0)], "b": [L(0)]}, G, slices=SliceConfig(schedule=("a",))))
    with pytest.raises(ConfigError):
        run_simulation(SimConfig({}, G))
    with pytest.raises(ConfigError):
        SliceConfig(slice_length=0)


def test_idle_kernel_pid_adds_flush_points(backend):
    traces = {"u": [L(0)] * 6, "k": []}
    cfg = SimConfig(traces, G, Mode.NAIVE, slices=SliceConfig(2, ("u", "k")), backend=backend)
    rep = run_simulation(cfg)
    # u k u k u: four switches, each a flush point
    assert rep.switches == 4 and len(rep.per_flush) == 4


def test_exhausted_process_skipped(backend):
    traces = {"a": [L(0)] * 2, "b": [L(64)] * 10}
    cfg = SimConfig(traces, G, Mode.NAIVE, slices=SliceConfig(2, ("a", "b")), backend=backend)
    rep = run_simulation(cfg)
    assert rep.switches == 1 and rep.slices_run == 6


def test_report_csv_sections(backend):
    traces, slices = half_cache(G, rounds=2)
    rep = run_simulation(SimConfig(traces, G, Mode.LLSF, slices=slices, backend=backend))
    text = rep.to_csv()
    for section in ("summary", "per-flush", "per-process"):
        assert f"# {section}" in text
    assert rep.per_flush_csv().count("\n") == len(rep.per_flush) + 1


# -- cold-cache penalty ----------------------------------------------------------

def resident_then_reaccess(backend, mode, flush_between):
    """One process: touch 8 blocks, optional self-switch, touch them again."""
    blocks = [L(G.address(t, s)) for s in range(4) for t in range(2)]
    sim = Simulator(G, mode=mode, backend=backend)
    sim.add_process("p", blocks * 2)
    sim.run_slice("p", 8)
    if flush_between:
        sim.context_switch("p", "p")
    sim.run_slice("p", 8)
    return sim


def test_cold_penalty_zero_on_baseline(backend):
    sim = resident_then_reaccess(backend, Mode.BASELINE, True)
    assert sim.cold_cache_penalty() == 0


def test_cold_penalty_naive_matches_differencing_oracle(backend):
    flushed = resident_then_reaccess(backend, Mode.NAIVE, True)
    plain = resident_then_reaccess(backend, Mode.BASELINE, False)
    oracle = flushed.access_cycles - plain.access_cycles
    assert flushed.cold_cache_penalty() == oracle == 8 * (120 - 30)


def test_cold_penalty_llsf_retains_fresh_lines(backend):
    sim = resident_then_reaccess(backend, Mode.LLSF, True)
    plain = resident_then_reaccess(backend, Mode.BASELINE, False)
    assert sim.cold_cache_penalty() == 0 == sim.access_cycles - plain.access_cycles


def test_cold_penalty_window_closes_at_next_flush(backend):
    sim = Simulator(G, mode=Mode.NAIVE, backend=backend)
    sim.add_process("p", [L(0), L(64), L(0), L(64)])
    sim.run_slice("p", 2)
    sim.context_switch("p", "p")
    sim.context_switch("p", "p")  # empty cache: pending set is now empty
    sim.run_slice("p", 2)
    assert sim.cold_cache_penalty() == 0


def test_cold_penalty_counted_once(backend):
    sim = Simulator(G, mode=Mode.NAIVE, backend=backend)
    sim.add_process("p", [L(0), L(0), L(0)])
    sim.add_process("q", [L(0)] * 8)
    sim.run_slice("p", 1)
    sim.context_switch("p", "p")
    sim.run_slice("p", 2)
    assert sim.cold_cache_penalty() == 90


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([Mode.NAIVE, Mode.LLSF, Mode.CLSF]))
def test_cold_penalty_bounded(seed, mode):
    traces, slices = random_workload(G, seed, allow_scf=True)
    rep = run_simulation(SimConfig(traces, G, mode, slices=slices))
    gap = Latencies().gap
    assert 0 <= rep.cold_miss_penalty <= rep.misses * gap
    assert rep.cold_miss_penalty % gap == 0


# -- properties ------------------------------------------------------------------

@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10_000))
def test_ordering_property(seed):
    traces, slices = random_workload(G, seed)
    totals = {m: run_simulation(SimConfig(traces, G, m, slices=slices)).total_cycles for m in Mode}
    assert totals[Mode.BASELINE] <= totals[Mode.LLSF] <= totals[Mode.NAIVE]
    assert totals[Mode.CLSF] <= totals[Mode.LLSF]


def scf_interleaving(seed, backend=None):
    """Random critical segments and preemptions; returns mismatches observed at switches."""
    rng = random.Random(seed)
    n = rng.randint(2, 4)
    sim = Simulator(CacheGeometry(2, 2, 64), mode=rng.choice([Mode.BASELINE, Mode.LLSF, Mode.CLSF]),
                    backend=backend)
    for p in range(n):
        trace = [SCF(rng.randint(0, 1)) if rng.random() < 0.3 else L(64 * rng.randrange(16))
                 for _ in range(rng.randint(0, 30))]
        sim.add_process(p, trace)
    bad = []
    cur = rng.randrange(n)
    for _ in range(rng.randint(1, 30)):
        sim.run_slice(cur, rng.randint(0, 6))
        at_switch_out = sim.process(cur).csr_scf
        if at_switch_out != expected_scf(sim.process(cur)):
            bad.append(("live", cur))
        nxt = rng.randrange(n)
        sim.context_switch(cur, nxt)
        if nxt != cur and sim.process(cur).csr_scf != 0:
            bad.append(("reset", cur))
        if sim.process(cur).saved_scf != at_switch_out:
            bad.append(("saved", cur))
        if sim.process(nxt).csr_scf != expected_scf(sim.process(nxt)):
            bad.append(("restored", nxt))
        cur = nxt
    return bad


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 1 << 30))
def test_scf_round_trip_property(seed):
    assert scf_interleaving(seed) == []


def test_scf_round_trip_backends(backend):
    for seed in range(50):
        assert scf_interleaving(seed, backend) == []
