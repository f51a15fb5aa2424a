import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fase_sim import CacheGeometry, ConfigError, Mode, Simulator
from fase_sim.attack import (ATTACKER, AttackConfig, ProbeMatrix, VictimModel, default_threshold,
                             infer_secret, prime, probe, run_prime_probe)

SMALL = CacheGeometry(4, 4, 64)


def attack(geometry, mode, secret=(0, 2, 3), samples=10, critical=True, backend=None, **kw):
    cfg = AttackConfig(geometry, victim=VictimModel(secret, critical=critical), backend=backend, **kw)
    return run_prime_probe(cfg, mode, samples)


def test_probe_all_hits_after_prime(backend):
    sim = Simulator(SMALL, backend=backend)
    sim.add_process(ATTACKER, prime(SMALL))
    sim.run_slice(ATTACKER, 16)
    assert probe(sim) == [4 * 30] * 4


def test_baseline_matrix_shape(backend):
    m = attack(SMALL, Mode.BASELINE, samples=5, backend=backend)
    assert m.latencies.shape == (5, 4)
    # one victim line per touched set: one attacker miss there
    assert (m.latencies == np.array([210, 120, 210, 210])).all()


def test_baseline_recovers_secret(backend):
    score = infer_secret(attack(SMALL, Mode.BASELINE, backend=backend), (0, 2, 3))
    assert score.recovered == (0, 2, 3) and score.accuracy == 1.0 and score.exact


@pytest.mark.parametrize("mode", [Mode.NAIVE, Mode.LLSF, Mode.CLSF])
def test_flushing_modes_hide_secret(backend, mode):
    m = attack(SMALL, mode, backend=backend)
    assert (m.latencies == 4 * 120).all()
    score = infer_secret(m, (0, 2, 3))
    assert score.recovered == () and score.accuracy == 0.0


def test_noncritical_victim_leaks_under_clsf(backend):
    base = attack(SMALL, Mode.BASELINE, critical=False, backend=backend)
    clsf = attack(SMALL, Mode.CLSF, critical=False, backend=backend)
    assert (base.latencies == clsf.latencies).all()
    assert infer_secret(clsf, (0, 2, 3)).accuracy == 1.0


def test_llsf_same_as_naive_matrix(backend):
    a = attack(SMALL, Mode.LLSF, secret=(1,), backend=backend)
    b = attack(SMALL, Mode.NAIVE, secret=(1,), backend=backend)
    assert a.latencies.tobytes() == b.latencies.tobytes()


def test_validation():
    with pytest.raises(ConfigError):
        attack(SMALL, Mode.BASELINE, secret=(4,))
    with pytest.raises(ConfigError):
        attack(SMALL, Mode.BASELINE, samples=0)
    with pytest.raises(ConfigError):
        VictimModel((0,), accesses_per_set=0).validate(SMALL)


def test_victim_trace_brackets():
    ev = VictimModel((1,), accesses_per_set=2).trace(SMALL)
    assert [e.kind.value for e in ev] == ["scf", "load", "load", "scf"]
    assert [e.scf_value for e in (ev[0], ev[-1])] == [1, 0]
    assert len(VictimModel((1,), critical=False).trace(SMALL)) == 1


def test_more_victim_lines_more_misses(backend):
    cfg = AttackConfig(SMALL, victim=VictimModel((2,), accesses_per_set=3), backend=backend)
    m = run_prime_probe(cfg, Mode.BASELINE, 3)
    assert (m.latencies[:, 2] == 1 * 30 + 3 * 120).all()


def test_noise_is_seeded(backend):
    a = attack(SMALL, Mode.BASELINE, noise=20, seed=3, backend=backend)
    b = attack(SMALL, Mode.BASELINE, noise=20, seed=3, backend=backend)
    assert (a.latencies == b.latencies).all()
    assert infer_secret(a, (0, 2, 3)).accuracy == 1.0


def test_infer_on_uniform_matrix():
    m = ProbeMatrix(np.full((3, 4), 480, dtype=np.int64), 4, 30, 120)
    assert infer_secret(m, ()).accuracy == 1.0
    assert infer_secret(m, (1,)).recovered == ()
    assert default_threshold(m) == 45


def test_false_positive_count():
    m = ProbeMatrix(np.array([[210, 120, 210, 210]], dtype=np.int64), 4, 30, 120)
    score = infer_secret(m, (0, 2))
    assert score.false_positives == 1 and score.accuracy == 1.0 and not score.exact


def test_matrix_csv():
    m = attack(SMALL, Mode.BASELINE, samples=2)
    lines = m.to_csv().splitlines()
    assert lines[0] == "set_0,set_1,set_2,set_3" and len(lines) == 3


@settings(max_examples=40, deadline=None)
@given(st.sets(st.integers(0, 7), min_size=1, max_size=7), st.booleans())
def test_baseline_recovers_any_proper_subset(secret, critical):
    g = CacheGeometry(8, 2, 64)
    secret = tuple(sorted(secret))
    score = infer_secret(attack(g, Mode.BASELINE, secret, samples=3, critical=critical), secret)
    assert score.exact


@settings(max_examples=40, deadline=None)
@given(st.sets(st.integers(0, 7), max_size=8), st.sampled_from([Mode.NAIVE, Mode.LLSF, Mode.CLSF]))
def test_protected_probe_is_uniform(secret, mode):
    g = CacheGeometry(8, 2, 64)
    m = attack(g, mode, tuple(sorted(secret)), samples=3)
    assert (m.latencies == m.latencies[0, 0]).all()
    assert infer_secret(m, tuple(secret)).recovered == ()
    if secret:
        assert (m.latencies == 2 * 120).all()
    # an empty critical segment fills nothing, so CLSF skips the flush and the probe hits
