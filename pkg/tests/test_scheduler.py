"""Schedule invariants, determinism, OOK signaling, and the setup protocol."""

import numpy as np
import pytest

from isacsim.config import ConfigError, derive_config, derive_geometry
from isacsim.scheduler import (
    ProtocolTerminal,
    RbAllocation,
    Stage,
    generate_schedule,
    ook_detect,
    ook_encode,
    run_protocol,
    schedules_to_csv,
)


def _latin_ok(schedules, L):
    n_cyc = schedules[0].n_cycles
    for c in range(n_cyc):
        mat = np.vstack([s.antenna_at[c * L:(c + 1) * L] for s in schedules])
        for col in mat.T:
            if len(set(col.tolist())) != len(schedules):
                return False
    return True


def test_pseudo_random_latin_full(full_cfg, full_geo):
    # brute-force check over all 40 cycles of the reference frame
    schedules = generate_schedule(full_cfg, full_geo, "pseudo-random", seed=7)
    L = full_geo.n_tx
    assert len(schedules) == full_cfg.M
    assert _latin_ok(schedules, L)
    for sch in schedules:
        # each antenna fires once per cycle
        for c in range(sch.n_cycles):
            assert sorted(sch.antenna_at[c * L:(c + 1) * L]) == list(range(L))
        # slot columns strictly increasing
        assert np.all(np.diff(sch.slots, axis=0) > 0)


def test_antenna_slots_partition(ci_cfg, ci_geo):
    schedules = generate_schedule(ci_cfg, ci_geo, "pseudo-random", seed=3)
    for sch in schedules:
        union = np.sort(np.concatenate(
            [sch.antenna_slots(l) for l in range(sch.n_tx)]))
        assert np.array_equal(union, np.arange(ci_cfg.P))


def test_schedule_determinism(ci_cfg, ci_geo):
    a = generate_schedule(ci_cfg, ci_geo, "pseudo-random", seed=11)
    b = generate_schedule(ci_cfg, ci_geo, "pseudo-random", seed=11)
    for x, y in zip(a, b):
        assert np.array_equal(x.slots, y.slots)
        assert np.array_equal(x.antenna_at, y.antenna_at)
    c = generate_schedule(ci_cfg, ci_geo, "pseudo-random", seed=12)
    assert any(not np.array_equal(x.antenna_at, y.antenna_at)
               for x, y in zip(a, c))


def test_conventional_order():
    raw = {"chirps_per_frame": 6, "num_samples": 256}
    cfg = derive_config(raw)
    geo = derive_geometry(raw)
    schedules = generate_schedule(cfg, geo, "conventional", seed=0)
    for sch in schedules:
        assert sch.antenna_at.tolist() == [0, 1, 2, 0, 1, 2]
        # per-antenna slots stride by exactly L
        for l in range(3):
            assert np.all(np.diff(sch.antenna_slots(l)) == 3)


def test_single_antenna_degenerate():
    raw = {"tx_x": 1, "tx_z": 1, "num_rb": 1, "num_samples": 256,
           "chirps_per_frame": 24}
    cfg = derive_config(raw)
    geo = derive_geometry(raw)
    for mode in ("conventional", "pseudo-random"):
        (sch,) = generate_schedule(cfg, geo, mode, seed=5)
        assert sch.antenna_slots(0).tolist() == list(range(24))


def test_mode_and_overload_errors(ci_cfg, ci_geo):
    with pytest.raises(ConfigError, match="unknown schedule mode"):
        generate_schedule(ci_cfg, ci_geo, "uniform", seed=0)


def test_order_at_indexing(ci_cfg, ci_geo):
    schedules = generate_schedule(ci_cfg, ci_geo, "pseudo-random", seed=9)
    for sch in schedules:
        for l in range(sch.n_tx):
            slots = sch.antenna_slots(l)
            assert np.array_equal(sch.order_at[slots], np.arange(sch.n_cycles))


def test_schedule_csv(tmp_path, ci_cfg, ci_geo):
    schedules = generate_schedule(ci_cfg, ci_geo, "pseudo-random", seed=1)
    p = tmp_path / "sched.csv"
    schedules_to_csv(schedules, p)
    lines = p.read_text().strip().splitlines()
    assert lines[0] == "slot,rb0,rb1,rb2"
    assert len(lines) == 1 + ci_cfg.P


# ---------------------------------------------------------------------------
# OOK


def test_ook_roundtrip(rng):
    bits = rng.integers(0, 2, size=16)
    mask = ook_encode(bits)
    assert np.array_equal(mask, bits)
    energies = mask * 10.0 + 0.01
    assert np.array_equal(ook_detect(energies, threshold=1.0), bits)


def test_ook_threshold_example():
    assert ook_detect([10.0, 0.1, 10.0], 1.0).tolist() == [1, 0, 1]
    assert ook_encode([1, 0, 1]).tolist() == [1, 0, 1]


# ---------------------------------------------------------------------------
# RB allocation and protocol


def test_first_fit():
    alloc = RbAllocation(n_rb=6, occupied={0, 1})
    assert alloc.first_fit(3) == [2, 3, 4]
    assert alloc.first_fit(5) is None
    assert RbAllocation(n_rb=6, occupied={2}).first_fit(3) == [3, 4, 5]


def test_protocol_happy_path(full_cfg):
    terminals = [
        ProtocolTerminal("at", "at"),
        ProtocolTerminal("pt1", "pt"),
        ProtocolTerminal("pt2", "pt"),
    ]
    states = run_protocol(full_cfg, terminals)
    assert states["at"].rb_set == [0, 1, 2]
    for ident in ("at", "pt1", "pt2"):
        assert states[ident].stage is Stage.STEADY
        assert states[ident].error is None
    # PTs learn the AT's set from the energy pattern
    assert states["pt1"].rb_set == [0, 1, 2]
    # perfect sync: both rounds agree, offset estimate is zero
    assert states["pt1"].sync_delay == pytest.approx(0.0)
    assert states["pt1"].acked and states["pt2"].acked


def test_protocol_first_fit_skips_occupied(full_cfg):
    terminals = [ProtocolTerminal("at", "at"), ProtocolTerminal("pt", "pt")]
    states = run_protocol(full_cfg, terminals, occupied={0, 1})
    assert states["at"].rb_set == [2, 3, 4]
    assert states["pt"].rb_set == [2, 3, 4]


def test_protocol_two_round_sync(full_cfg):
    # a fixed 7-sample clock offset is isolated by halving the difference
    # of the two rounds' delay measurements, independent of propagation
    terminals = [
        ProtocolTerminal("at", "at"),
        ProtocolTerminal("pt", "pt", prop_delay=13.0, clock_offset=7.0),
    ]
    states = run_protocol(full_cfg, terminals)
    assert states["pt"].sync_delay == pytest.approx(7.0)


def test_protocol_no_free_run(full_cfg):
    terminals = [ProtocolTerminal("at", "at"), ProtocolTerminal("pt", "pt")]
    # every third RB taken: longest free run is 2 < M=3
    occupied = set(range(2, full_cfg.n_rb, 3))
    states = run_protocol(full_cfg, terminals, occupied=occupied)
    assert states["at"].stage is Stage.FAILED
    assert "consecutive free" in states["at"].error
    assert states["pt"].stage is Stage.FAILED


def test_protocol_unresponsive_pt(full_cfg):
    terminals = [
        ProtocolTerminal("at", "at"),
        ProtocolTerminal("pt1", "pt"),
        ProtocolTerminal("pt2", "pt", responsive=False),
    ]
    states = run_protocol(full_cfg, terminals)
    assert states["pt1"].stage is Stage.STEADY
    assert not states["pt2"].acked
    assert states["pt2"].stage is Stage.FAILED
    assert "timeout" in states["at"].error


def test_protocol_requires_one_at(full_cfg):
    with pytest.raises(ConfigError, match="exactly one AT"):
        run_protocol(full_cfg, [ProtocolTerminal("pt", "pt")])
