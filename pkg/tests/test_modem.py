"""Payload encoding: budgets, packing, DPSK streams, motion guards."""

import numpy as np
import pytest

from isacsim.config import ConfigError, derive_config, derive_geometry
from isacsim.modem import (
    bit_budget,
    bit_rate,
    decode_frame,
    empty_payload,
    encode_frame,
    gray_decode,
    gray_encode,
    modulation_guard_check,
    random_bits,
    synthesize_tx,
)
from isacsim.scheduler import generate_schedule


def test_reference_bit_budget(full_cfg, full_geo):
    assert bit_budget(full_cfg, full_geo) == 4293
    assert bit_rate(full_cfg, full_geo) == pytest.approx(
        4293 / full_cfg.frame_duration)


@pytest.mark.parametrize("raw", [
    {"num_samples": 256, "chirps_per_frame": 24},
    {"num_samples": 512, "chirps_per_frame": 39, "dpsk_order": 4},
    {"num_samples": 1024, "chirps_per_frame": 60, "dpsk_order": 16,
     "tx_x": 2, "tx_z": 1, "num_rb": 2},
    {"num_samples": 2048, "chirps_per_frame": 36, "num_rb": 2},
])
def test_budget_formula_property(raw):
    cfg = derive_config(raw)
    geo = derive_geometry(raw)
    L = geo.n_tx
    want = (cfg.M * cfg.P * int(np.floor(np.log2(cfg.N / 2)))
            + cfg.M * (cfg.P - L) * int(np.floor(np.log2(cfg.D))))
    assert bit_budget(cfg, geo) == want


def test_encode_decode_roundtrip(ci_cfg, ci_geo, rng):
    schedules = generate_schedule(ci_cfg, ci_geo, "pseudo-random", seed=2)
    for _ in range(20):
        bits = random_bits(ci_cfg, ci_geo, rng)
        payload = encode_frame(bits, ci_cfg, ci_geo, schedules)
        back = decode_frame(payload.delay_bins, payload.increments,
                            ci_cfg, ci_geo)
        assert np.array_equal(back, bits)


def test_payload_invariants(ci_cfg, ci_geo, rng):
    schedules = generate_schedule(ci_cfg, ci_geo, "pseudo-random", seed=2)
    bits = random_bits(ci_cfg, ci_geo, rng)
    payload = encode_frame(bits, ci_cfg, ci_geo, schedules)
    assert np.all(np.abs(np.abs(payload.beta) - 1.0) < 1e-12)
    assert payload.delay_bins.min() >= 0
    assert payload.delay_bins.max() < ci_cfg.N // 2
    # the first symbol of every per-antenna stream is the reference 1
    for m in range(ci_cfg.M):
        for l in range(ci_geo.n_tx):
            first = schedules[m].antenna_slots(l)[0]
            assert payload.beta[m, first] == pytest.approx(1.0 + 0.0j)


def test_all_zero_bits(ci_cfg, ci_geo):
    schedules = generate_schedule(ci_cfg, ci_geo, "pseudo-random", seed=4)
    bits = np.zeros(bit_budget(ci_cfg, ci_geo), dtype=np.int64)
    payload = encode_frame(bits, ci_cfg, ci_geo, schedules)
    assert np.all(payload.delay_bins == 0)
    assert np.allclose(payload.beta, 1.0)
    empty = empty_payload(ci_cfg, ci_geo)
    assert np.array_equal(empty.delay_bins, payload.delay_bins)
    assert np.allclose(empty.beta, payload.beta)


def test_little_endian_delay_first(ci_cfg, ci_geo):
    schedules = generate_schedule(ci_cfg, ci_geo, "pseudo-random", seed=4)
    bits = np.zeros(bit_budget(ci_cfg, ci_geo), dtype=np.int64)
    b_d = ci_cfg.data_bits_per_symbol()
    # value 5 = 101b, little endian: bit0=1, bit1=0, bit2=1
    bits[0] = 1
    bits[2] = 1
    payload = encode_frame(bits, ci_cfg, ci_geo, schedules)
    assert payload.delay_bins[0, 0] == 5
    assert np.count_nonzero(payload.delay_bins) == 1
    # first phase symbol sits right after all delay bits
    n_delay = ci_cfg.M * ci_cfg.P * b_d
    bits2 = np.zeros_like(bits)
    bits2[n_delay] = 1
    payload2 = encode_frame(bits2, ci_cfg, ci_geo, schedules)
    assert payload2.increments[0, 0, 0] == 1
    assert np.count_nonzero(payload2.increments) == 1


def test_beta_matches_stream_recursion(ci_cfg, ci_geo, rng):
    schedules = generate_schedule(ci_cfg, ci_geo, "pseudo-random", seed=6)
    bits = random_bits(ci_cfg, ci_geo, rng)
    payload = encode_frame(bits, ci_cfg, ci_geo, schedules)
    roots = np.exp(2j * np.pi * np.arange(ci_cfg.D) / ci_cfg.D)
    for m in range(ci_cfg.M):
        for l in range(ci_geo.n_tx):
            slots = schedules[m].antenna_slots(l)
            stream = payload.beta[m, slots]
            inc = gray_encode(payload.increments[m, l])
            # telescoping: each symbol is the previous times the increment
            assert np.allclose(stream[1:], stream[:-1] * roots[inc])


def test_gray_code_properties():
    v = np.arange(64)
    assert np.array_equal(gray_decode(gray_encode(v)), v)
    g = gray_encode(v)
    flips = np.bitwise_xor(g[1:], g[:-1])
    # adjacent codewords differ in exactly one bit
    assert np.all(np.bitwise_and(flips, flips - 1) == 0)
    assert np.all(flips > 0)


def test_encode_errors(ci_cfg, ci_geo, rng):
    schedules = generate_schedule(ci_cfg, ci_geo, "pseudo-random", seed=2)
    with pytest.raises(ConfigError, match="bits"):
        encode_frame(np.zeros(7, dtype=np.int64), ci_cfg, ci_geo, schedules)
    bits = random_bits(ci_cfg, ci_geo, rng)
    with pytest.raises(ConfigError, match="schedules"):
        encode_frame(bits, ci_cfg, ci_geo, schedules[:1])


def test_synthesize_tx_descriptors(ci_cfg, ci_geo, rng):
    schedules = generate_schedule(ci_cfg, ci_geo, "pseudo-random", seed=8)
    bits = random_bits(ci_cfg, ci_geo, rng)
    payload = encode_frame(bits, ci_cfg, ci_geo, schedules)
    descs = synthesize_tx(payload, ci_cfg, ci_geo, schedules)
    assert len(descs) == ci_cfg.M * ci_cfg.P
    rb_offsets = sorted({d.rb_offset_s for d in descs})
    assert rb_offsets == pytest.approx(
        [2 * m * float(ci_cfg.rb_delay) for m in range(ci_cfg.M)])
    for d in descs[: ci_cfg.P]:
        assert d.rb == 0
        assert d.antenna == schedules[0].antenna_at[d.slot]
        assert d.delay_bins == payload.delay_bins[0, d.slot]
        assert d.chirp_rate == pytest.approx(ci_cfg.alpha)
        # the equivalent waveform delay puts the tone on grid bin delay_bins
        assert d.delay_seconds(ci_cfg) * ci_cfg.alpha * ci_cfg.T == pytest.approx(
            d.delay_bins)


def test_guard_check(full_cfg, full_geo):
    rpt = modulation_guard_check(full_cfg, full_geo, v_max=15.0)
    assert rpt.grid_ok and rpt.grid_drift < 1.0
    assert rpt.dpsk_ok and rpt.dpsk_margin == pytest.approx(np.pi / full_cfg.D)
    # static scene: zero drift, any spacing passes
    rpt0 = modulation_guard_check(full_cfg, full_geo, v_max=0.0)
    assert rpt0.grid_drift == 0.0 and rpt0.grid_ok
    # large enough speeds must trip the one-bin bound
    rpt_hi = modulation_guard_check(full_cfg, full_geo, v_max=1e4)
    assert not rpt_hi.grid_ok
    # round-trip geometry accumulates drift twice as fast
    one_way = modulation_guard_check(full_cfg, full_geo, v_max=15.0,
                                     round_trip=False)
    assert rpt.grid_drift == pytest.approx(2 * one_way.grid_drift)


def test_decode_clips_erasure_fills(ci_cfg, ci_geo):
    # out-of-grid fill-ins (erased symbols) must still produce a well formed
    # bit image
    delays = np.full((ci_cfg.M, ci_cfg.P), ci_cfg.N, dtype=np.int64)
    incs = np.zeros((ci_cfg.M, ci_geo.n_tx, ci_cfg.P // ci_geo.n_tx - 1),
                    dtype=np.int64)
    bits = decode_frame(delays, incs, ci_cfg, ci_geo)
    assert bits.size == bit_budget(ci_cfg, ci_geo)
    assert set(np.unique(bits)).issubset({0, 1})
