"""Closed-form IF synthesis, noise/clutter injection, and cube files."""

import numpy as np
import pytest

from isacsim.channel import (
    ClutterFootprint,
    IfCube,
    NoiseSpec,
    Target,
    clutter_footprint,
    doppler_frequency,
    inject_noise,
    load_cube,
    range_frequency,
    save_cube,
    synth_if_at,
    synth_if_pt,
    unit_amplitude,
)
from isacsim.config import ConfigError
from isacsim.modem import empty_payload, encode_frame, random_bits
from isacsim.scheduler import generate_schedule


def _sched(cfg, geo, seed=0):
    return generate_schedule(cfg, geo, "pseudo-random", seed=seed)


def test_grid_frequencies(full_cfg):
    # 30 m of path: 4 bins/m round trip, 2 bins/m one way
    assert range_frequency(full_cfg, 30.0, round_trip=True) == pytest.approx(120.0)
    assert range_frequency(full_cfg, 30.0, round_trip=False) == pytest.approx(60.0)
    v = 1.0 / full_cfg.doppler_bin_scale(True)
    assert doppler_frequency(full_cfg, v, True) == pytest.approx(1.0)
    assert doppler_frequency(full_cfg, v, False) == pytest.approx(0.5)


def test_superposition(ci_cfg, ci_geo, rng):
    schedules = _sched(ci_cfg, ci_geo)
    payload = empty_payload(ci_cfg, ci_geo)
    t1 = Target(distance=20.0, rate=2.0, sin_phi_rx=0.2,
                amplitude=unit_amplitude(rng))
    t2 = Target(distance=45.0, rate=-1.0, sin_theta_rx=-0.3,
                amplitude=0.5 * unit_amplitude(rng))
    both = synth_if_pt(ci_cfg, ci_geo, [t1, t2], payload, schedules)
    one = synth_if_pt(ci_cfg, ci_geo, [t1], payload, schedules)
    two = synth_if_pt(ci_cfg, ci_geo, [t2], payload, schedules)
    assert np.allclose(both.data, one.data + two.data, atol=1e-12)


def test_determinism(ci_cfg, ci_geo):
    schedules = _sched(ci_cfg, ci_geo)
    payload = empty_payload(ci_cfg, ci_geo)
    t = Target(distance=20.0, rate=2.0)
    a = synth_if_at(ci_cfg, ci_geo, [t], payload, schedules)
    b = synth_if_at(ci_cfg, ci_geo, [t], payload, schedules)
    assert np.array_equal(a.data, b.data)
    assert a.kind == "at"


def test_payload_is_fast_time_ramp(ci_cfg, ci_geo, rng):
    # a delay-domain payload multiplies each (m, p) pane by a pure fast-time
    # ramp: the cube equals the unmodulated one shifted on the DFT grid
    schedules = _sched(ci_cfg, ci_geo)
    bits = random_bits(ci_cfg, ci_geo, rng)
    payload = encode_frame(bits, ci_cfg, ci_geo, schedules)
    delay_only = empty_payload(ci_cfg, ci_geo)
    delay_only.delay_bins[...] = payload.delay_bins
    t = Target(distance=20.0, rate=2.0, sin_phi_rx=0.2)
    plain = synth_if_pt(ci_cfg, ci_geo, [t], empty_payload(ci_cfg, ci_geo),
                        schedules)
    shifted = synth_if_pt(ci_cfg, ci_geo, [t], delay_only, schedules)
    n = np.arange(ci_cfg.N)
    ramp = np.exp(2j * np.pi * np.einsum(
        "n,mp->mnp", n, payload.delay_bins.astype(float)) / ci_cfg.N)
    assert np.allclose(shifted.data, plain.data * ramp[:, None, :, :],
                       atol=1e-12)


def test_out_of_grid_errors(ci_cfg, ci_geo):
    schedules = _sched(ci_cfg, ci_geo)
    payload = empty_payload(ci_cfg, ci_geo)
    # beyond the one-way cap N/2 bins / 2 bins-per-m
    far = Target(distance=ci_cfg.N / 2 / 2.0 + 1.0, rate=0.0)
    with pytest.raises(ConfigError, match="outside"):
        synth_if_pt(ci_cfg, ci_geo, [far], payload, schedules)
    fast = Target(distance=20.0, rate=1e4)
    with pytest.raises(ConfigError, match="Doppler"):
        synth_if_pt(ci_cfg, ci_geo, [fast], payload, schedules)


def test_unit_amplitude(rng):
    amps = [unit_amplitude(rng) for _ in range(100)]
    assert all(abs(abs(a) - 1.0) < 1e-12 for a in amps)
    assert len({np.round(np.angle(a), 6) for a in amps}) > 90


def test_gaussian_noise_power(ci_cfg, ci_geo, rng):
    zero = IfCube(data=np.zeros((ci_cfg.M, ci_geo.n_rx, ci_cfg.N, ci_cfg.P),
                                dtype=complex), kind="pt")
    for snr_db, want in ((0.0, 1.0), (10.0, 0.1)):
        spec = NoiseSpec(mode="gaussian", snr_db=snr_db)
        noisy, fp = inject_noise(zero, spec, ci_cfg, ci_geo, rng)
        assert fp is None
        power = np.mean(np.abs(noisy.data) ** 2)
        assert power == pytest.approx(want, rel=0.02)


def test_noise_mode_none(ci_cfg, ci_geo, rng):
    cube = IfCube(data=np.ones((ci_cfg.M, ci_geo.n_rx, ci_cfg.N, ci_cfg.P),
                               dtype=complex), kind="at")
    out, fp = inject_noise(cube, NoiseSpec(mode="none"), ci_cfg, ci_geo, rng)
    assert fp is None
    assert np.array_equal(out.data, cube.data)


def test_urban_clutter_static_ridge(ci_cfg, ci_geo, rng):
    zero = IfCube(data=np.zeros((ci_cfg.M, ci_geo.n_rx, ci_cfg.N, ci_cfg.P),
                                dtype=complex), kind="pt")
    spec = NoiseSpec(mode="urban", snr_db=300.0)  # background negligible
    noisy, fp = inject_noise(zero, spec, ci_cfg, ci_geo, rng)
    assert isinstance(fp, ClutterFootprint)
    assert 40 <= fp.width <= 50
    assert fp.first_bin >= 0
    assert fp.first_bin + fp.width <= ci_cfg.N // 2
    ridge = noisy.data[:, :, fp.bins, :]
    # zero-velocity clutter: identical across slow time per bin
    assert np.allclose(ridge, ridge[..., :1], atol=1e-9)
    # slow-time DFT of a pure-clutter bin peaks at Doppler bin 0
    col = noisy.data[0, 0, fp.first_bin + 2, :]
    spec_p = np.abs(np.fft.fft(col))
    assert int(np.argmax(spec_p)) == 0
    # off-ridge bins carry (nearly) nothing
    off = np.delete(np.arange(ci_cfg.N), fp.bins)
    assert np.max(np.abs(noisy.data[:, :, off, :])) < 1e-6


def test_clutter_level_and_span(ci_cfg, ci_geo):
    # Rayleigh mean amplitude sits 10 dB over the unit target echo
    rng = np.random.default_rng(7)
    spec = NoiseSpec(mode="urban")
    gains = []
    centers = []
    for _ in range(200):
        fp = clutter_footprint(spec, ci_cfg, ci_geo, rng, round_trip=False)
        gains.append(np.abs(fp.gains).mean())
        centers.append(fp.first_bin + fp.width / 2)
    assert np.mean(gains) == pytest.approx(10 ** (10 / 20), rel=0.05)
    # centers follow the 20..30 m placement on the one-way grid (2 bins/m)
    assert 40 <= np.mean(centers) <= 60


def test_cube_io_roundtrip(tmp_path, ci_cfg, ci_geo, rng):
    schedules = _sched(ci_cfg, ci_geo)
    payload = empty_payload(ci_cfg, ci_geo)
    t = Target(distance=20.0, rate=2.0, amplitude=unit_amplitude(rng))
    cube = synth_if_at(ci_cfg, ci_geo, [t], payload, schedules)
    p = tmp_path / "frame.ifc"
    save_cube(cube, p)
    back = load_cube(p)
    assert back.kind == "at"
    assert np.array_equal(back.data, cube.data)


def test_cube_io_errors(tmp_path):
    p = tmp_path / "bad.ifc"
    p.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(ConfigError, match="not an IF cube"):
        load_cube(p)
    q = tmp_path / "short.ifc"
    q.write_bytes(b"IFC1A" + np.array([1, 1, 4, 2], dtype="<u4").tobytes()
                  + b"\x00" * 16)
    with pytest.raises(ConfigError, match="truncated"):
        load_cube(q)


def test_cube_validation():
    with pytest.raises(ConfigError, match="4-dimensional"):
        IfCube(data=np.zeros((2, 3, 4)), kind="at")
    with pytest.raises(ConfigError, match="kind"):
        IfCube(data=np.zeros((1, 1, 4, 2)), kind="xx")
