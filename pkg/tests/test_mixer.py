"""Time-domain mixer oracle vs the closed-form IF synthesis."""

from dataclasses import replace

import numpy as np
import pytest

from isacsim.channel import Target, synth_if
from isacsim.mixer import chirp_phase, constant_phase, mixer_cube, rb_leakage_db
from isacsim.modem import empty_payload, encode_frame
from isacsim.scheduler import generate_schedule


def _two_targets(rate_scale):
    return [
        Target(distance=4.1, rate=3.0 * rate_scale, sin_phi_rx=0.2,
               sin_theta_rx=-0.1, sin_phi_tx=0.2, sin_theta_tx=-0.1,
               amplitude=1.0 + 0j),
        Target(distance=7.3, rate=-0.5 * rate_scale, sin_phi_rx=-0.35,
               sin_theta_rx=0.15, sin_phi_tx=-0.35, sin_theta_tx=0.15,
               amplitude=0.8 * np.exp(0.6j)),
    ]


def _rel_err(cfg, geo, kind, rate_scale):
    round_trip = kind == "at"
    targets = _two_targets(rate_scale)
    payload = empty_payload(cfg, geo)
    sched = generate_schedule(cfg, geo, "pseudo-random", seed=3)
    folded = [replace(t, amplitude=t.amplitude * constant_phase(cfg, t, round_trip))
              for t in targets]
    closed = synth_if(cfg, geo, folded, payload, sched, kind)
    fine = mixer_cube(cfg, geo, targets, payload, sched, kind)
    return np.linalg.norm(closed.data - fine.data) / np.linalg.norm(fine.data)


@pytest.mark.parametrize("kind", ["at", "pt"])
def test_static_scene_matches_closed_form(tiny_cfg, tiny_geo, kind):
    # motionless targets: the two synthesis routes agree to numerical noise
    assert _rel_err(tiny_cfg, tiny_geo, kind, rate_scale=0.0) < 1e-8


@pytest.mark.parametrize("kind", ["at", "pt"])
def test_moving_scene_within_tolerance(tiny_cfg, tiny_geo, kind):
    # motion within a chirp (envelope slip, range migration) is the only
    # effect the closed form drops; it stays far below the 1e-2 budget
    assert _rel_err(tiny_cfg, tiny_geo, kind, rate_scale=1.0) < 1e-2


def test_payload_delay_mixes_to_exact_bin(tiny_cfg):
    cfg = tiny_cfg
    d = 5
    s0 = cfg.T_chirp - cfg.T
    u = s0 + np.arange(cfg.N) / cfg.fs
    beat = np.exp(1j * (chirp_phase(cfg, u, 0) - chirp_phase(cfg, u, d)))
    tone = np.exp(2j * np.pi * d * np.arange(cfg.N) / cfg.N)
    np.testing.assert_allclose(beat, tone, atol=1e-9)


def test_phase_payload_passes_through_mixer(tiny_cfg, tiny_geo, rng):
    # delay-free payload: after the conjugate mix each slot carries beta
    cfg, geo = tiny_cfg, tiny_geo
    sched = generate_schedule(cfg, geo, "pseudo-random", seed=1)
    n_dpsk = cfg.M * geo.n_tx * (cfg.P // geo.n_tx - 1) * cfg.dpsk_bits_per_symbol()
    n_delay = cfg.M * cfg.P * cfg.data_bits_per_symbol()
    bits = np.concatenate([np.zeros(n_delay, dtype=np.int64),
                           rng.integers(0, 2, size=n_dpsk)])
    payload = encode_frame(bits, cfg, geo, sched)
    assert not payload.delay_bins.any()
    tgt = _two_targets(0.0)[:1]
    plain = mixer_cube(cfg, geo, tgt, empty_payload(cfg, geo), sched, "pt")
    mod = mixer_cube(cfg, geo, tgt, payload, sched, "pt")
    expect = plain.data * payload.beta[:, None, None, :]
    np.testing.assert_allclose(mod.data, expect, atol=1e-12)


def test_constant_phase_is_unit_modulus(tiny_cfg):
    t = _two_targets(0.0)[1]
    for rt in (True, False):
        assert abs(abs(constant_phase(tiny_cfg, t, rt)) - 1.0) < 1e-12
    # round trip doubles the path: same factor as a one-way target twice as far
    doubled = replace(t, distance=2 * t.distance)
    assert constant_phase(tiny_cfg, t, True) == pytest.approx(
        constant_phase(tiny_cfg, doubled, False))


def test_rb_isolation_at_coincident_delays(full_cfg):
    # zero in-RB and cross-RB path delays: hardest case stays above 40 dB
    assert rb_leakage_db(full_cfg, 0.0, 0.0) >= 40.0
