"""Configuration identities, validation rules, and sensing bounds."""

import json
from fractions import Fraction

import numpy as np
import pytest

from isacsim.config import (
    C,
    ConfigError,
    DEFAULT_RAW,
    default_config,
    derive_config,
    derive_geometry,
    load_config,
    sensing_bounds,
)

from conftest import CI_RAW


def test_timing_identities_exact(full_cfg):
    cfg = full_cfg
    # all identities hold on the rational views, not just within float error
    assert cfg.T_frac * Fraction(20_000_000) == Fraction(cfg.N)
    assert cfg.Td_frac * Fraction(640_000_000) == Fraction(20_000_000) * cfg.T_frac
    assert cfg.T_chirp_frac == cfg.T_frac + 2 * cfg.rb_delay
    assert cfg.T_slot_frac == cfg.T_chirp_frac + cfg.t_guard
    assert cfg.t_guard >= 2 * cfg.M * cfg.rb_delay
    assert cfg.rb_delay >= cfg.Td_frac


def test_default_values(full_cfg, full_geo):
    cfg, geo = full_cfg, full_geo
    assert cfg.N == 1024 and cfg.P == 120 and cfg.M == 3 and cfg.D == 8
    assert geo.n_tx == 3 and geo.n_rx == 15
    assert cfg.P % geo.n_tx == 0
    assert cfg.n_rb >= cfg.M
    assert cfg.T == pytest.approx(51.2e-6)
    assert cfg.Td == pytest.approx(1.6e-6)
    assert cfg.alpha == pytest.approx(cfg.B / cfg.T_chirp)


@pytest.mark.parametrize("raw", [{}, CI_RAW])
def test_grid_scales(raw):
    # rb_delay is tied to T, so bins-per-meter is scale invariant
    cfg = derive_config(raw)
    assert cfg.range_bin_scale(round_trip=True) == pytest.approx(4.0)
    assert cfg.range_bin_scale(round_trip=False) == pytest.approx(2.0)
    assert cfg.doppler_bin_scale(True) == pytest.approx(
        2 * cfg.P * cfg.T_slot * cfg.fc / C)


def test_bounds_one_way_doubles(full_cfg, full_geo):
    b = sensing_bounds(full_cfg, full_geo)
    assert b.pt.distance_res == 2 * b.at.distance_res
    assert b.pt.distance_max == 2 * b.at.distance_max
    assert b.pt.velocity_res == 2 * b.at.velocity_res
    assert b.pt.velocity_max == 2 * b.at.velocity_max


def test_bounds_reference_numbers(full_cfg, full_geo):
    cfg = full_cfg
    b = sensing_bounds(cfg, full_geo)
    assert b.at.distance_res == pytest.approx(
        C * cfg.T_chirp / (2 * cfg.B * cfg.T))
    # 0.25 m grid pitch both ways: distance_max = (N/2) bins / (4 bins/m)
    assert b.at.distance_max == pytest.approx(128.0)
    assert b.pt.distance_max == pytest.approx(256.0)
    assert b.at.velocity_max == pytest.approx(C / (4 * cfg.T_slot * cfg.fc))
    assert b.at.angle_max == pytest.approx(min(1.0, 1 / (2 * 0.5774)))


def test_virtual_aperture_narrows_beam(full_cfg, full_geo):
    # the echo side sees the tx*rx virtual aperture; the one-way side only
    # its physical rx aperture, so beams are wider by the per-axis tx count
    b = sensing_bounds(full_cfg, full_geo)
    assert b.pt.azimuth_res / b.at.azimuth_res == pytest.approx(full_geo.tx_x)
    assert b.pt.elevation_res / b.at.elevation_res == pytest.approx(full_geo.tx_z)


def test_data_bit_widths(full_cfg):
    assert full_cfg.data_bits_per_symbol() == 9
    assert full_cfg.dpsk_bits_per_symbol() == 3


@pytest.mark.parametrize("patch,frag", [
    ({"sampling_rate_hz": 1e9}, "exceeds bandwidth"),
    ({"chirps_per_frame": 121}, "not divisible"),
    ({"num_rb": 4}, "exceeds tx count"),
    ({"dpsk_order": 6}, "power of two"),
    ({"dpsk_order": 1}, "power of two"),
    ({"rb_delay_s": "1/1000000"}, "below the unambiguous delay"),
    ({"guard_s": "1/1000000"}, "shorter than"),
    ({"num_samples": 2}, "at least 4"),
    ({"num_rb": 0}, "num_rb"),
])
def test_validation_errors(patch, frag):
    with pytest.raises(ConfigError, match=frag):
        derive_config({**DEFAULT_RAW, **patch})


def test_window_seconds_alternative():
    raw = dict(DEFAULT_RAW)
    del raw["num_samples"]
    cfg = derive_config({**raw, "sample_window_s": 51.2e-6})
    assert cfg.N == 1024
    with pytest.raises(ConfigError, match="integer number of samples"):
        derive_config({**raw, "sample_window_s": 51.23e-6})


def test_rb_delay_defaults_to_unambiguous():
    # explicit None disables the ratio default and falls back to Td
    cfg = derive_config({"rb_delay_over_t": None})
    assert cfg.rb_delay == cfg.Td_frac


def test_load_config_roundtrip(tmp_path, full_cfg, full_geo):
    p = tmp_path / "params.json"
    p.write_text(json.dumps({"num_samples": 512}))
    cfg, geo = load_config(p)
    assert cfg.N == 512
    assert geo.n_rx == full_geo.n_rx
    d_cfg, d_geo = default_config()
    assert d_cfg == full_cfg and d_geo == full_geo


def test_geometry_l_shape(full_geo):
    g = full_geo
    # shared corner element: per-axis counts include it once
    assert g.n_tx == g.tx_x + g.tx_z - 1
    assert g.n_rx == g.rx_x + g.rx_z - 1
    assert g.n_virtual == g.n_tx * g.n_rx
    corner_tx = g.tx_position(g.tx_x - 1)
    assert corner_tx == (0.0, 0.0)
    # tx pitch equals the per-axis rx count, in virtual-pitch units
    assert g.tx_position(0) == (float((g.tx_x - 1) * g.rx_x), 0.0)
    assert g.rx_position(0) == (float(g.rx_x - 1), 0.0)
    assert g.rx_position(g.n_rx - 1) == (0.0, float(g.rx_z - 1))


def test_virtual_array_uniform(full_geo):
    # tx positions stride by the rx count, so summed (tx + rx) x-coordinates
    # tile 0 .. tx_x*rx_x - 1 without gaps
    g = full_geo
    tx_x = [g.tx_position(i)[0] for i in g.tx_axis_indices("x")]
    rx_x = [g.rx_position(i)[0] for i in g.rx_axis_indices("x")]
    virt = sorted(int(a + b) for a in tx_x for b in rx_x)
    assert virt == list(range(g.tx_x * g.rx_x))


def test_geometry_validation():
    with pytest.raises(ConfigError):
        derive_geometry({**DEFAULT_RAW, "rx_x": 0})
    with pytest.raises(ConfigError):
        derive_geometry({**DEFAULT_RAW, "spacing_wavelengths": 0.0})


def test_frame_duration(full_cfg):
    cfg = full_cfg
    assert cfg.frame_duration == pytest.approx(cfg.P * cfg.T_slot)
    assert np.isclose(cfg.frame_duration, 7.7824e-3, rtol=1e-6)
