"""Payload encoding onto the dual-domain chirp waveform.

Two data domains ride on every frame:

* delay domain: each (RB, slot) pair carries floor(log2(N/2)) bits as an
  on-grid fast-time frequency offset in {0 .. N/2 - 1};
* phase domain: each transmit antenna's slot stream carries differential
  PSK increments (D-th roots of unity, Gray-mapped), first symbol pinned
  to 1 as the reference.

Bits are packed little-endian, delay symbols first (RB-major, then slot),
then DPSK increments (RB-major, antenna, then stream position).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ArrayGeometry, ConfigError, SystemConfig
from .scheduler import LatinSchedule


def bit_budget(cfg: SystemConfig, geo: ArrayGeometry) -> int:
    """Payload bits carried by one frame."""
    b_delay = cfg.data_bits_per_symbol()
    b_phase = cfg.dpsk_bits_per_symbol()
    return cfg.M * cfg.P * b_delay + cfg.M * (cfg.P - geo.n_tx) * b_phase


def bit_rate(cfg: SystemConfig, geo: ArrayGeometry) -> float:
    """Payload bits per second at the frame cadence."""
    return bit_budget(cfg, geo) / cfg.frame_duration


def gray_encode(v: np.ndarray) -> np.ndarray:
    return v ^ (v >> 1)


def gray_decode(g: np.ndarray) -> np.ndarray:
    v = np.asarray(g, dtype=np.int64).copy()
    shift = 1
    while shift < 64:
        v ^= v >> shift
        shift <<= 1
    return v


def _bits_to_ints(bits: np.ndarray, width: int) -> np.ndarray:
    """Little-endian groups of `width` bits -> integers."""
    b = bits.reshape(-1, width)
    weights = (1 << np.arange(width, dtype=np.int64))
    return (b * weights).sum(axis=1)


def _ints_to_bits(vals: np.ndarray, width: int) -> np.ndarray:
    v = np.asarray(vals, dtype=np.int64).reshape(-1, 1)
    return ((v >> np.arange(width, dtype=np.int64)) & 1).reshape(-1)


@dataclass
class FramePayload:
    """Per-frame modulation state shared by transmitter and channel.

    Attributes:
        delay_bins: (M, P) int, fast-time offset f_D in DFT bins.
        increments: (M, L_tx, P/L-1) int, DPSK increment indices (pre-Gray).
        beta: (M, P) complex, the per-slot DPSK symbol after the running
            product, scattered from antenna streams to slot order.
        bits: the packed payload this frame encodes.
    """

    delay_bins: np.ndarray
    increments: np.ndarray
    beta: np.ndarray
    bits: np.ndarray
    D: int

    @property
    def n_rb(self) -> int:
        return self.delay_bins.shape[0]


def empty_payload(cfg: SystemConfig, geo: ArrayGeometry) -> FramePayload:
    """Unmodulated frame: zero delay offsets, all-ones phase symbols."""
    L = geo.n_tx
    return FramePayload(
        delay_bins=np.zeros((cfg.M, cfg.P), dtype=np.int64),
        increments=np.zeros((cfg.M, L, cfg.P // L - 1), dtype=np.int64),
        beta=np.ones((cfg.M, cfg.P), dtype=complex),
        bits=np.zeros(0, dtype=np.int64),
        D=cfg.D,
    )


def encode_frame(bits: np.ndarray, cfg: SystemConfig, geo: ArrayGeometry,
                 schedules: list[LatinSchedule]) -> FramePayload:
    """Map a packed bit vector onto delay offsets and DPSK symbols.

    Raises:
        ConfigError: wrong bit count or schedule shape mismatch.
    """
    bits = np.asarray(bits, dtype=np.int64)
    need = bit_budget(cfg, geo)
    if bits.size != need:
        raise ConfigError(f"payload is {bits.size} bits, frame carries {need}")
    if len(schedules) != cfg.M:
        raise ConfigError(f"need {cfg.M} schedules, got {len(schedules)}")
    L = geo.n_tx
    b_d = cfg.data_bits_per_symbol()
    b_p = cfg.dpsk_bits_per_symbol()
    n_delay_bits = cfg.M * cfg.P * b_d

    delay_vals = _bits_to_ints(bits[:n_delay_bits], b_d).reshape(cfg.M, cfg.P)
    if delay_vals.max(initial=0) >= cfg.N // 2:
        raise ConfigError("delay symbol exceeds the N/2 grid")

    inc_vals = _bits_to_ints(bits[n_delay_bits:], b_p).reshape(cfg.M, L, cfg.P // L - 1)
    inc_gray = gray_encode(inc_vals)

    beta = np.ones((cfg.M, cfg.P), dtype=complex)
    roots = np.exp(2j * np.pi * np.arange(cfg.D) / cfg.D)
    for m in range(cfg.M):
        sch = schedules[m]
        for l in range(L):
            stream = np.ones(cfg.P // L, dtype=complex)
            stream[1:] = np.cumprod(roots[inc_gray[m, l]])
            beta[m, sch.antenna_slots(l)] = stream
    return FramePayload(delay_bins=delay_vals, increments=inc_vals,
                        beta=beta, bits=bits, D=cfg.D)


def decode_frame(delay_bins: np.ndarray, increments: np.ndarray,
                 cfg: SystemConfig, geo: ArrayGeometry) -> np.ndarray:
    """Inverse of encode_frame: symbol matrices back to the packed bit vector.

    Out-of-range delay values (erasure fill-ins) are clipped into the grid
    so the bit image stays well formed.
    """
    b_d = cfg.data_bits_per_symbol()
    b_p = cfg.dpsk_bits_per_symbol()
    dv = np.clip(np.asarray(delay_bins, dtype=np.int64), 0, (1 << b_d) - 1)
    iv = np.asarray(increments, dtype=np.int64) & ((1 << b_p) - 1)
    return np.concatenate([_ints_to_bits(dv.reshape(-1), b_d),
                           _ints_to_bits(iv.reshape(-1), b_p)])


def random_bits(cfg: SystemConfig, geo: ArrayGeometry, rng) -> np.ndarray:
    return rng.integers(0, 2, size=bit_budget(cfg, geo), dtype=np.int64)


# ---------------------------------------------------------------------------
# Transmit-side descriptors


@dataclass(frozen=True)
class TxChirpDescriptor:
    """One chirp of one RB, fully specifying what the front end emits.

    delay_bins is the payload-induced fast-time grid shift (equivalently a
    waveform delay of delay_bins / (alpha * T) seconds); rb_offset is the
    RB's time stagger inside the slot.
    """

    rb: int
    slot: int
    antenna: int
    delay_bins: int
    amplitude: complex
    rb_offset_s: float
    chirp_rate: float

    def delay_seconds(self, cfg: SystemConfig) -> float:
        return self.delay_bins / (cfg.alpha * cfg.T)


def synthesize_tx(payload: FramePayload, cfg: SystemConfig, geo: ArrayGeometry,
                  schedules: list[LatinSchedule]) -> list[TxChirpDescriptor]:
    """Expand a payload into the per-chirp descriptor list (M*P entries)."""
    out = []
    for m in range(cfg.M):
        sch = schedules[m]
        for p in range(cfg.P):
            out.append(TxChirpDescriptor(
                rb=m,
                slot=p,
                antenna=int(sch.antenna_at[p]),
                delay_bins=int(payload.delay_bins[m, p]),
                amplitude=complex(payload.beta[m, p]),
                rb_offset_s=float(2 * m * cfg.rb_delay),
                chirp_rate=cfg.alpha,
            ))
    return out


# ---------------------------------------------------------------------------
# Motion guards


@dataclass(frozen=True)
class GuardReport:
    """Diagnostics for payload integrity under target motion.

    grid_drift is the worst-case fast-time grid slip (in bins) accumulated
    over one frame at +/- v_max; the delay modulation grid stays clean while
    it is below one bin.  dpsk_drift is the residual phase [rad] across the
    widest antenna-slot gap for a given velocity error, compared against
    half the constellation spacing.
    """

    grid_drift: float
    grid_ok: bool
    v_critical: float
    dpsk_drift: float
    dpsk_margin: float
    dpsk_ok: bool


def modulation_guard_check(cfg: SystemConfig, geo: ArrayGeometry, v_max: float,
                           velocity_error: float | None = None,
                           round_trip: bool = True) -> GuardReport:
    """Check that motion cannot smear either data domain.

    Args:
        v_max: largest radial speed in the scene [m/s].
        velocity_error: residual speed error after pre-compensation; defaults
            to half a Doppler bin.
        round_trip: True for the monostatic (echo) geometry.
    """
    from .config import C

    k = 2.0 if round_trip else 1.0
    drift = cfg.alpha * cfg.N * cfg.Ts * k * abs(v_max) * cfg.P * cfg.T_slot / C
    v_crit = np.inf if v_max == 0 else abs(v_max) / drift if drift > 0 else np.inf

    if velocity_error is None:
        velocity_error = 0.5 * C / (k * cfg.P * cfg.T_slot * cfg.fc)
    gap = 2 * geo.n_tx - 1  # widest slot gap between consecutive symbols of one antenna
    dpsk_drift = 2 * np.pi * gap * cfg.T_slot * cfg.fc * k * abs(velocity_error) / C
    margin = np.pi / cfg.D
    return GuardReport(
        grid_drift=float(drift),
        grid_ok=bool(drift < 1.0),
        v_critical=float(v_crit),
        dpsk_drift=float(dpsk_drift),
        dpsk_margin=float(margin),
        dpsk_ok=bool(dpsk_drift < margin),
    )
