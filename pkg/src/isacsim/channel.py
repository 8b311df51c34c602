"""Baseband-equivalent IF cube synthesis and channel impairments.

The sampled IF signal of RB m at receive element l_rx is modeled directly in
closed form: each propagation path contributes a fast-time tone at the
composite (range + payload) grid frequency, a slow-time Doppler tone, the
payload phase symbol, and the array steering phases.  Round-trip (echo)
geometry doubles the range and Doppler scale factors relative to the one-way
link, and the echo carries both transmit and receive steering of the same
terminal while the one-way link carries departure steering of the transmitter
and arrival steering of the receiver.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .config import C, ArrayGeometry, ConfigError, SystemConfig
from .modem import FramePayload
from .scheduler import LatinSchedule


@dataclass(frozen=True)
class Target:
    """One propagation path as seen by a receiving terminal.

    distance is the total path length (echo paths store the one-way range;
    relay paths store the summed segment lengths).  rate is the time
    derivative of distance.  Angles are sines; the tx pair describes the
    departure direction at the transmit array, the rx pair the arrival
    direction at the receive array.  amplitude is the complex path gain of
    the sampled IF contribution.
    """

    distance: float
    rate: float
    sin_theta_tx: float = 0.0
    sin_phi_tx: float = 0.0
    sin_theta_rx: float = 0.0
    sin_phi_rx: float = 0.0
    amplitude: complex = 1.0 + 0j


def unit_amplitude(rng) -> complex:
    """Unit-modulus gain with uniform random phase."""
    return complex(np.exp(2j * np.pi * rng.uniform()))


@dataclass
class IfCube:
    """Sampled IF data, shape (M, L_rx, N, P), complex128.

    kind is "at" (echo) or "pt" (one-way)."""

    data: np.ndarray
    kind: str

    def __post_init__(self):
        if self.data.ndim != 4:
            raise ConfigError("IF cube must be 4-dimensional (M, L_rx, N, P)")
        if self.kind not in ("at", "pt"):
            raise ConfigError(f"unknown cube kind {self.kind!r}")

    @property
    def shape(self):
        return self.data.shape


_MAGIC = b"IFC1"


def save_cube(cube: IfCube, path):
    """Flat binary layout: 4-byte magic, kind byte, four little-endian uint32
    (M, L_rx, N, P), then C-ordered interleaved re/im float64 pairs."""
    m, l, n, p = cube.shape
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(b"A" if cube.kind == "at" else b"P")
        f.write(struct.pack("<4I", m, l, n, p))
        inter = np.empty((m, l, n, p, 2), dtype="<f8")
        inter[..., 0] = cube.data.real
        inter[..., 1] = cube.data.imag
        f.write(inter.tobytes(order="C"))


def load_cube(path) -> IfCube:
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise ConfigError("not an IF cube file")
        kind = "at" if f.read(1) == b"A" else "pt"
        m, l, n, p = struct.unpack("<4I", f.read(16))
        flat = np.frombuffer(f.read(), dtype="<f8")
    if flat.size != 2 * m * l * n * p:
        raise ConfigError("truncated IF cube file")
    inter = flat.reshape(m, l, n, p, 2)
    return IfCube(data=(inter[..., 0] + 1j * inter[..., 1]).astype(complex), kind=kind)


# ---------------------------------------------------------------------------
# Closed-form synthesis


def range_frequency(cfg: SystemConfig, distance: float, round_trip: bool) -> float:
    """Fast-time grid frequency (bins) of a path of the given total length."""
    return distance * cfg.range_bin_scale(round_trip)


def doppler_frequency(cfg: SystemConfig, rate: float, round_trip: bool) -> float:
    """Slow-time grid frequency (bins, signed) of a path rate."""
    return rate * cfg.doppler_bin_scale(round_trip)


def _steering(geo: ArrayGeometry, target: Target, schedules, cfg, kind: str):
    """Per-slot tx phase (M, P) and per-element rx phase (L_rx,) factors."""
    da = geo.spacing
    tx_pos = np.array([geo.tx_position(g) for g in range(geo.n_tx)])  # (L_tx, 2)
    rx_pos = np.array([geo.rx_position(g) for g in range(geo.n_rx)])
    tx_phase = np.exp(2j * np.pi * da * (tx_pos[:, 0] * target.sin_phi_tx +
                                         tx_pos[:, 1] * target.sin_theta_tx))
    rx_phase = np.exp(2j * np.pi * da * (rx_pos[:, 0] * target.sin_phi_rx +
                                         rx_pos[:, 1] * target.sin_theta_rx))
    tx_slot = np.stack([tx_phase[s.antenna_at] for s in schedules])  # (M, P)
    return tx_slot, rx_phase


def synth_if(cfg: SystemConfig, geo: ArrayGeometry, targets: list[Target],
             payload: FramePayload, schedules: list[LatinSchedule],
             kind: str) -> IfCube:
    """Closed-form IF cube for an echo ("at") or one-way ("pt") receiver.

    Each sample is the sum over paths of
    amplitude * beta[m,p] * exp(j 2 pi n (f_d + f_delay[m,p]) / N)
              * exp(j 2 pi p f_v / P) * tx_steer[m,p] * rx_steer[l_rx].

    Raises:
        ConfigError: a path's composite fast-time frequency would leave the
            unambiguous grid, or a Doppler magnitude exceeds half the grid.
    """
    round_trip = kind == "at"
    M, L_rx, N, P = cfg.M, geo.n_rx, cfg.N, cfg.P
    cube = np.zeros((M, L_rx, N, P), dtype=complex)
    n_idx = np.arange(N)
    p_idx = np.arange(P)
    # payload fast-time ramp, common to all paths of one RB
    data_ramp = np.exp(2j * np.pi * np.einsum(
        "n,mp->mnp", n_idx, payload.delay_bins.astype(float)) / N)  # (M, N, P)

    half = N / 2
    for t in targets:
        fd = range_frequency(cfg, t.distance, round_trip)
        fv = doppler_frequency(cfg, t.rate, round_trip)
        if not (0 <= fd < half):
            raise ConfigError(
                f"path at {t.distance:.1f} m maps to bin {fd:.1f}, outside [0, N/2)")
        if abs(fv) > P / 2:
            raise ConfigError(
                f"path rate {t.rate:.1f} m/s maps to Doppler {fv:.1f}, outside +/-P/2")
        tx_slot, rx_phase = _steering(geo, t, schedules, cfg, kind)
        range_tone = np.exp(2j * np.pi * n_idx * fd / N)            # (N,)
        doppler_tone = np.exp(2j * np.pi * p_idx * fv / P)          # (P,)
        slot_factor = t.amplitude * payload.beta * tx_slot * doppler_tone  # (M, P)
        cube += np.einsum("l,n,mp->mlnp", rx_phase, range_tone, slot_factor)
    cube *= data_ramp[:, None, :, :]
    return IfCube(data=cube, kind=kind)


def synth_if_at(cfg, geo, targets, payload, schedules) -> IfCube:
    """Echo cube at the sensing terminal (round-trip geometry)."""
    return synth_if(cfg, geo, targets, payload, schedules, kind="at")


def synth_if_pt(cfg, geo, targets, payload, schedules) -> IfCube:
    """One-way cube at a receiving terminal."""
    return synth_if(cfg, geo, targets, payload, schedules, kind="pt")


# ---------------------------------------------------------------------------
# Impairments


@dataclass(frozen=True)
class NoiseSpec:
    """Additive impairment description.

    mode "gaussian": circular complex noise with per-sample variance
    10^(-snr_db/10) against the unit-amplitude path convention.
    mode "urban": the same noise plus a zero-Doppler clutter ridge covering
    40-50 contiguous range bins whose center maps to a uniform 20-30 m
    distance, amplitudes Rayleigh with mean 10 dB above the unit path.
    """

    mode: str = "gaussian"
    snr_db: float = 10.0
    clutter_mean_db: float = 10.0
    clutter_extent: tuple[int, int] = (40, 50)
    clutter_center_m: tuple[float, float] = (20.0, 30.0)

    def __post_init__(self):
        if self.mode not in ("gaussian", "urban", "none"):
            raise ConfigError(f"unknown noise mode {self.mode!r}")

    @property
    def noise_sigma(self) -> float:
        return 10.0 ** (-self.snr_db / 20.0)


@dataclass
class ClutterFootprint:
    """Realized clutter ridge: bin interval plus per (RB, rx, bin) gains."""

    first_bin: int
    width: int
    gains: np.ndarray  # (M, L_rx, width) complex, constant over slow time

    @property
    def bins(self) -> np.ndarray:
        return np.arange(self.first_bin, self.first_bin + self.width)


def clutter_footprint(spec: NoiseSpec, cfg: SystemConfig, geo: ArrayGeometry,
                      rng, round_trip: bool) -> ClutterFootprint:
    """Draw the clutter interval and its static complex gains."""
    lo, hi = spec.clutter_extent
    width = int(rng.integers(lo, hi + 1))
    center_m = rng.uniform(*spec.clutter_center_m)
    center_bin = int(round(center_m * cfg.range_bin_scale(round_trip)))
    first = max(0, min(cfg.N // 2 - width, center_bin - width // 2))
    mean_amp = 10.0 ** (spec.clutter_mean_db / 20.0)
    sigma = mean_amp / np.sqrt(np.pi / 2.0)  # Rayleigh mean -> scale
    amp = rng.rayleigh(sigma, size=(cfg.M, geo.n_rx, width))
    phase = np.exp(2j * np.pi * rng.uniform(size=amp.shape))
    return ClutterFootprint(first_bin=first, width=width, gains=amp * phase)


def inject_noise(cube: IfCube, spec: NoiseSpec, cfg: SystemConfig,
                 geo: ArrayGeometry, rng) -> tuple[IfCube, ClutterFootprint | None]:
    """Return (impaired cube, clutter footprint or None)."""
    if spec.mode == "none":
        return IfCube(data=cube.data.copy(), kind=cube.kind), None
    sigma = spec.noise_sigma
    noise = (rng.standard_normal(cube.shape) + 1j * rng.standard_normal(cube.shape))
    data = cube.data + noise * (sigma / np.sqrt(2.0))
    if spec.mode == "gaussian":
        return IfCube(data=data, kind=cube.kind), None

    fp = clutter_footprint(spec, cfg, geo, rng, round_trip=cube.kind == "at")
    n_idx = np.arange(cfg.N)
    # static tones: per clutter bin a constant complex gain on every chirp
    ramp = np.exp(2j * np.pi * np.outer(n_idx, fp.bins) / cfg.N)  # (N, width)
    ridge = np.einsum("nw,mlw->mln", ramp, fp.gains)
    data += ridge[..., None]
    return IfCube(data=data, kind=cube.kind), fp
