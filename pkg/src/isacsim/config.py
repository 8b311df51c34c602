"""System configuration, array geometry, and sensing bounds.

All timing quantities are kept as exact rational multiples of the sample
period 1/fs (``fractions.Fraction``) so that derived identities such as
``Td * B == fs * T`` hold bit-exactly.  Float views are provided for DSP.

Angles are carried as sine values (dimensionless) throughout the package.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

C = 3e8  # propagation speed [m/s]


class ConfigError(ValueError):
    """Raised when a configuration violates a structural constraint."""


def _as_fraction(value) -> Fraction:
    # Accepts "2/60", [2, 60], ints, or floats (floats are rationalized).
    if isinstance(value, str):
        if "/" in value:
            num, den = value.split("/")
            return Fraction(int(num), int(den))
        return Fraction(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return Fraction(int(value[0]), int(value[1]))
    if isinstance(value, int):
        return Fraction(value)
    return Fraction(value).limit_denominator(10**9)


@dataclass(frozen=True)
class SystemConfig:
    """Waveform and frame-level parameters of one carrier configuration.

    Attributes:
        fc: carrier frequency [Hz]
        B: swept bandwidth [Hz]
        fs: IF sampling rate [Hz]
        N: fast-time samples per chirp (N = fs * T)
        P: slow-time chirps (slots) per frame
        M: number of resource blocks used by one terminal
        D: DPSK constellation order (power of two)
        rb_delay: resource-block delay budget [s], exact rational.
            Resource block m is offset by 2 * m * rb_delay inside a slot.
            Defaults to the maximum unambiguous delay Td = fs*T/B; a config
            may widen it (never narrow it).
        t_guard: inter-slot guard interval [s], exact rational,
            at least 2 * M * rb_delay.
    """

    fc: float
    B: float
    fs: float
    N: int
    P: int
    M: int
    D: int
    rb_delay: Fraction
    t_guard: Fraction

    # -- exact rational views -------------------------------------------------

    @property
    def T_frac(self) -> Fraction:
        """Sampled window per chirp [s], exact."""
        return Fraction(self.N) / _as_fraction(self.fs)

    @property
    def Td_frac(self) -> Fraction:
        """Maximum unambiguous delay fs*T/B [s], exact."""
        return _as_fraction(self.fs) * self.T_frac / _as_fraction(self.B)

    @property
    def T_chirp_frac(self) -> Fraction:
        """Chirp duration [s]: sampling window plus twice the RB delay budget."""
        return self.T_frac + 2 * self.rb_delay

    @property
    def T_slot_frac(self) -> Fraction:
        """Slot duration [s]: chirp plus guard."""
        return self.T_chirp_frac + self.t_guard

    # -- float views ----------------------------------------------------------

    @property
    def Ts(self) -> float:
        return 1.0 / self.fs

    @property
    def T(self) -> float:
        return float(self.T_frac)

    @property
    def Td(self) -> float:
        return float(self.Td_frac)

    @property
    def T_chirp(self) -> float:
        return float(self.T_chirp_frac)

    @property
    def T_gi(self) -> float:
        return float(self.t_guard)

    @property
    def T_slot(self) -> float:
        return float(self.T_slot_frac)

    @property
    def alpha(self) -> float:
        """Chirp rate B / T_chirp [Hz/s]."""
        return self.B / self.T_chirp

    @property
    def frame_duration(self) -> float:
        return self.P * self.T_slot

    @property
    def wavelength(self) -> float:
        return C / self.fc

    @property
    def n_rb(self) -> int:
        """Number of resource blocks that fit in one slot."""
        return int(self.T_slot_frac / (2 * self.rb_delay))

    # -- grid scale factors ---------------------------------------------------

    def range_bin_scale(self, round_trip: bool) -> float:
        """Range-DFT bins per meter of path length."""
        one_way = self.N * self.Ts * self.alpha / C
        return 2.0 * one_way if round_trip else one_way

    def doppler_bin_scale(self, round_trip: bool) -> float:
        """Doppler-DFT bins per m/s of radial rate."""
        one_way = self.P * self.T_slot * self.fc / C
        return 2.0 * one_way if round_trip else one_way

    def data_bits_per_symbol(self) -> int:
        """Bits carried by one delay-domain symbol."""
        return int(math.floor(math.log2(self.N / 2)))

    def dpsk_bits_per_symbol(self) -> int:
        return int(math.floor(math.log2(self.D)))


@dataclass(frozen=True)
class ArrayGeometry:
    """L-shaped transmit and receive arrays sharing a corner element.

    Per-axis element counts include the shared corner, so the total count on
    an L-array is ``n_x + n_z - 1``.  ``spacing`` is the receive element
    pitch in wavelengths; transmit elements on an axis are spaced by the
    receive count of that axis times ``spacing`` so that the virtual array
    is uniform at ``spacing``.

    Global index convention: index 0 is the element farthest out on the
    x-axis, the shared corner sits at index ``n_x - 1``, and indices then
    walk outward along the z-axis.  Per-axis indices count outward from the
    corner (corner = 0).
    """

    tx_x: int
    tx_z: int
    rx_x: int
    rx_z: int
    spacing: float = 0.5774  # in wavelengths

    def __post_init__(self):
        for name in ("tx_x", "tx_z", "rx_x", "rx_z"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.spacing <= 0:
            raise ConfigError("spacing must be positive")

    @property
    def n_tx(self) -> int:
        return self.tx_x + self.tx_z - 1

    @property
    def n_rx(self) -> int:
        return self.rx_x + self.rx_z - 1

    @property
    def n_virtual(self) -> int:
        return self.n_tx * self.n_rx

    @property
    def fov_sine(self) -> float:
        """Largest unambiguous |sin(angle)| for the virtual pitch."""
        return min(1.0, 1.0 / (2.0 * self.spacing))

    # -- global index <-> axis layout ------------------------------------

    def tx_axis_indices(self, axis: str) -> list[int]:
        """Global tx indices along one axis, ordered corner outward."""
        if axis == "x":
            return [self.tx_x - 1 - i for i in range(self.tx_x)]
        if axis == "z":
            return [self.tx_x - 1 + i for i in range(self.tx_z)]
        raise ConfigError(f"unknown axis {axis!r}")

    def rx_axis_indices(self, axis: str) -> list[int]:
        """Global rx indices along one axis, ordered corner outward."""
        if axis == "x":
            return [self.rx_x - 1 - i for i in range(self.rx_x)]
        if axis == "z":
            return [self.rx_x - 1 + i for i in range(self.rx_z)]
        raise ConfigError(f"unknown axis {axis!r}")

    def tx_position(self, g: int) -> tuple[float, float]:
        """(x, z) of tx element g in units of the virtual pitch (wavelength
        multiples of ``spacing``).  Tx pitch is the per-axis rx count."""
        corner = self.tx_x - 1
        if g < 0 or g >= self.n_tx:
            raise ConfigError(f"tx index {g} out of range")
        if g <= corner:
            return float((corner - g) * self.rx_x), 0.0
        return 0.0, float((g - corner) * self.rx_z)

    def rx_position(self, g: int) -> tuple[float, float]:
        """(x, z) of rx element g in units of the virtual pitch."""
        corner = self.rx_x - 1
        if g < 0 or g >= self.n_rx:
            raise ConfigError(f"rx index {g} out of range")
        if g <= corner:
            return float(corner - g), 0.0
        return 0.0, float(g - corner)


@dataclass(frozen=True)
class TerminalBounds:
    """Resolution and unambiguous span of each estimated parameter.

    Distances and velocities are meters and m/s; angles are in sine units.
    Velocity and angle spans are symmetric (+/- the stored value).
    """

    distance_res: float
    distance_max: float
    velocity_res: float
    velocity_max: float
    elevation_res: float
    azimuth_res: float
    angle_max: float


@dataclass(frozen=True)
class SensingBounds:
    at: TerminalBounds
    pt: TerminalBounds


def sensing_bounds(cfg: SystemConfig, geo: ArrayGeometry) -> SensingBounds:
    """Evaluate the closed-form resolution/range table for both terminal types.

    The monostatic terminal (round-trip propagation) resolves twice as finely
    in distance and half as widely in velocity as the one-way link.  Angle
    resolutions are beamwidths in sine units at broadside; the monostatic
    terminal gets the full virtual aperture, the one-way receiver only its
    physical aperture.
    """
    d_res_at = C * cfg.T_chirp / (2 * cfg.B * cfg.T)
    v_res_at = C / (2 * cfg.P * cfg.T_slot * cfg.fc)
    # operational distance cap: composite range+data frequency must stay on
    # the N-point grid, which pins the target part below N/2 bins
    d_max_at = (cfg.N / 2) / cfg.range_bin_scale(round_trip=True)
    v_max_at = C / (4 * cfg.T_slot * cfg.fc)
    el_res_at = 1.0 / (geo.tx_z * geo.rx_z * geo.spacing)
    az_res_at = 1.0 / (geo.tx_x * geo.rx_x * geo.spacing)
    at = TerminalBounds(
        distance_res=d_res_at,
        distance_max=d_max_at,
        velocity_res=v_res_at,
        velocity_max=v_max_at,
        elevation_res=el_res_at,
        azimuth_res=az_res_at,
        angle_max=geo.fov_sine,
    )
    pt = TerminalBounds(
        distance_res=2 * d_res_at,
        distance_max=2 * d_max_at,
        velocity_res=2 * v_res_at,
        velocity_max=2 * v_max_at,
        elevation_res=1.0 / (geo.rx_z * geo.spacing),
        azimuth_res=1.0 / (geo.rx_x * geo.spacing),
        angle_max=geo.fov_sine,
    )
    return SensingBounds(at=at, pt=pt)


# Reference operating point: 77 GHz carrier, 640 MHz sweep, 20 MHz sampling,
# 1024-sample window, 120 slots, 3 RBs, 8-ary DPSK, 2+2 tx / 8+8 rx L-arrays.
DEFAULT_RAW: dict = {
    "fc_hz": 77e9,
    "bandwidth_hz": 640e6,
    "sampling_rate_hz": 20e6,
    "num_samples": 1024,
    "chirps_per_frame": 120,
    "num_rb": 3,
    "dpsk_order": 8,
    "rb_delay_over_t": "2/60",
    "tx_x": 2,
    "tx_z": 2,
    "rx_x": 8,
    "rx_z": 8,
    "spacing_wavelengths": 0.5774,
}


def derive_geometry(raw: dict) -> ArrayGeometry:
    r = {**DEFAULT_RAW, **raw}
    return ArrayGeometry(
        tx_x=int(r["tx_x"]),
        tx_z=int(r["tx_z"]),
        rx_x=int(r["rx_x"]),
        rx_z=int(r["rx_z"]),
        spacing=float(r["spacing_wavelengths"]),
    )


def derive_config(raw: dict) -> SystemConfig:
    """Build a validated SystemConfig from user parameters.

    Every field is optional and falls back to the defaults above.  The sampled
    window may be given either as ``num_samples`` or as ``sample_window_s``
    (which must then be an integer number of sample periods).

    Raises:
        ConfigError: non-integral N, P not divisible by the tx count,
            rb_delay below the unambiguous delay, guard too short for the
            RB offsets, fs > B, or D not a power of two.
    """
    r = {**DEFAULT_RAW, **raw}
    fc = float(r["fc_hz"])
    B = float(r["bandwidth_hz"])
    fs = float(r["sampling_rate_hz"])
    if min(fc, B, fs) <= 0:
        raise ConfigError("fc, B, fs must be positive")
    if fs > B:
        raise ConfigError(f"sampling rate {fs:g} exceeds bandwidth {B:g}")

    if "sample_window_s" in r and "num_samples" not in raw:
        n_float = fs * float(r["sample_window_s"])
        N = round(n_float)
        if abs(n_float - N) > 1e-6:
            raise ConfigError(f"sample window is not an integer number of samples (fs*T = {n_float})")
    else:
        N = int(r["num_samples"])
    if N < 4:
        raise ConfigError("need at least 4 fast-time samples")

    P = int(r["chirps_per_frame"])
    M = int(r["num_rb"])
    D = int(r["dpsk_order"])
    if D < 2 or (D & (D - 1)) != 0:
        raise ConfigError(f"DPSK order {D} must be a power of two >= 2")
    if M < 1:
        raise ConfigError("num_rb must be >= 1")

    T = Fraction(N) / _as_fraction(fs)
    td = _as_fraction(fs) * T / _as_fraction(B)
    if "rb_delay_s" in r:
        rb_delay = _as_fraction(r["rb_delay_s"])
    elif "rb_delay_over_t" in r and r["rb_delay_over_t"] is not None:
        rb_delay = _as_fraction(r["rb_delay_over_t"]) * T
    else:
        rb_delay = td
    if rb_delay < td:
        raise ConfigError(
            f"rb_delay {float(rb_delay):g}s is below the unambiguous delay fs*T/B = {float(td):g}s")

    if "guard_s" in r:
        t_guard = _as_fraction(r["guard_s"])
    else:
        t_guard = 2 * M * rb_delay
    if t_guard < 2 * M * rb_delay:
        raise ConfigError(
            f"guard {float(t_guard):g}s is shorter than 2*M*rb_delay = {float(2 * M * rb_delay):g}s")

    n_tx = int(r["tx_x"]) + int(r["tx_z"]) - 1
    if P % n_tx != 0:
        raise ConfigError(f"chirps_per_frame {P} not divisible by tx count {n_tx}")
    if M > n_tx:
        raise ConfigError(f"num_rb {M} exceeds tx count {n_tx}; slot-level antenna reuse would collide")

    cfg = SystemConfig(fc=fc, B=B, fs=fs, N=N, P=P, M=M, D=D,
                       rb_delay=rb_delay, t_guard=t_guard)
    if cfg.n_rb < M:
        raise ConfigError(f"slot fits only {cfg.n_rb} RBs, {M} requested")
    return cfg


def load_config(path) -> tuple[SystemConfig, ArrayGeometry]:
    """Read a JSON parameter file; missing fields use the defaults."""
    with open(path) as f:
        raw = json.load(f)
    if not isinstance(raw, dict):
        raise ConfigError("config file must contain a JSON object")
    return derive_config(raw), derive_geometry(raw)


def default_config() -> tuple[SystemConfig, ArrayGeometry]:
    return derive_config({}), derive_geometry({})
