"""Baseband simulator for a time-multiplexed MIMO radar-communication link.

A monostatic terminal rides data on its ranging waveform: chirp delays carry
one symbol stream, slot-to-slot phase increments a second one, while antennas
hop slots in per-cycle random Latin order.  Peers demodulate blindly, strip
the payload, and reuse the same samples for multi-target estimation; a small
tracker fuses frames and primes the next demodulation.

Entry points:

- config.derive_config / derive_geometry: validated parameter objects
- scheduler.generate_schedule: slot/antenna hopping plans
- modem.encode_frame / synthesize_tx: payload and waveform synthesis
- channel.synth_if_at / synth_if_pt: closed-form IF cubes plus noise
- receiver.pipeline_at / pipeline_pt: the two receive chains
- tracking.Tracker: frame-to-frame fusion and hint export
- harness: Monte-Carlo sweeps and the dynamic flight scenario
- cli: the ``isacsim`` command
"""

from .config import (
    ArrayGeometry,
    ConfigError,
    SensingBounds,
    SystemConfig,
    TerminalBounds,
    default_config,
    derive_config,
    derive_geometry,
    load_config,
    sensing_bounds,
)
from .scheduler import LatinSchedule, generate_schedule
from .modem import (
    FramePayload,
    bit_budget,
    bit_rate,
    decode_frame,
    empty_payload,
    encode_frame,
    random_bits,
)
from .channel import (
    IfCube,
    NoiseSpec,
    Target,
    inject_noise,
    load_cube,
    save_cube,
    synth_if_at,
    synth_if_pt,
    unit_amplitude,
)
from .receiver import (
    AtFrameResult,
    PtFrameResult,
    ReceiverParams,
    TargetEstimate,
    TrackHint,
    pipeline_at,
    pipeline_pt,
)
from .tracking import Track, Tracker, TrackerParams

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry",
    "AtFrameResult",
    "ConfigError",
    "FramePayload",
    "IfCube",
    "LatinSchedule",
    "NoiseSpec",
    "PtFrameResult",
    "ReceiverParams",
    "SensingBounds",
    "SystemConfig",
    "Target",
    "TargetEstimate",
    "TerminalBounds",
    "Track",
    "TrackHint",
    "Tracker",
    "TrackerParams",
    "bit_budget",
    "bit_rate",
    "decode_frame",
    "default_config",
    "derive_config",
    "derive_geometry",
    "empty_payload",
    "encode_frame",
    "generate_schedule",
    "inject_noise",
    "load_config",
    "load_cube",
    "pipeline_at",
    "pipeline_pt",
    "random_bits",
    "save_cube",
    "sensing_bounds",
    "synth_if_at",
    "synth_if_pt",
    "unit_amplitude",
]
