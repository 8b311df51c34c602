"""Reduced-carrier time-domain mixer, kept solely as a validation oracle.

The production path synthesizes IF cubes in closed form.  This module builds
the same cubes the long way: generate the analytic chirp of every (RB, slot),
delay it through each propagation path, conjugate-mix against the receiver's
reference chirp, and sample.  Run it only at small N, P and a scaled-down
carrier; it is deliberately unoptimized.

The transmitter pre-rotates each chirp by the deterministic phase its own
payload delay induces (the carrier-ramp cross terms an implementation would
null digitally), otherwise the payload would scramble the phase constellation.
The remaining per-path constant phase (carrier times delay, quadratic ramp
terms) is exposed by ``constant_phase`` so tests can fold it into the
closed-form amplitudes when comparing the two routes.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import firwin

from .config import C, ArrayGeometry, SystemConfig
from .channel import IfCube, Target
from .modem import FramePayload
from .scheduler import LatinSchedule


def chirp_phase(cfg: SystemConfig, u: np.ndarray, delay_bins: int = 0) -> np.ndarray:
    """Transmit phase [rad] at chirp-local time u.

    The payload delay shifts the frequency ramp only; the compensation term
    psi cancels the data-dependent constants that mixing would otherwise
    leave behind.
    """
    tau_d = delay_bins / (cfg.alpha * cfg.T)
    s0 = cfg.T_chirp - cfg.T
    psi = 2 * np.pi * cfg.alpha * tau_d * (s0 - tau_d / 2.0)
    return 2 * np.pi * (cfg.fc * u + 0.5 * cfg.alpha * (u - tau_d) ** 2) + psi


def _envelope(u: np.ndarray, duration: float) -> np.ndarray:
    return ((u >= 0) & (u < duration)).astype(float)


def constant_phase(cfg: SystemConfig, target: Target, round_trip: bool) -> complex:
    """Constant phase factor the mixing route attaches to one path.

    Closed-form amplitudes multiplied by this factor should match the mixer
    output (payload-free scenes; the payload-distance cross term is not a
    constant and cannot be folded in).
    """
    k = 2.0 if round_trip else 1.0
    tau0 = k * target.distance / C
    s0 = cfg.T_chirp - cfg.T
    phase = cfg.fc * tau0 + cfg.alpha * tau0 * s0 - 0.5 * cfg.alpha * tau0 ** 2
    return complex(np.exp(2j * np.pi * phase))


def mixer_cube(cfg: SystemConfig, geo: ArrayGeometry, targets: list[Target],
               payload: FramePayload, schedules: list[LatinSchedule],
               kind: str) -> IfCube:
    """Brute-force IF cube via delay, conjugate mixing, and sampling."""
    round_trip = kind == "at"
    k = 2.0 if round_trip else 1.0
    M, L_rx, N, P = cfg.M, geo.n_rx, cfg.N, cfg.P
    s0 = cfg.T_chirp - cfg.T
    n_times = s0 + np.arange(N) / cfg.fs  # chirp-local sample instants
    cube = np.zeros((M, L_rx, N, P), dtype=complex)

    tx_pos = np.array([geo.tx_position(g) for g in range(geo.n_tx)])
    rx_pos = np.array([geo.rx_position(g) for g in range(geo.n_rx)])

    for m in range(cfg.M):
        sch = schedules[m]
        t_rb = float(2 * m * cfg.rb_delay)
        for p in range(cfg.P):
            t0 = p * cfg.T_slot + t_rb
            ref = np.exp(1j * chirp_phase(cfg, n_times, 0))
            rx_sum = np.zeros((L_rx, N), dtype=complex)
            d_bins = int(payload.delay_bins[m, p])
            ant = int(sch.antenna_at[p])
            for tgt in targets:
                # absolute time enters through the path delay (motion)
                t_abs = t0 + n_times
                tau = k * (tgt.distance + tgt.rate * t_abs) / C
                u = n_times - tau
                env = _envelope(u, cfg.T_chirp)
                wave = env * np.exp(1j * chirp_phase(cfg, u, d_bins))
                steer_tx = np.exp(-2j * np.pi * geo.spacing * (
                    tx_pos[ant, 0] * tgt.sin_phi_tx + tx_pos[ant, 1] * tgt.sin_theta_tx))
                steer_rx = np.exp(-2j * np.pi * geo.spacing * (
                    rx_pos[:, 0] * tgt.sin_phi_rx + rx_pos[:, 1] * tgt.sin_theta_rx))
                gain = np.conj(tgt.amplitude) * steer_tx * np.conj(payload.beta[m, p])
                rx_sum += gain * steer_rx[:, None] * wave[None, :]
            cube[m, :, :, p] = ref[None, :] * np.conj(rx_sum)
    return IfCube(data=cube, kind=kind)


# ---------------------------------------------------------------------------
# RB separation measurement


def _passband_filter(y: np.ndarray, fs_fine: float, cfg: SystemConfig,
                     taps: int = 191) -> np.ndarray:
    """Select the legitimate IF band [0, fs) with a complex FIR.

    The band edge sits 12.5% above fs so an in-RB beat near the top of the
    band is passed flat; the nearest cross-RB beat starts a full fs higher
    and lands deep in the stopband.
    """
    t = np.arange(y.size) / fs_fine
    center = 0.5 * cfg.fs
    shift = np.exp(-2j * np.pi * center * t)
    h = firwin(taps, 0.625 * cfg.fs, fs=fs_fine)
    filt = np.convolve(y * shift, h, mode="same")
    return filt / shift


def rb_leakage_db(cfg: SystemConfig, tau_in: float, tau_cross: float,
                  rb_signal: int = 1, oversample: int = 16) -> float:
    """In-RB tone power over cross-RB residual after mixing plus low-pass.

    Mixes the RB-0 reference against (a) an echo of RB 0 delayed by tau_in
    and (b) an echo of RB `rb_signal` delayed by tau_cross, both fed through
    the same passband filter and sampled on the RB-0 fast-time grid.
    """
    fs_fine = oversample * cfg.fs
    t = np.arange(int(round(cfg.T_slot * fs_fine))) / fs_fine
    s0 = cfg.T_chirp - cfg.T

    def mixed_power(rb: int, tau: float) -> float:
        off = float(2 * rb * cfg.rb_delay)
        u_ref = t - 0.0  # reference on RB 0
        ref = _envelope(u_ref, cfg.T_chirp) * np.exp(1j * chirp_phase(cfg, u_ref, 0))
        u_sig = t - off - tau
        sig = _envelope(u_sig, cfg.T_chirp) * np.exp(1j * chirp_phase(cfg, u_sig, 0))
        y = ref * np.conj(sig)
        y = _passband_filter(y, fs_fine, cfg)
        idx = np.round((s0 + np.arange(cfg.N) / cfg.fs) * fs_fine).astype(int)
        samples = y[idx]
        return float(np.mean(np.abs(samples) ** 2))

    p_in = mixed_power(0, tau_in)
    p_cross = mixed_power(rb_signal, tau_cross)
    if p_cross == 0.0:
        return np.inf
    return 10.0 * np.log10(p_in / p_cross)
