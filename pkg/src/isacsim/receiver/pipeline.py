"""Receive pipelines for both terminal roles.

The monostatic path knows its own payload, strips it, and estimates the
scene on the cleaned image.  The link path first recovers the payload from
the data (shift consensus over known scatterer rows, then per-antenna
differential phase), strips its own decisions, and runs the same scene
estimation.  Scene estimation is shared: candidate range rows from a CFAR
pass, per-antenna slow-time sparse recovery on those rows, detection on the
recovered tone map, clustering, then per-cluster refinement and direction
estimation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..channel import IfCube
from ..config import ArrayGeometry, SystemConfig
from ..modem import decode_frame
from ..scheduler import LatinSchedule
from . import demod
from .angles import SineEstimate, estimate_sine, virtual_snapshot
from .detection import CfarParams, ClutterReport, cfar_1d, cluster, filter_clutter
from .sparse import doppler_atoms, omp_batch


@dataclass(frozen=True)
class ReceiverParams:
    """Tunables of the shared receive chain.

    noise-relative levels are linear-power dB over the estimated per-cell
    noise; the sparse map detector combines a CFAR pass with that absolute
    floor because a well-recovered map is mostly zeros.
    """

    range_cfar: CfarParams = field(default_factory=lambda: CfarParams(
        train=16, guard=4, pfa=1e-4))
    doppler_cfar: CfarParams = field(default_factory=lambda: CfarParams(
        train=8, guard=2, pfa=1e-3))
    doppler_min_snr_db: float = 12.0
    omp_max_iter: int = 4
    omp_eps_factor: float = 1.5
    rho_d: int = 1
    rho_v: int = 1
    max_candidate_rows: int = 24
    max_targets: int = 8
    clutter_filter: bool = False
    clutter_min_run: int = 40
    dpsk_erasure_floor: float = 1e-3
    angle_grid: int = 2048
    range_window: str = "hann"
    # candidate rows more than this far below the strongest one are window
    # sidelobes, not returns; hint rows are exempt (track continuity)
    row_dynamic_range_db: float = 25.0
    # final estimates under this fraction of the strongest one's power are
    # residual splatter from imperfect payload removal, not scatterers
    estimate_min_rel: float = 0.05
    # "grid" reports detection-grid peaks as the raw estimates (the state
    # fusion stage then smooths the quantization); "continuous" maximizes
    # matched power over fractional bins instead, which makes the raw
    # estimates nearly exact at high SNR and leaves fusion nothing to add
    estimate_refine: str = "grid"


@dataclass(frozen=True)
class TrackHint:
    """Predicted scatterer coordinates on this receiver's grid (bins).

    walking marks a track whose distance keeps jumping away from its own
    velocity prediction — the signature of a path whose true radial rate
    folded (one-frame-stale rows).  Walking rows still seed candidate rows
    for detection, but are kept out of the payload-shift consensus and the
    phase-demodulation anchor.
    """

    range_bin: float
    doppler_bin: float = 0.0
    walking: bool = False


@dataclass
class TargetEstimate:
    """One resolved scatterer.

    distance/velocity are the reported estimates (detection-grid peaks
    under the default refine mode); range_bin/doppler_bin always carry the
    sub-bin peak position, which downstream consumers use as demodulation
    anchors.  Angles are arrival directions at the estimating terminal; the
    link receiver additionally reports (ambiguous) departure-side estimates
    since its transmit-aperture samples are strided.  Angle fields are None
    when the relevant aperture has fewer than two elements.
    """

    distance: float
    velocity: float
    power: float
    range_bin: float
    doppler_bin: float
    azimuth: SineEstimate | None
    elevation: SineEstimate | None
    departure_azimuth: SineEstimate | None = None
    departure_elevation: SineEstimate | None = None
    n_cells: int = 1
    score: float = 0.0

    @property
    def sin_azimuth(self) -> float:
        return 0.0 if self.azimuth is None else self.azimuth.sin_angle

    @property
    def sin_elevation(self) -> float:
        return 0.0 if self.elevation is None else self.elevation.sin_angle


@dataclass
class EstimationDebug:
    noise_cell: float
    rows: np.ndarray
    sparse_map: np.ndarray      # (R, P) recovered tone power
    matched_map: np.ndarray     # (R, P) dense correlation power


def _parabolic(y_l: float, y_c: float, y_r: float) -> float:
    den = y_l - 2.0 * y_c + y_r
    if den == 0:
        return 0.0
    return float(np.clip(0.5 * (y_l - y_r) / den, -0.5, 0.5))


def _aligned_mean(G: np.ndarray) -> np.ndarray:
    """Average (M, L_tx, L_rx) coefficient blocks coherently over axis 0."""
    ref = G[0]
    acc = ref.astype(complex).copy()
    for m in range(1, G.shape[0]):
        z = np.vdot(ref, G[m])
        if z != 0:
            acc += G[m] * np.exp(-1j * np.angle(z))
        else:
            acc += G[m]
    return acc / G.shape[0]


def _axis_angles(Gbar: np.ndarray, geo: ArrayGeometry, kind: str,
                 grid_size: int) -> tuple:
    """Direction estimates from one coefficient block (L_tx, L_rx).

    Monostatic: full virtual uniform arrays per axis.  Link: receive-side
    arrays with unit stride, transmit-side with the per-axis receive-count
    stride of the transmitter (ambiguous; candidates carried along).
    """
    da = geo.spacing
    fov = geo.fov_sine

    def est(x, stride):
        x = np.asarray(x)
        if x.size < 2:
            return None
        return estimate_sine(x, da, stride=stride, fov_sine=fov,
                             grid_size=grid_size)

    tx_x = geo.tx_axis_indices("x")
    tx_z = geo.tx_axis_indices("z")
    rx_x = geo.rx_axis_indices("x")
    rx_z = geo.rx_axis_indices("z")

    if kind == "at":
        az = est(virtual_snapshot(Gbar[np.ix_(tx_x, rx_x)]), 1.0)
        el = est(virtual_snapshot(Gbar[np.ix_(tx_z, rx_z)]), 1.0)
        return az, el, None, None

    # link receiver: rank-one factorization splits arrival from departure
    # (outer(t, r) decomposes with u ~ t and the first vh row ~ r directly)
    u, s, vh = np.linalg.svd(Gbar, full_matrices=False)
    rx_vec = vh[0] * s[0]
    tx_vec = u[:, 0]
    az = est(rx_vec[rx_x], 1.0)
    el = est(rx_vec[rx_z], 1.0)
    dep_az = est(tx_vec[tx_x], float(geo.rx_x))
    dep_el = est(tx_vec[tx_z], float(geo.rx_z))
    return az, el, dep_az, dep_el


def estimate_scene(Z: np.ndarray, cfg: SystemConfig, geo: ArrayGeometry,
                   schedules: list[LatinSchedule], kind: str,
                   params: ReceiverParams,
                   hints: tuple[TrackHint, ...] = ()) -> tuple[list[TargetEstimate], EstimationDebug]:
    """Detect and parameterize scatterers on a payload-free range image.

    Args:
        Z: (M, L_rx, N, P) range-DFT image with all payload removed.
        kind: "at" (round-trip grid) or "pt" (one-way grid).
        hints: rows to keep as candidates even when the CFAR pass misses
            them (track continuity at low level).
    """
    round_trip = kind == "at"
    M, L_rx, N, P = Z.shape
    L = geo.n_tx
    S = P // L
    half = N // 2

    prof = (np.abs(Z) ** 2).mean(axis=(0, 1, 3))       # (N,)
    prof_half = prof[:half]
    noise_cell = float(np.median(prof_half))
    # the profile noncoherently integrates M*L_rx*P cells, so its threshold
    # must come from the averaged-cell quantile, not the raw-cell one
    det = cfar_1d(prof_half, replace(params.range_cfar, avg=M * L_rx * P))
    rows = np.flatnonzero(det)
    if rows.size:
        cut = prof_half[rows].max() * 10.0 ** (-params.row_dynamic_range_db / 10.0)
        rows = rows[prof_half[rows] >= cut]
    if rows.size > params.max_candidate_rows:
        keep = np.argsort(-prof_half[rows])[:params.max_candidate_rows]
        rows = rows[keep]
    hint_rows = [int(round(h.range_bin)) % N for h in hints]
    hint_rows = [r for r in hint_rows if r < half]
    rows = np.unique(np.concatenate([rows, np.asarray(hint_rows, dtype=int)])
                     if hint_rows else rows).astype(int)

    debug = EstimationDebug(noise_cell=noise_cell, rows=rows,
                            sparse_map=np.zeros((rows.size, P)),
                            matched_map=np.zeros((rows.size, P)))
    if rows.size == 0:
        return [], debug

    R = rows.size
    eps = params.omp_eps_factor * S * noise_cell
    spec_store = np.zeros((M, L, L_rx, R, P), dtype=complex)
    sparse_pow = np.zeros((R, P))
    matched_pow = np.zeros((R, P))
    for m in range(M):
        for lt in range(L):
            slots = schedules[m].antenna_slots(lt)
            atoms = doppler_atoms(P, slots)
            series = Z[m][:, rows][:, :, slots].reshape(L_rx * R, S)
            res = omp_batch(series, atoms, params.omp_max_iter, eps)
            sparse_pow += (np.abs(res.coeffs) ** 2).reshape(L_rx, R, P).sum(axis=0)
            spec = series @ atoms.conj()
            spec_store[m, lt] = spec.reshape(L_rx, R, P)
            matched_pow += (np.abs(spec) ** 2).reshape(L_rx, R, P).sum(axis=0)
    n_series = M * L * L_rx
    sparse_pow /= n_series
    matched_pow /= n_series
    debug.sparse_map = sparse_pow
    debug.matched_map = matched_pow

    floor = noise_cell * 10.0 ** (params.doppler_min_snr_db / 10.0)
    det_params = replace(params.doppler_cfar, min_level=floor, avg=n_series)
    cells, scores = [], []
    for ri in range(R):
        mask = cfar_1d(sparse_pow[ri], det_params)
        for k in np.flatnonzero(mask):
            cells.append((int(rows[ri]), int(k)))
            scores.append(float(sparse_pow[ri, k]))
    groups = cluster(np.array(cells), np.array(scores),
                     rho_d=params.rho_d, rho_v=params.rho_v,
                     wrap=(N, P))[:params.max_targets]

    row_pos = {int(r): i for i, r in enumerate(rows)}
    estimates = []
    for g in groups:
        row0, k0 = g.rep
        ri = row_pos[row0]

        # coefficients at a candidate tone, one per (RB, tx, rx)
        def coeffs_at(k_frac: float) -> np.ndarray:
            G = np.zeros((M, L, L_rx), dtype=complex)
            for m in range(M):
                row = Z[m][:, row0, :]
                for lt in range(L):
                    slots = schedules[m].antenna_slots(lt)
                    tone = np.exp(-2j * np.pi * slots * k_frac / P) / S
                    G[m, lt] = row[:, slots] @ tone
            return G

        def tone_power(k_frac: float) -> float:
            return float((np.abs(coeffs_at(k_frac)) ** 2).sum())

        # sub-bin peak positions are always kept (range_bin/doppler_bin);
        # they anchor the link receiver's next-frame demodulation, which
        # needs the anchor row good to a fraction of a bin
        mrow = matched_pow[ri]
        dk = _parabolic(mrow[(k0 - 1) % P], mrow[k0], mrow[(k0 + 1) % P])
        k_t = k0 + dk
        if params.estimate_refine == "continuous":
            # matched-power maximization over fractional bins; parabolic
            # interpolation on the power spectrum carries a
            # fraction-dependent bias of a few hundredths of a bin
            ks = k_t + np.linspace(-0.4, 0.4, 9)
            k_t = ks[int(np.argmax([tone_power(k) for k in ks]))]
            k_lo, k_hi = k_t - 0.1, k_t + 0.1
            for _ in range(20):
                k_a = k_lo + (k_hi - k_lo) / 3.0
                k_b = k_hi - (k_hi - k_lo) / 3.0
                if tone_power(k_a) < tone_power(k_b):
                    k_lo = k_a
                else:
                    k_hi = k_b
            k_t = (k_lo + k_hi) / 2.0
        elif params.estimate_refine != "grid":
            raise ValueError(f"unknown refine mode {params.estimate_refine!r}")
        k_t = k_t % P
        G = coeffs_at(k_t)
        dr = _parabolic(prof[(row0 - 1) % N], prof[row0], prof[(row0 + 1) % N])
        row_t = row0 + dr
        k_signed = k_t if k_t <= P / 2 else k_t - P

        # reported estimates: detection-grid peaks by default, so the raw
        # outputs carry the grid quantization that the track fusion stage
        # is there to smooth; "continuous" reports the refined values
        if params.estimate_refine == "grid":
            k0_signed = float(k0 if k0 <= P / 2 else k0 - P)
            distance = row0 / cfg.range_bin_scale(round_trip)
            velocity = k0_signed / cfg.doppler_bin_scale(round_trip)
        else:
            distance = row_t / cfg.range_bin_scale(round_trip)
            velocity = k_signed / cfg.doppler_bin_scale(round_trip)

        Gbar = _aligned_mean(G)
        az, el, dep_az, dep_el = _axis_angles(Gbar, geo, kind, params.angle_grid)
        estimates.append(TargetEstimate(
            distance=float(distance),
            velocity=float(velocity),
            power=float((np.abs(G) ** 2).mean()),
            range_bin=float(row_t),
            doppler_bin=float(k_signed),
            azimuth=az,
            elevation=el,
            departure_azimuth=dep_az,
            departure_elevation=dep_el,
            n_cells=len(g.cells),
            score=g.score,
        ))
    estimates.sort(key=lambda e: -e.power)
    if estimates and params.estimate_min_rel > 0.0:
        cut = estimates[0].power * params.estimate_min_rel
        estimates = [e for e in estimates if e.power >= cut]
    return estimates, debug


def _excise(Y: np.ndarray, params: ReceiverParams) -> tuple[np.ndarray, ClutterReport | None]:
    if not params.clutter_filter:
        return Y, None
    report = filter_clutter(Y, min_run=params.clutter_min_run)
    if report.intervals:
        Y = demod.apply_excision(Y, report.mask)
    return Y, report


@dataclass
class AtFrameResult:
    estimates: list[TargetEstimate]
    clutter: ClutterReport | None
    debug: EstimationDebug


def pipeline_at(cube: IfCube, cfg: SystemConfig, geo: ArrayGeometry,
                payload, schedules: list[LatinSchedule],
                params: ReceiverParams | None = None,
                hints: tuple[TrackHint, ...] = ()) -> AtFrameResult:
    """Monostatic frame processing with the terminal's own payload known."""
    params = params or ReceiverParams()
    Y = demod.range_dft(cube.data, params.range_window)
    Y, report = _excise(Y, params)
    Z = demod.remove_delays(Y, payload.delay_bins)
    Z = demod.remove_beta(Z, payload.beta)
    estimates, dbg = estimate_scene(Z, cfg, geo, schedules, "at", params, hints)
    return AtFrameResult(estimates=estimates, clutter=report, debug=dbg)


@dataclass
class PtFrameResult:
    estimates: list[TargetEstimate]
    clutter: ClutterReport | None
    bits: np.ndarray | None
    delays: np.ndarray | None
    dpsk: demod.DpskDemod | None
    erased: bool
    debug: EstimationDebug | None


def pipeline_pt(cube: IfCube, cfg: SystemConfig, geo: ArrayGeometry,
                schedules: list[LatinSchedule],
                params: ReceiverParams | None = None,
                hints: tuple[TrackHint, ...] = (),
                modulated: bool = True) -> PtFrameResult:
    """Link-side frame processing: demodulate blind, then sense.

    During acquisition (modulated=False) the transmitter is known to send
    unmodulated frames, so demodulation is skipped and the raw image goes
    straight to scene estimation.  Modulated frames need at least one
    track hint; without one the frame's payload is erased and no sensing
    output is produced.
    """
    params = params or ReceiverParams()
    Y = demod.range_dft(cube.data, params.range_window)
    Y, report = _excise(Y, params)

    if not modulated:
        estimates, dbg = estimate_scene(Y, cfg, geo, schedules, "pt", params, hints)
        return PtFrameResult(estimates=estimates, clutter=report, bits=None,
                             delays=None, dpsk=None, erased=False, debug=dbg)

    if not hints:
        return PtFrameResult(estimates=[], clutter=report, bits=None,
                             delays=None, dpsk=None, erased=True, debug=None)

    # walking rows are one frame stale by construction; anchor the shift
    # consensus and the phase reference on steady tracks when any exist,
    # then re-acquire each walking row against those decisions and re-vote
    # with every strong scatterer (a lone steady row can be out-voted by a
    # same-offset ghost, so the walkers' votes matter once corrected)
    steady = tuple(h for h in hints if not h.walking) or hints
    n_values = 2 ** cfg.data_bits_per_symbol()
    base = np.array([h.range_bin for h in steady], dtype=float)
    delays, _ = demod.demod_delays(Y, base, n_values)
    walkers = tuple(h for h in hints if h.walking)
    if walkers and len(steady) < len(hints):
        # a walker that left the observable half of the range grid (or
        # re-acquired onto plain noise) must not vote: its window would
        # stride other scatterers' shifted tones at a bogus offset
        ref_pw = demod.refine_row_offset(Y, steady[0].range_bin, delays,
                                         window=0)[1]
        kept, fixed = [], []
        for h in walkers:
            r2, pk = demod.refine_row_offset(Y, h.range_bin, delays)
            if 0.0 <= r2 < cfg.N / 2 and pk >= params.estimate_min_rel * ref_pw:
                kept.append(h)
                fixed.append(r2)
        if fixed:
            base = np.concatenate([base, np.asarray(fixed, dtype=float)])
            delays, _ = demod.demod_delays(Y, base, n_values)
        hints = steady + tuple(replace(h, range_bin=r)
                               for h, r in zip(kept, fixed))
    Z = demod.remove_delays(Y, delays)

    row = int(round(steady[0].range_bin)) % cfg.N
    comp = demod.doppler_compensation(cfg.P, steady[0].doppler_bin)
    coeffs = Z[:, :, row, :] * comp[None, None, :]
    dp = demod.demod_dpsk(coeffs, schedules, cfg.D, params.dpsk_erasure_floor)
    bits = decode_frame(delays, dp.increments, cfg, geo)

    Z = demod.remove_beta(Z, dp.beta_hat)
    estimates, dbg = estimate_scene(Z, cfg, geo, schedules, "pt", params, hints)
    return PtFrameResult(estimates=estimates, clutter=report, bits=bits,
                         delays=delays, dpsk=dp, erased=False, debug=dbg)
