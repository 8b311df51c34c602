"""Monte-Carlo experiment harness: scenes, sweeps, and the dynamic run.

Scenes are flights of point terminals at constant 3D velocity.  Every frame
the harness derives the propagation paths each receiver sees (echo paths for
the monostatic terminal, direct plus one-bounce relay paths for the link
receiver), synthesizes IF cubes, pushes them through the receive pipelines,
and scores symbol decisions and parameter estimates against truth.

Grid physics: a path is synthesized only while its fast-time frequency stays
below the unambiguous half grid; radial rates are folded into the receiver's
unambiguous velocity span before synthesis (the sampled slow-time tone is
periodic, so folding changes nothing observable).
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import NoiseSpec, Target, inject_noise, synth_if_at, synth_if_pt, unit_amplitude
from .config import ArrayGeometry, SystemConfig, sensing_bounds
from .modem import bit_budget, bit_rate, encode_frame, empty_payload, random_bits
from .receiver.pipeline import ReceiverParams, TargetEstimate, pipeline_at, pipeline_pt
from .scheduler import generate_schedule
from .tracking import Tracker, TrackerParams


# ---------------------------------------------------------------------------
# Scene geometry


@dataclass(frozen=True)
class Uav:
    """Point terminal on a constant-velocity 3D flight.

    heading is the array boresight (unit vector, horizontal); the array's
    horizontal axis is heading rotated -90 degrees so that a peer to the
    right of boresight has positive azimuth sine.
    """

    name: str
    position: tuple[float, float, float]
    velocity: tuple[float, float, float]
    heading: tuple[float, float, float] = (0.0, 1.0, 0.0)

    def at(self, t: float) -> np.ndarray:
        return np.asarray(self.position) + t * np.asarray(self.velocity)


@dataclass(frozen=True)
class PathTruth:
    """One propagation path at one instant, as a receiver's grid sees it."""

    label: str
    distance: float          # total path length [m]
    rate: float              # unfolded path-length rate [m/s]
    sin_az_rx: float
    sin_el_rx: float
    sin_az_tx: float
    sin_el_tx: float
    visible: bool            # all terminal angles inside the FOV sine bound


def _axes(heading) -> tuple[np.ndarray, np.ndarray]:
    h = np.asarray(heading, dtype=float)
    h = h / np.linalg.norm(h)
    x_local = np.array([h[1], -h[0], 0.0])
    z_local = np.array([0.0, 0.0, 1.0])
    return x_local, z_local


def _arrival_sines(observer: Uav, direction: np.ndarray) -> tuple[float, float]:
    d = direction / np.linalg.norm(direction)
    x_local, z_local = _axes(observer.heading)
    return float(d @ x_local), float(d @ z_local)


def _leg(a: Uav, b: Uav, t: float) -> tuple[float, float, np.ndarray]:
    """Length, length rate, and the a->b unit vector of one leg at time t."""
    rel = b.at(t) - a.at(t)
    relv = np.asarray(b.velocity) - np.asarray(a.velocity)
    dist = float(np.linalg.norm(rel))
    rate = float(rel @ relv) / dist if dist > 0 else 0.0
    return dist, rate, rel / dist if dist > 0 else np.zeros(3)


def echo_path(at: Uav, scatterer: Uav, t: float, fov: float) -> PathTruth:
    """Monostatic echo: departure and arrival directions coincide."""
    dist, rate, u = _leg(at, scatterer, t)
    s_az, s_el = _arrival_sines(at, u)
    vis = abs(s_az) <= fov and abs(s_el) <= fov
    return PathTruth(label=scatterer.name, distance=dist, rate=rate,
                     sin_az_rx=s_az, sin_el_rx=s_el,
                     sin_az_tx=s_az, sin_el_tx=s_el, visible=vis)


def direct_path(tx: Uav, rx: Uav, t: float, fov: float) -> PathTruth:
    dist, rate, u = _leg(tx, rx, t)
    s_az_tx, s_el_tx = _arrival_sines(tx, u)
    s_az_rx, s_el_rx = _arrival_sines(rx, -u)
    vis = max(abs(s_az_tx), abs(s_el_tx), abs(s_az_rx), abs(s_el_rx)) <= fov
    return PathTruth(label=tx.name, distance=dist, rate=rate,
                     sin_az_rx=s_az_rx, sin_el_rx=s_el_rx,
                     sin_az_tx=s_az_tx, sin_el_tx=s_el_tx, visible=vis)


def relay_path(tx: Uav, bounce: Uav, rx: Uav, t: float, fov: float) -> PathTruth:
    """One-bounce path; the relay reradiates isotropically (no FOV there)."""
    d1, r1, u1 = _leg(tx, bounce, t)
    d2, r2, u2 = _leg(bounce, rx, t)
    s_az_tx, s_el_tx = _arrival_sines(tx, u1)
    s_az_rx, s_el_rx = _arrival_sines(rx, -u2)
    vis = max(abs(s_az_tx), abs(s_el_tx), abs(s_az_rx), abs(s_el_rx)) <= fov
    return PathTruth(label=f"{tx.name}-{bounce.name}", distance=d1 + d2,
                     rate=r1 + r2, sin_az_rx=s_az_rx, sin_el_rx=s_el_rx,
                     sin_az_tx=s_az_tx, sin_el_tx=s_el_tx, visible=vis)


def swarm_uavs(static: bool = False) -> list[Uav]:
    """Three-terminal reference flight: one data source, two peers.

    Positions in meters at a shared altitude; speeds 10/15/20 m/s along the
    y axis (the third terminal flies the other way and faces backwards).
    The static variant zeroes all velocities.
    """
    def vel(speed, sign):
        return (0.0, 0.0, 0.0) if static else (0.0, sign * speed, 0.0)

    return [
        Uav("at", (0.0, 0.0, 300.0), vel(10.0, +1), (0.0, 1.0, 0.0)),
        Uav("pt1", (-8.0, 8.0, 300.0), vel(15.0, +1), (0.0, 1.0, 0.0)),
        Uav("pt2", (4.0, -8.0, 300.0), vel(20.0, -1), (0.0, -1.0, 0.0)),
    ]


# ---------------------------------------------------------------------------
# Path -> synthesis targets


def fold_rate(rate: float, cfg: SystemConfig, round_trip: bool) -> float:
    """Fold a radial rate into the receiver's unambiguous span."""
    scale = cfg.doppler_bin_scale(round_trip)
    bins = (rate * scale + cfg.P / 2.0) % cfg.P - cfg.P / 2.0
    return bins / scale


def paths_to_targets(paths: list[PathTruth], cfg: SystemConfig,
                     round_trip: bool, amplitudes: dict) -> list[Target]:
    """Synthesis targets for the visible, in-grid subset of paths."""
    out = []
    half = cfg.N / 2.0
    for p in paths:
        if not p.visible:
            continue
        if p.distance * cfg.range_bin_scale(round_trip) >= half:
            continue
        out.append(Target(
            distance=p.distance,
            rate=fold_rate(p.rate, cfg, round_trip),
            sin_theta_tx=p.sin_el_tx, sin_phi_tx=p.sin_az_tx,
            sin_theta_rx=p.sin_el_rx, sin_phi_rx=p.sin_az_rx,
            amplitude=amplitudes[p.label],
        ))
    return out


def at_paths(uavs: list[Uav], t: float, fov: float) -> list[PathTruth]:
    at = uavs[0]
    return [echo_path(at, u, t, fov) for u in uavs[1:]]


def pt_paths(uavs: list[Uav], t: float, fov: float, rx_index: int = 1) -> list[PathTruth]:
    at, rx = uavs[0], uavs[rx_index]
    bounces = [u for i, u in enumerate(uavs) if i not in (0, rx_index)]
    paths = [direct_path(at, rx, t, fov)]
    paths += [relay_path(at, b, rx, t, fov) for b in bounces]
    return paths


# ---------------------------------------------------------------------------
# Scoring


def _wilson(k: int, n: int, z: float = 1.96) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    p = k / n
    den = 1 + z * z / n
    center = (p + z * z / (2 * n)) / den
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class SymbolCounts:
    total: int = 0
    errored: int = 0
    erased: int = 0

    def add(self, other: "SymbolCounts"):
        self.total += other.total
        self.errored += other.errored
        self.erased += other.erased

    @property
    def decoded(self) -> int:
        return self.total - self.errored - self.erased

    @property
    def ser(self) -> float:
        return (self.errored + self.erased) / self.total if self.total else 0.0

    def wilson(self) -> tuple[float, float]:
        return _wilson(self.errored + self.erased, self.total)


def hit_check(truth: PathTruth, estimates: list[TargetEstimate], bounds,
              rate_folded: float) -> bool:
    """A path is hit when one estimate errs under every resolution at once.

    Arrival angles only: departure-side estimates of a strided aperture are
    ambiguous by construction and are excluded from the hit definition.
    """
    for e in estimates:
        if (abs(e.distance - truth.distance) < bounds.distance_res
                and abs(e.velocity - rate_folded) < bounds.velocity_res
                and abs(e.sin_azimuth - truth.sin_az_rx) < bounds.azimuth_res
                and abs(e.sin_elevation - truth.sin_el_rx) < bounds.elevation_res):
            return True
    return False


# ---------------------------------------------------------------------------
# SER sweep (link receiver)


@dataclass(frozen=True)
class SerSetup:
    """One SER operating point: config plus channel and schedule choices.

    pair_key overrides the seed-stream point index so arms that differ only
    in a modem knob (symbol alphabet, payload on/off) share the same scene
    and noise realizations: differences are then paired, not Monte-Carlo
    luck.  Leave None to seed by position in the sweep list.
    """

    cfg: SystemConfig
    geo: ArrayGeometry
    snr_db: float
    noise_mode: str = "gaussian"
    schedule_mode: str = "pseudo-random"
    frames: int = 8
    warmup: int = 2
    pair_key: int | None = None


def _trial_rngs(seed: int, point: int, trial: int):
    """Scene / payload / noise streams for one trial, independently seeded."""
    return tuple(np.random.default_rng(np.random.SeedSequence(
        [seed, point, trial, stream])) for stream in range(3))


def _ser_trial(setup: SerSetup, seed: int, point: int, trial: int,
               params: ReceiverParams) -> dict:
    cfg, geo = setup.cfg, setup.geo
    rng_scene, rng_payload, rng_noise = _trial_rngs(seed, point, trial)
    uavs = swarm_uavs(static=True)
    fov = geo.fov_sine
    paths = pt_paths(uavs, 0.0, fov)
    amps = {p.label: unit_amplitude(rng_scene) for p in paths}
    targets = paths_to_targets(paths, cfg, round_trip=False, amplitudes=amps)
    spec = NoiseSpec(mode=setup.noise_mode, snr_db=setup.snr_db)
    tracker = Tracker(cfg, geo, "pt")

    delay = SymbolCounts()
    phase = SymbolCounts()
    n_sym_frame_delay = cfg.M * cfg.P
    n_sym_frame_phase = cfg.M * geo.n_tx * (cfg.P // geo.n_tx - 1)

    for i in range(setup.warmup + setup.frames):
        schedules = generate_schedule(cfg, geo, setup.schedule_mode,
                                      seed=int(rng_scene.integers(2 ** 31)))
        if i < setup.warmup:
            payload = empty_payload(cfg, geo)
            cube = synth_if_pt(cfg, geo, targets, payload, schedules)
            cube, _ = inject_noise(cube, spec, cfg, geo, rng_noise)
            res = pipeline_pt(cube, cfg, geo, schedules, params,
                              hints=tracker.hints(), modulated=False)
            tracker.step(i, res.estimates)
            continue

        bits = random_bits(cfg, geo, rng_payload)
        payload = encode_frame(bits, cfg, geo, schedules)
        cube = synth_if_pt(cfg, geo, targets, payload, schedules)
        cube, _ = inject_noise(cube, spec, cfg, geo, rng_noise)
        res = pipeline_pt(cube, cfg, geo, schedules, params,
                          hints=tracker.hints(), modulated=True)
        if res.erased:
            delay.add(SymbolCounts(total=n_sym_frame_delay, erased=n_sym_frame_delay))
            phase.add(SymbolCounts(total=n_sym_frame_phase, erased=n_sym_frame_phase))
            continue
        d_err = int(np.count_nonzero(res.delays != payload.delay_bins))
        delay.add(SymbolCounts(total=n_sym_frame_delay, errored=d_err))
        wrong = res.dpsk.increments != payload.increments
        weak = res.dpsk.weak
        phase.add(SymbolCounts(total=n_sym_frame_phase,
                               errored=int(np.count_nonzero(wrong & ~weak)),
                               erased=int(np.count_nonzero(weak))))
        tracker.step(i, res.estimates)

    return {"delay": delay, "phase": phase}


def _ser_trial_star(args):
    return _ser_trial(*args)


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("ISACSIM_WORKERS", "1")))
    except ValueError:
        return 1


def run_ser_sweep(setups: list[SerSetup], trials: int, seed: int,
                  params: ReceiverParams | None = None) -> list[dict]:
    """Run SER Monte Carlo over operating points.

    Returns one row per setup with pooled delay-domain and phase-domain
    symbol counts, the combined SER, and its Wilson interval.  Trials are
    seeded from SeedSequence([seed, point, trial]) so any worker split
    reproduces identical streams.
    """
    params = params or ReceiverParams()
    rows = []
    workers = _worker_count()
    for pi, setup in enumerate(setups):
        pk = pi if setup.pair_key is None else setup.pair_key
        tasks = [(setup, seed, pk, ti, params) for ti in range(trials)]
        if workers > 1 and trials > 1:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                results = list(ex.map(_ser_trial_star, tasks))
        else:
            results = [_ser_trial_star(t) for t in tasks]
        delay = SymbolCounts()
        phase = SymbolCounts()
        for r in results:
            delay.add(r["delay"])
            phase.add(r["phase"])
        both = SymbolCounts(total=delay.total + phase.total,
                            errored=delay.errored + phase.errored,
                            erased=delay.erased + phase.erased)
        lo, hi = both.wilson()
        rows.append({
            "snr_db": setup.snr_db,
            "dpsk_order": setup.cfg.D,
            "num_samples": setup.cfg.N,
            "noise": setup.noise_mode,
            "schedule": setup.schedule_mode,
            "symbols": both.total,
            "errored": both.errored,
            "erased": both.erased,
            "decoded": both.decoded,
            "ser": both.ser,
            "ser_delay": delay.ser,
            "ser_phase": phase.ser,
            "wilson_lo": lo,
            "wilson_hi": hi,
        })
    return rows


# ---------------------------------------------------------------------------
# Hit-rate sweep (link receiver, modulated vs payload-free baseline)


@dataclass(frozen=True)
class HitSetup:
    cfg: SystemConfig
    geo: ArrayGeometry
    snr_db: float
    noise_mode: str = "gaussian"
    schedule_mode: str = "pseudo-random"
    modulated: bool = True        # False = payload-free baseline
    clutter_filter: bool = False
    frames: int = 6
    warmup: int = 2
    pair_key: int | None = None   # see SerSetup


def _hit_trial(setup: HitSetup, seed: int, point: int, trial: int,
               params: ReceiverParams) -> tuple[int, int, SymbolCounts]:
    cfg, geo = setup.cfg, setup.geo
    rng_scene, rng_payload, rng_noise = _trial_rngs(seed, point, trial)
    uavs = swarm_uavs(static=True)
    fov = geo.fov_sine
    paths = [p for p in pt_paths(uavs, 0.0, fov) if p.visible]
    amps = {p.label: unit_amplitude(rng_scene) for p in paths}
    targets = paths_to_targets(paths, cfg, round_trip=False, amplitudes=amps)
    spec = NoiseSpec(mode=setup.noise_mode, snr_db=setup.snr_db)
    params = replace(params, clutter_filter=setup.clutter_filter)
    bounds = sensing_bounds(cfg, geo).pt
    tracker = Tracker(cfg, geo, "pt")

    hits = 0
    total = 0
    sym = SymbolCounts()
    for i in range(setup.warmup + setup.frames):
        schedules = generate_schedule(cfg, geo, setup.schedule_mode,
                                      seed=int(rng_scene.integers(2 ** 31)))
        bits = random_bits(cfg, geo, rng_payload)
        modulated = setup.modulated and i >= setup.warmup
        if modulated:
            payload = encode_frame(bits, cfg, geo, schedules)
        else:
            payload = empty_payload(cfg, geo)
        cube = synth_if_pt(cfg, geo, targets, payload, schedules)
        cube, _ = inject_noise(cube, spec, cfg, geo, rng_noise)
        res = pipeline_pt(cube, cfg, geo, schedules, params,
                          hints=tracker.hints(), modulated=modulated)
        tracker.step(i, res.estimates)
        if i < setup.warmup:
            continue
        for p in paths:
            total += 1
            if not res.erased and hit_check(p, res.estimates, bounds,
                                            fold_rate(p.rate, cfg, False)):
                hits += 1
        if modulated and not res.erased:
            n_d = cfg.M * cfg.P
            n_p = cfg.M * geo.n_tx * (cfg.P // geo.n_tx - 1)
            d_err = int(np.count_nonzero(res.delays != payload.delay_bins))
            wrong = res.dpsk.increments != payload.increments
            weak = res.dpsk.weak
            sym.add(SymbolCounts(total=n_d + n_p,
                                 errored=d_err + int(np.count_nonzero(wrong & ~weak)),
                                 erased=int(np.count_nonzero(weak))))
    return hits, total, sym


def _hit_trial_star(args):
    return _hit_trial(*args)


def run_hit_rate_sweep(setups: list[HitSetup], trials: int, seed: int,
                       params: ReceiverParams | None = None) -> list[dict]:
    """Hit-rate Monte Carlo; also pools SER of the modulated variants."""
    params = params or ReceiverParams()
    rows = []
    workers = _worker_count()
    for pi, setup in enumerate(setups):
        pk = 1000 + pi if setup.pair_key is None else setup.pair_key
        tasks = [(setup, seed, pk, ti, params) for ti in range(trials)]
        if workers > 1 and trials > 1:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                results = list(ex.map(_hit_trial_star, tasks))
        else:
            results = [_hit_trial_star(t) for t in tasks]
        hits = sum(r[0] for r in results)
        total = sum(r[1] for r in results)
        sym = SymbolCounts()
        for r in results:
            sym.add(r[2])
        lo, hi = _wilson(hits, total)
        rows.append({
            "snr_db": setup.snr_db,
            "dpsk_order": setup.cfg.D,
            "noise": setup.noise_mode,
            "schedule": setup.schedule_mode,
            "modulated": setup.modulated,
            "clutter_filter": setup.clutter_filter,
            "paths": total,
            "hits": hits,
            "hit_rate": hits / total if total else 0.0,
            "hit_lo": lo,
            "hit_hi": hi,
            "ser": sym.ser,
            "symbols": sym.total,
        })
    return rows


# ---------------------------------------------------------------------------
# Rate vs transmit antennas (closed form)


_ANTENNA_LAYOUT = {1: (1, 1), 2: (2, 1), 3: (2, 2), 4: (3, 2), 5: (3, 3)}


def rate_vs_antennas(base_raw: dict | None = None,
                     l_values=(1, 2, 3, 4, 5)) -> list[dict]:
    """Closed-form bit rate as the transmit count (and RB count) grows.

    Each transmit antenna gets its own resource block, so the slot guard
    stretches with the RB count while per-frame symbol counts shift between
    the delay and phase domains.
    """
    from .config import derive_config, derive_geometry

    rows = []
    for L in l_values:
        tx_x, tx_z = _ANTENNA_LAYOUT[L]
        raw = dict(base_raw or {})
        raw.update({"tx_x": tx_x, "tx_z": tx_z, "num_rb": L})
        cfg = derive_config(raw)
        geo = derive_geometry(raw)
        rows.append({
            "l_tx": L,
            "num_rb": cfg.M,
            "bits_per_frame": bit_budget(cfg, geo),
            "frame_s": cfg.frame_duration,
            "rate_bps": bit_rate(cfg, geo),
        })
    return rows


# ---------------------------------------------------------------------------
# Dynamic scenario


@dataclass
class DynamicLogs:
    """Per-frame truth/estimate/track records of the 3-terminal flight."""

    at_rows: list[dict] = field(default_factory=list)
    pt_rows: list[dict] = field(default_factory=list)
    bit_errors: int = 0
    bits_total: int = 0

    def error_pools(self, side: str, label: str) -> dict[str, np.ndarray]:
        """Raw vs fused absolute error samples for one tracked path."""
        rows = self.at_rows if side == "at" else self.pt_rows
        out = {"raw_d": [], "raw_v": [], "fused_d": [], "fused_v": []}
        for r in rows:
            if r["label"] != label:
                continue
            if r["est_d"] is not None:
                out["raw_d"].append(abs(r["est_d"] - r["true_d"]))
                out["raw_v"].append(abs(r["est_v"] - r["true_v"]))
            if r["trk_d"] is not None:
                out["fused_d"].append(abs(r["trk_d"] - r["true_d"]))
                out["fused_v"].append(abs(r["trk_v"] - r["true_v"]))
        return {k: np.asarray(v) for k, v in out.items()}


def _nearest_estimate(estimates, distance, gate):
    best, err = None, gate
    for e in estimates:
        d = abs(e.distance - distance)
        if d < err:
            best, err = e, d
    return best


def _nearest_track(tracks, distance, gate):
    best, err = None, gate
    for t in tracks:
        d = abs(t.distance - distance)
        if d < err:
            best, err = t, d
    return best


def run_dynamic_scenario(cfg: SystemConfig, geo: ArrayGeometry,
                         n_frames: int = 500, snr_db: float = 10.0,
                         seed: int = 0, at_interval: int = 20,
                         warmup: int = 2,
                         params: ReceiverParams | None = None,
                         tracker_params: TrackerParams | None = None,
                         assoc_gate: float = 5.0) -> DynamicLogs:
    """Fly the reference swarm and track through both pipelines.

    The monostatic terminal senses every at_interval-th frame; the link
    terminal demodulates and senses every frame.  Logged per frame and per
    truth path: true distance/rate (rate folded onto the receiver grid),
    the nearest raw estimate, and the nearest live track state.
    """
    params = params or ReceiverParams()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 77]))
    uavs = swarm_uavs(static=False)
    fov = geo.fov_sine
    spec = NoiseSpec(mode="gaussian", snr_db=snr_db)
    amps = {}

    at_tracker = Tracker(cfg, geo, "at", tracker_params)
    pt_tracker = Tracker(cfg, geo, "pt", tracker_params)
    logs = DynamicLogs()

    for i in range(n_frames):
        t = i * cfg.frame_duration
        schedules = generate_schedule(cfg, geo, "pseudo-random",
                                      seed=int(rng.integers(2 ** 31)))
        modulated = i >= warmup
        if modulated:
            bits = random_bits(cfg, geo, rng)
            payload = encode_frame(bits, cfg, geo, schedules)
        else:
            bits = None
            payload = empty_payload(cfg, geo)

        # link side, every frame
        paths = pt_paths(uavs, t, fov)
        for p in paths:
            amps.setdefault(p.label, unit_amplitude(rng))
        targets = paths_to_targets(paths, cfg, round_trip=False, amplitudes=amps)
        cube = synth_if_pt(cfg, geo, targets, payload, schedules)
        cube, _ = inject_noise(cube, spec, cfg, geo, rng)
        res = pipeline_pt(cube, cfg, geo, schedules, params,
                          hints=pt_tracker.hints(), modulated=modulated)
        pt_tracker.step(i, res.estimates)
        if modulated and not res.erased and bits is not None:
            logs.bits_total += bits.size
            logs.bit_errors += int(np.count_nonzero(res.bits != bits))
        for p in paths:
            folded = fold_rate(p.rate, cfg, False)
            est = _nearest_estimate(res.estimates, p.distance, assoc_gate)
            trk = _nearest_track(pt_tracker.tracks, p.distance, assoc_gate)
            logs.pt_rows.append({
                "frame": i, "label": p.label,
                "true_d": p.distance, "true_v": folded,
                "true_az": p.sin_az_rx,
                "est_d": est.distance if est else None,
                "est_v": est.velocity if est else None,
                "est_az": est.sin_azimuth if est else None,
                "trk_d": trk.distance if trk else None,
                "trk_v": trk.velocity if trk else None,
                "trk_az": trk.sin_az if trk else None,
                "erased": res.erased,
            })

        # monostatic side, every at_interval-th frame
        if i % at_interval == 0:
            apaths = at_paths(uavs, t, fov)
            for p in apaths:
                amps.setdefault("echo-" + p.label, unit_amplitude(rng))
            atargets = paths_to_targets(
                apaths, cfg, round_trip=True,
                amplitudes={p.label: amps["echo-" + p.label] for p in apaths})
            acube = synth_if_at(cfg, geo, atargets, payload, schedules)
            acube, _ = inject_noise(acube, spec, cfg, geo, rng)
            ares = pipeline_at(acube, cfg, geo, payload, schedules, params,
                               hints=at_tracker.hints())
            at_tracker.step(i, ares.estimates)
            for p in apaths:
                folded = fold_rate(p.rate, cfg, True)
                est = _nearest_estimate(ares.estimates, p.distance, assoc_gate)
                trk = _nearest_track(at_tracker.tracks, p.distance, assoc_gate)
                logs.at_rows.append({
                    "frame": i, "label": p.label,
                    "true_d": p.distance, "true_v": folded,
                    "true_az": p.sin_az_rx,
                    "est_d": est.distance if est else None,
                    "est_v": est.velocity if est else None,
                    "est_az": est.sin_azimuth if est else None,
                    "trk_d": trk.distance if trk else None,
                    "trk_v": trk.velocity if trk else None,
                    "trk_az": trk.sin_az if trk else None,
                    "erased": False,
                })
    return logs


def decile_dominance(fused: np.ndarray, raw: np.ndarray,
                     deciles=tuple(range(10, 100, 10))) -> tuple[bool, list[tuple[float, float, float]]]:
    """Check quantile-wise dominance |fused| <= |raw| at each decile."""
    table = []
    ok = True
    for q in deciles:
        qf = float(np.percentile(fused, q)) if fused.size else np.nan
        qr = float(np.percentile(raw, q)) if raw.size else np.nan
        table.append((q, qf, qr))
        if not (qf <= qr):
            ok = False
    return ok, table


# ---------------------------------------------------------------------------
# CSV emission


def write_rows_csv(path, rows: list[dict]):
    """One header row from the union of keys, in first-seen order."""
    if not rows:
        with open(path, "w", newline="") as f:
            f.write("")
        return
    fields = []
    for r in rows:
        for k in r:
            if k not in fields:
                fields.append(k)
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=fields)
        w.writeheader()
        for r in rows:
            w.writerow(r)


def dynamic_rows_for_csv(logs: DynamicLogs) -> list[dict]:
    rows = []
    for side, rs in (("at", logs.at_rows), ("pt", logs.pt_rows)):
        for r in rs:
            rows.append({"side": side, **{k: ("" if v is None else v)
                                          for k, v in r.items()}})
    return rows
