"""Constant-velocity Kalman tracking of resolved scatterers.

State per track is (radial distance, radial rate); both are measured every
sensing update, so the filter is linear with an identity measurement map.
Measurement noise follows the quantization model (grid resolution over
sqrt(12) per axis).  Angles are not filtered dynamically, only smoothed
exponentially, since the scene geometry changes them slowly compared to the
range/rate grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ArrayGeometry, SystemConfig, sensing_bounds
from .receiver.pipeline import TargetEstimate, TrackHint


@dataclass
class KfState:
    x: np.ndarray   # (2,) distance [m], rate [m/s]
    P: np.ndarray   # (2, 2) covariance


def kf_predict(state: KfState, dt: float, accel_var: float) -> KfState:
    """Propagate under constant velocity with white-acceleration noise."""
    F = np.array([[1.0, dt], [0.0, 1.0]])
    g = np.array([0.5 * dt * dt, dt])
    return KfState(x=F @ state.x, P=F @ state.P @ F.T + accel_var * np.outer(g, g))


def kf_update(state: KfState, z: np.ndarray, R: np.ndarray) -> KfState:
    """Measurement update with z = (distance, rate), H = I."""
    S = state.P + R
    K = state.P @ np.linalg.inv(S)
    x = state.x + K @ (np.asarray(z, dtype=float) - state.x)
    P = (np.eye(2) - K) @ state.P
    return KfState(x=x, P=P)


@dataclass(frozen=True)
class TrackerParams:
    """Association gates are absolute windows around the predicted state."""

    accel_var: float = 4.0        # [m^2/s^4]
    # extra per-frame position process noise for range-walking tracks, in
    # range cells: a folded velocity makes the constant-velocity model
    # wrong, so weight fresh measurements heavily instead of smoothing
    walk_pos_noise_cells: float = 1.0
    gate_distance: float = 3.0    # [m]
    gate_velocity: float = 3.0    # [m/s]
    confirm_hits: int = 2
    drop_misses: int = 3
    angle_smoothing: float = 0.5  # EMA weight of the newest angle sample
    init_velocity_var: float = 25.0
    max_tracks: int = 16


@dataclass
class Track:
    ident: int
    state: KfState
    sin_az: float
    sin_el: float
    power: float
    # sub-bin range row of the last associated measurement, coasted by the
    # rate state between updates; the filtered state itself is built from
    # grid-quantized measurements and can sit half a bin off, which is too
    # coarse to anchor payload demodulation
    anchor_bin: float = 0.0
    hits: int = 1
    misses: int = 0
    confirmed: bool = False
    last_frame: int = 0
    walk_score: float = 0.0
    history: list = field(default_factory=list)  # (frame, d, v, sin_az, sin_el)

    @property
    def distance(self) -> float:
        return float(self.state.x[0])

    @property
    def velocity(self) -> float:
        return float(self.state.x[1])

    @property
    def walking(self) -> bool:
        """Distance innovations persistently exceed the velocity prediction.

        A path whose true radial rate lies outside the unambiguous span
        reports a folded velocity, so its range keeps stepping away from the
        prediction.  Such rows are fine as detection candidates but poor
        anchors for demodulation.
        """
        return self.walk_score > 0.5


class Tracker:
    """Greedy nearest-neighbor multi-target tracker on one receiver's grid.

    kind selects the grid scale ("at" round-trip, "pt" one-way) used both
    for the measurement-noise model and for exporting track hints in bins.
    step() is called once per sensing frame with that frame's estimates;
    the elapsed time is derived from the frame index, so any sensing cadence
    works without reconfiguration.
    """

    def __init__(self, cfg: SystemConfig, geo: ArrayGeometry, kind: str,
                 params: TrackerParams | None = None):
        self.cfg = cfg
        self.geo = geo
        self.kind = kind
        self.params = params or TrackerParams()
        bounds = sensing_bounds(cfg, geo)
        b = bounds.at if kind == "at" else bounds.pt
        self.R = np.diag([(b.distance_res / np.sqrt(12.0)) ** 2,
                          (b.velocity_res / np.sqrt(12.0)) ** 2])
        self._round_trip = kind == "at"
        self.tracks: list[Track] = []
        self._next_id = 0
        self._last_frame: int | None = None

    # -- bookkeeping ----------------------------------------------------

    def _spawn(self, frame: int, est: TargetEstimate):
        p = self.params
        P0 = np.diag([self.R[0, 0] * 4.0, max(self.R[1, 1] * 4.0, p.init_velocity_var)])
        t = Track(
            ident=self._next_id,
            state=KfState(x=np.array([est.distance, est.velocity]), P=P0),
            sin_az=est.sin_azimuth,
            sin_el=est.sin_elevation,
            power=est.power,
            anchor_bin=est.range_bin,
            last_frame=frame,
        )
        t.history.append((frame, t.distance, t.velocity, t.sin_az, t.sin_el))
        self._next_id += 1
        self.tracks.append(t)

    def step(self, frame: int, estimates: list[TargetEstimate]) -> list[Track]:
        """Associate one frame of estimates; returns the live track list."""
        p = self.params
        if self._last_frame is not None:
            dt = (frame - self._last_frame) * self.cfg.frame_duration
            if dt > 0:
                bins_per_m = self.cfg.range_bin_scale(self._round_trip)
                for t in self.tracks:
                    t.anchor_bin += t.state.x[1] * dt * bins_per_m
                    t.state = kf_predict(t.state, dt, p.accel_var)
                    if t.walk_score > 0.0:
                        sig = t.walk_score * p.walk_pos_noise_cells / bins_per_m
                        t.state.P[0, 0] += sig * sig
        self._last_frame = frame

        # greedy nearest neighbor: smallest normalized miss first, ties to
        # the lower track id so repeated runs are reproducible
        pairs = []
        for ti, t in enumerate(self.tracks):
            for mi, e in enumerate(estimates):
                dd = abs(e.distance - t.state.x[0])
                dv = abs(e.velocity - t.state.x[1])
                if dd <= p.gate_distance and dv <= p.gate_velocity:
                    cost = dd / p.gate_distance + dv / p.gate_velocity
                    pairs.append((cost, t.ident, mi, ti))
        pairs.sort()
        used_t, used_m = set(), set()
        assignment: dict[int, int] = {}
        for cost, _ident, mi, ti in pairs:
            if ti in used_t or mi in used_m:
                continue
            used_t.add(ti)
            used_m.add(mi)
            assignment[ti] = mi

        a = p.angle_smoothing
        bins_per_m = self.cfg.range_bin_scale(self._round_trip)
        for ti, t in enumerate(self.tracks):
            if ti in assignment:
                e = estimates[assignment[ti]]
                innov_bins = abs(e.distance - t.state.x[0]) * bins_per_m
                t.walk_score = 0.7 * t.walk_score + 0.3 * min(innov_bins, 3.0)
                t.state = kf_update(t.state, np.array([e.distance, e.velocity]), self.R)
                t.anchor_bin = e.range_bin
                t.sin_az = (1 - a) * t.sin_az + a * e.sin_azimuth
                t.sin_el = (1 - a) * t.sin_el + a * e.sin_elevation
                t.power = (1 - a) * t.power + a * e.power
                t.hits += 1
                t.misses = 0
                t.last_frame = frame
                if t.hits >= p.confirm_hits:
                    t.confirmed = True
            else:
                t.misses += 1
            t.history.append((frame, t.distance, t.velocity, t.sin_az, t.sin_el))

        self.tracks = [t for t in self.tracks if t.misses < p.drop_misses]

        for mi, e in enumerate(estimates):
            if mi not in used_m and len(self.tracks) < p.max_tracks:
                self._spawn(frame, e)
        return self.tracks

    # -- exports ----------------------------------------------------------

    def confirmed_tracks(self) -> list[Track]:
        return [t for t in self.tracks if t.confirmed]

    def hints(self) -> tuple[TrackHint, ...]:
        """Grid predictions for the receive pipelines.

        Ordered steady-before-walking, strongest first within each group,
        so hints[0] is always the most reliable demodulation anchor.
        """
        live = sorted(self.tracks, key=lambda t: (t.walking, -t.power))
        dscale = self.cfg.doppler_bin_scale(self._round_trip)
        out = []
        for t in live:
            rb = t.anchor_bin
            if 0 <= rb < self.cfg.N / 2:
                out.append(TrackHint(range_bin=float(rb),
                                     doppler_bin=float(t.velocity * dscale),
                                     walking=t.walking))
        return tuple(out)

    def predict_state(self, frame: int) -> list[tuple[int, float, float]]:
        """(ident, distance, rate) of each track coasted to a frame index."""
        out = []
        for t in self.tracks:
            dt = (frame - self._last_frame) * self.cfg.frame_duration
            s = kf_predict(t.state, dt, self.params.accel_var) if dt > 0 else t.state
            out.append((t.ident, float(s.x[0]), float(s.x[1])))
        return out
