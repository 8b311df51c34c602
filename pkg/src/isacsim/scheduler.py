"""Slot/RB scheduling, antenna activation patterns, and the link-setup protocol.

A frame of P slots is split into cycles of n_tx consecutive slots.  Within a
cycle each transmit antenna fires exactly once per resource block.  In
``conventional`` mode every RB walks the antennas in index order; in
``pseudo-random`` mode each cycle draws a fresh random permutation for RB 0
and the other RBs use cyclic shifts of it, which makes the per-cycle
(RB x slot) assignment a Latin matrix and the per-antenna slot sets
non-uniform in slow time.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .config import ArrayGeometry, ConfigError, SystemConfig


@dataclass(frozen=True)
class LatinSchedule:
    """Per-RB antenna activation pattern for one frame.

    Attributes:
        slots: (P/L, L) int array; slots[c, l] is the slow-time index at
            which antenna l fires during cycle c.  Columns are strictly
            increasing.
        antenna_at: (P,) int array; the antenna active in each slot.
        order_at: (P,) int array; position of the slot within its antenna's
            own stream (0 .. P/L - 1).
        mode: "conventional" or "pseudo-random".
        seed: RNG seed used (conventional mode ignores it).
    """

    slots: np.ndarray
    antenna_at: np.ndarray
    order_at: np.ndarray
    mode: str
    seed: int

    @property
    def n_tx(self) -> int:
        return self.slots.shape[1]

    @property
    def n_cycles(self) -> int:
        return self.slots.shape[0]

    def antenna_slots(self, l_tx: int) -> np.ndarray:
        """Slow-time indices assigned to one antenna, ascending."""
        return self.slots[:, l_tx]


def generate_schedule(cfg: SystemConfig, geo: ArrayGeometry, mode: str,
                      seed: int = 0) -> list[LatinSchedule]:
    """Build the M per-RB schedules for one frame.

    Conventional mode activates antenna l in slot c*L + l for every RB.
    Pseudo-random mode draws one uniform permutation per cycle and derives
    RB m by a cyclic shift of m, so within any cycle no antenna serves two
    RBs in the same slot.  Deterministic for a given seed.
    """
    if mode not in ("conventional", "pseudo-random"):
        raise ConfigError(f"unknown schedule mode {mode!r}")
    L = geo.n_tx
    P = cfg.P
    if P % L != 0:
        raise ConfigError(f"P={P} not divisible by L_tx={L}")
    if cfg.M > L:
        raise ConfigError(f"M={cfg.M} RBs need M distinct antennas per slot but only {L} exist")
    n_cyc = P // L
    rng = np.random.default_rng(seed)
    # antenna index by (cycle, slot-in-cycle) for RB 0
    if mode == "conventional":
        base = np.tile(np.arange(L), (n_cyc, 1))
    else:
        base = np.vstack([rng.permutation(L) for _ in range(n_cyc)])

    out = []
    for m in range(cfg.M):
        ant = np.roll(base, -m, axis=1) if mode == "pseudo-random" else base
        antenna_at = ant.reshape(-1)
        slots = np.empty((n_cyc, L), dtype=np.int64)
        for c in range(n_cyc):
            for j in range(L):
                slots[c, ant[c, j]] = c * L + j
        order_at = np.empty(P, dtype=np.int64)
        for l in range(L):
            order_at[slots[:, l]] = np.arange(n_cyc)
        out.append(LatinSchedule(slots=slots, antenna_at=antenna_at,
                                 order_at=order_at, mode=mode, seed=seed))
    _check_schedules(out, cfg, L)
    return out


def _check_schedules(schedules: list[LatinSchedule], cfg: SystemConfig, L: int):
    for sch in schedules:
        if not np.all(np.diff(sch.slots, axis=0) > 0):
            raise ConfigError("schedule columns must be strictly increasing")
        for c in range(sch.n_cycles):
            cyc = sch.antenna_at[c * L:(c + 1) * L]
            if len(set(cyc.tolist())) != L:
                raise ConfigError("each antenna must appear exactly once per cycle")
    if schedules[0].mode == "pseudo-random":
        # per cycle, the (RB x slot-in-cycle) matrix must be Latin
        for c in range(schedules[0].n_cycles):
            mat = np.vstack([s.antenna_at[c * L:(c + 1) * L] for s in schedules])
            for col in mat.T:
                if len(set(col.tolist())) != len(schedules):
                    raise ConfigError("RBs collide on an antenna within a slot")


def schedules_to_csv(schedules: list[LatinSchedule], path):
    """One row per slow-time slot, one column per RB, values = antenna index."""
    P = len(schedules[0].antenna_at)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["slot"] + [f"rb{m}" for m in range(len(schedules))])
        for p in range(P):
            w.writerow([p] + [int(s.antenna_at[p]) for s in schedules])


# ---------------------------------------------------------------------------
# Resource blocks


@dataclass
class RbAllocation:
    """Occupancy view of the resource blocks inside one slot."""

    n_rb: int
    occupied: set[int] = field(default_factory=set)

    def offsets(self, cfg: SystemConfig) -> list:
        """Time offset of each RB within the slot (exact rationals)."""
        return [2 * m * cfg.rb_delay for m in range(self.n_rb)]

    def first_fit(self, count: int) -> list[int] | None:
        """First run of `count` consecutive free RBs, or None."""
        run = []
        for r in range(self.n_rb):
            if r in self.occupied:
                run = []
                continue
            run.append(r)
            if len(run) == count:
                return run
        return None


def ook_encode(bits) -> np.ndarray:
    """Map a bit sequence to an on/off energy mask (1 -> transmit)."""
    return np.asarray(bits, dtype=np.int64).clip(0, 1)


def ook_detect(energies, threshold: float) -> np.ndarray:
    """Threshold per-RB energies back to bits."""
    return (np.asarray(energies, dtype=float) > threshold).astype(np.int64)


# ---------------------------------------------------------------------------
# Link-setup protocol


class Stage(Enum):
    RB_SELECT = "rb_select"
    SYNC = "sync"
    ACK = "ack"
    STEADY = "steady"
    FAILED = "failed"


@dataclass
class ProtocolTerminal:
    """One participant in the link-setup exchange.

    prop_delay and clock_offset are in sample periods; clock_offset is the
    terminal's clock minus the AT clock (0 = ideally synchronized).
    """

    ident: str
    role: str  # "at" | "pt"
    prop_delay: float = 0.0
    clock_offset: float = 0.0
    responsive: bool = True


@dataclass
class ProtocolState:
    ident: str
    stage: Stage
    rb_set: list[int] | None = None
    sync_delay: float | None = None
    acked: bool = False
    error: str | None = None


def run_protocol(cfg: SystemConfig, terminals: list[ProtocolTerminal],
                 occupied: set[int] | None = None,
                 energy_threshold: float = 0.5) -> dict[str, ProtocolState]:
    """Drive the four-stage link setup and return each terminal's state.

    Stage 1: the AT senses per-RB energy, picks the first M consecutive free
    RBs, and announces them with an on/off pattern the PTs detect by energy
    thresholding.  Stage 2 runs the two-round timing exchange: the PT measures
    the downlink delay (propagation plus its clock offset), the AT measures
    the uplink delay (propagation minus the offset), and half the difference
    isolates the offset.  Stage 3 collects per-PT acknowledgements; stage 4
    is steady state.
    """
    ats = [t for t in terminals if t.role == "at"]
    if len(ats) != 1:
        raise ConfigError("protocol requires exactly one AT")
    at = ats[0]
    pts = [t for t in terminals if t.role == "pt"]
    states = {t.ident: ProtocolState(ident=t.ident, stage=Stage.RB_SELECT)
              for t in terminals}

    alloc = RbAllocation(n_rb=cfg.n_rb, occupied=set(occupied or ()))
    rb_set = alloc.first_fit(cfg.M)
    if rb_set is None:
        st = states[at.ident]
        st.stage = Stage.FAILED
        st.error = f"no run of {cfg.M} consecutive free RBs among {cfg.n_rb}"
        for pt in pts:
            states[pt.ident].stage = Stage.FAILED
            states[pt.ident].error = "link setup aborted"
        return states
    states[at.ident].rb_set = rb_set

    # announcement: AT drives energy onto its RBs, PTs threshold-detect
    energies = np.zeros(cfg.n_rb)
    energies[list(alloc.occupied)] = 1.0
    energies[rb_set] = 1.0
    for pt in pts:
        mask = ook_detect(energies, energy_threshold)
        # the PT separates the AT's pattern from the pre-existing occupancy
        learned = [r for r in range(cfg.n_rb) if mask[r] and r not in alloc.occupied]
        states[pt.ident].rb_set = learned
        states[pt.ident].stage = Stage.SYNC

    states[at.ident].stage = Stage.SYNC
    for pt in pts:
        if not pt.responsive:
            continue
        down = pt.prop_delay + pt.clock_offset   # measured on the PT clock
        up = pt.prop_delay - pt.clock_offset     # measured back on the AT clock
        states[pt.ident].sync_delay = (down - up) / 2.0
        states[pt.ident].stage = Stage.ACK

    states[at.ident].stage = Stage.ACK
    all_acked = True
    for pt in pts:
        if pt.responsive:
            states[pt.ident].acked = True
            states[pt.ident].stage = Stage.STEADY
        else:
            states[pt.ident].stage = Stage.FAILED
            states[pt.ident].error = "no acknowledgement before timeout"
            all_acked = False
    st = states[at.ident]
    st.acked = all_acked
    st.stage = Stage.STEADY if all_acked else Stage.ACK
    if not all_acked:
        st.error = "timeout waiting for acknowledgement"
    return states
