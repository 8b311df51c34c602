"""Cell-averaging CFAR detection, detection clustering, clutter excision."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter, uniform_filter1d


@dataclass(frozen=True)
class CfarParams:
    """Cell-averaging CFAR with circular training windows.

    For raw power cells (avg=1) the scale factor follows the exponential
    closed form T * (pfa^(-1/T) - 1) for T training cells.  When each cell
    is already the mean of ``avg`` independent exponential draws (a
    noncoherently integrated profile), its distribution tightens to
    Gamma(avg)/avg and the threshold comes from that quantile instead;
    training estimation noise is negligible at those averaging depths.
    min_level is an absolute floor below which cells are never flagged
    (0 keeps the detector purely relative).
    """

    train: int = 16
    guard: int = 4
    pfa: float = 1e-3
    min_level: float = 0.0
    avg: int = 1

    def scale(self, n_train: int) -> float:
        if self.avg <= 1:
            return n_train * (self.pfa ** (-1.0 / n_train) - 1.0)
        from scipy.special import gammainccinv

        return float(gammainccinv(self.avg, self.pfa)) / self.avg


def cfar_1d(x: np.ndarray, params: CfarParams) -> np.ndarray:
    """Boolean detection mask over a 1-D nonnegative vector (circular)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    t, g = params.train, params.guard
    if n <= 2 * (t + g):
        # not enough cells for the window; fall back to global-mean test
        mean = x.mean()
        if mean == 0:
            return np.zeros(n, dtype=bool)
        return (x > params.scale(max(n - 1, 1)) * mean) & (x > params.min_level)
    w = 2 * (t + g) + 1
    wide = uniform_filter1d(x, size=w, mode="wrap") * w
    inner = uniform_filter1d(x, size=2 * g + 1, mode="wrap") * (2 * g + 1)
    train_mean = (wide - inner) / (2 * t)
    thr = params.scale(2 * t) * train_mean
    return (x > thr) & (x > params.min_level)


def cfar_2d(x: np.ndarray, params: CfarParams,
            train2: int | None = None, guard2: int | None = None) -> np.ndarray:
    """Boolean mask over a 2-D map; square (or per-axis) training ring."""
    x = np.asarray(x, dtype=float)
    t0, g0 = params.train, params.guard
    t1 = params.train if train2 is None else train2
    g1 = params.guard if guard2 is None else guard2
    w0, w1 = 2 * (t0 + g0) + 1, 2 * (t1 + g1) + 1
    i0, i1 = 2 * g0 + 1, 2 * g1 + 1
    wide = uniform_filter(x, size=(w0, w1), mode="wrap") * (w0 * w1)
    inner = uniform_filter(x, size=(i0, i1), mode="wrap") * (i0 * i1)
    n_train = w0 * w1 - i0 * i1
    train_mean = (wide - inner) / n_train
    thr = params.scale(n_train) * train_mean
    return (x > thr) & (x > params.min_level)


@dataclass
class Cluster:
    """Connected set of detections; rep is the strongest cell."""

    cells: list[tuple[int, int]]
    rep: tuple[int, int]
    score: float


def cluster(cells: np.ndarray, scores: np.ndarray, rho_d: int = 1,
            rho_v: int = 1, wrap: tuple[int, int] | None = None) -> list[Cluster]:
    """Group detections whose coordinates differ by at most (rho_d, rho_v).

    Closeness is transitive (union-find over the pair graph).  `wrap`, when
    given, treats each axis as circular with the stated period so detections
    straddling the grid edge merge.
    """
    cells = np.asarray(cells, dtype=int)
    scores = np.asarray(scores, dtype=float)
    n = len(cells)
    if n == 0:
        return []
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri

    for i in range(n):
        for j in range(i + 1, n):
            dd = abs(cells[i, 0] - cells[j, 0])
            dv = abs(cells[i, 1] - cells[j, 1])
            if wrap is not None:
                dd = min(dd, wrap[0] - dd)
                dv = min(dv, wrap[1] - dv)
            if dd <= rho_d and dv <= rho_v:
                union(i, j)

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    out = []
    for members in groups.values():
        best = max(members, key=lambda i: scores[i])
        out.append(Cluster(
            cells=[tuple(cells[i]) for i in members],
            rep=tuple(cells[best]),
            score=float(scores[best]),
        ))
    out.sort(key=lambda c: -c.score)
    return out


@dataclass
class ClutterReport:
    """Excised range-bin intervals (start, stop) with stop exclusive."""

    intervals: list[tuple[int, int]]
    mask: np.ndarray  # (N,) bool, True where excised

    def covers(self, range_bin: float) -> bool:
        """True when a range bin fell inside an excised interval.

        A scatterer on such a bin was removed together with the clutter, so
        consumers should flag it as clutter-masked instead of lost.
        """
        b = int(round(range_bin))
        return bool(0 <= b < self.mask.size and self.mask[b])


def filter_clutter(accum: np.ndarray, min_run: int = 40,
                   energy_factor: float = 3.0,
                   concentration: float = 0.8, pad: int = 1) -> ClutterReport:
    """Find static clutter ridges on a range/slow-time map.

    Accepts a reduced (N, P) map or the full (M, L_rx, N, P) image.  A range
    bin is clutter-like when its mean magnitude is well above the map's
    median bin level and its slow-time energy is concentrated at zero
    Doppler (the coherent slow-time mean retains most of the magnitude).
    Only runs of at least `min_run` consecutive clutter-like bins are
    excised; anything shorter is left alone.  Each excised run is widened
    by `pad` bins per side: the window mainlobe leaks an edge bin into its
    neighbor, which would otherwise survive as a zero-velocity ghost.

    Prefer passing the full image: magnitudes are then averaged across
    antenna elements and RBs, so one faded element cannot break a run.
    Reducing coherently over elements first leaves each bin's level a
    single fading draw, and a ridge with a few faded bins slips through.
    """
    accum = np.asarray(accum)
    if accum.ndim == 4:
        per_bin = np.abs(accum).mean(axis=(0, 1, 3))
        coherent = np.abs(accum.mean(axis=3)).mean(axis=(0, 1))
    else:
        per_bin = np.abs(accum).mean(axis=1)
        coherent = np.abs(accum.mean(axis=1))
    floor = np.median(per_bin)
    if floor == 0:
        floor = per_bin.mean() or 1.0
    hot = per_bin > energy_factor * floor
    static = coherent > concentration * per_bin
    like = hot & static

    n = per_bin.shape[0]
    mask = np.zeros(n, dtype=bool)
    intervals = []
    start = None
    for i, flag in enumerate(np.append(like, False)):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if i - start >= min_run:
                a = max(0, start - pad)
                b = min(n, i + pad)
                if intervals and a <= intervals[-1][1]:
                    intervals[-1] = (intervals[-1][0], b)
                else:
                    intervals.append((a, b))
                mask[a:b] = True
            start = None
    return ClutterReport(intervals=intervals, mask=mask)
