"""Grid-search direction estimation on uniform linear subarrays.

Array phases follow the synthesis convention exp(+j 2 pi d_a q sin(chi)) for
an element at q virtual-pitch units along an axis, d_a being the pitch in
wavelengths.  Estimation correlates against a redundant grid of atoms
exp(-j pi q sin(psi_g)): the match peaks where sin(psi) == 2 d_a s sin(chi)
modulo 2, with s the index stride of the subarray (1 for receive or virtual
arrays, the per-axis receive count for transmit-only apertures).  For s == 1
and d_a <= 1/(2 sin FOV) the fold is unique inside the field of view; larger
strides alias, and all in-FOV candidates are reported.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SineEstimate:
    """One direction estimate in sine units.

    sin_angle is the in-FOV candidate nearest broadside; candidates holds
    every in-FOV value consistent with the measured phase slope (length > 1
    means the aperture is strided and the answer is ambiguous).  at_edge
    flags a grid peak on the wrap boundary of the dictionary.
    """

    sin_angle: float
    candidates: tuple[float, ...]
    at_edge: bool
    score: float


def steering_atoms(n_elem: int, grid_size: int = 2048) -> tuple[np.ndarray, np.ndarray]:
    """Redundant dictionary exp(-j pi q sin(psi_g)) and its sine grid."""
    sines = -1.0 + 2.0 * np.arange(grid_size) / grid_size
    q = np.arange(n_elem)
    return np.exp(-1j * np.pi * np.outer(q, sines)), sines


def estimate_sine(x: np.ndarray, spacing: float, stride: float = 1.0,
                  fov_sine: float | None = None,
                  grid_size: int = 2048) -> SineEstimate:
    """Estimate the arrival/departure sine from one subarray snapshot.

    Args:
        x: (n_elem,) complex snapshot indexed 0..n-1 along the axis.
        spacing: element pitch of the *unit* index step, in wavelengths.
        stride: index step multiplier of this subarray (electrical scale s).
        fov_sine: largest |sin| considered physical; default 1/(2*spacing)
            capped at 1.
        grid_size: dictionary redundancy.
    """
    x = np.asarray(x, dtype=complex)
    n = x.size
    if fov_sine is None:
        fov_sine = min(1.0, 1.0 / (2.0 * spacing))
    atoms, sines = steering_atoms(n, grid_size)
    score = np.abs(x @ atoms)
    g = int(np.argmax(score))

    # parabolic refinement on the circular grid
    s_l, s_c, s_r = score[(g - 1) % grid_size], score[g], score[(g + 1) % grid_size]
    denom = s_l - 2 * s_c + s_r
    frac = 0.0 if denom == 0 else 0.5 * (s_l - s_r) / denom
    frac = float(np.clip(frac, -0.5, 0.5))
    sin_psi = -1.0 + 2.0 * ((g + frac) % grid_size) / grid_size

    at_edge = g == 0 or g == grid_size - 1
    period = 1.0 / (spacing * stride)       # sin(chi) period of the fold
    base = sin_psi / (2.0 * spacing * stride)
    k_lo = int(np.ceil((-fov_sine - base) / period))
    k_hi = int(np.floor((fov_sine - base) / period))
    cands = tuple(base + k * period for k in range(k_lo, k_hi + 1))
    if not cands:
        cands = (base,)
    best = min(cands, key=abs)
    return SineEstimate(sin_angle=float(best), candidates=cands,
                        at_edge=at_edge, score=float(score[g]))


def virtual_snapshot(x_tx_rx: np.ndarray) -> np.ndarray:
    """Flatten per-(tx, rx) coefficients of one axis into virtual-ULA order.

    x_tx_rx[i, j] is the coefficient of tx index i (stride = rx count) and
    rx index j (stride 1); virtual element i * n_rx + j sits at that many
    pitch units, so a C-order reshape is the ULA snapshot.
    """
    x = np.asarray(x_tx_rx, dtype=complex)
    return x.reshape(-1)
