"""Batched orthogonal matching pursuit on slow-time slot subsets.

Each transmit antenna illuminates only a subset of the P slots, so the
per-antenna slow-time series is a sparse sum of Doppler tones observed on
irregular sample positions.  Under pseudo-random slot schedules the tones
stay identifiable over the full P-bin grid; under evenly strided schedules
the grid aliases by the stride.  OMP with unit-norm tone atoms recovers the
dominant tones either way, and with full sampling it reduces exactly to
picking the largest DFT coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def doppler_atoms(P: int, sample_idx: np.ndarray) -> np.ndarray:
    """Unit-norm tone dictionary, shape (S, P): atom k sampled at sample_idx.

    Atom k follows the synthesis convention exp(+j 2 pi p k / P).
    """
    sample_idx = np.asarray(sample_idx, dtype=float)
    grid = np.exp(2j * np.pi * np.outer(sample_idx, np.arange(P)) / P)
    return grid / np.sqrt(len(sample_idx))


@dataclass
class OmpResult:
    """coeffs[r, k] is the solved amplitude of atom k on row r (0 if unused)."""

    coeffs: np.ndarray        # (R, P) complex
    selected: np.ndarray      # (R, P) bool
    residual_power: np.ndarray  # (R,) float, final squared residual norm
    iterations: np.ndarray    # (R,) int


def omp_batch(rows: np.ndarray, atoms: np.ndarray, max_iter: int,
              eps_power: float) -> OmpResult:
    """Greedy sparse decomposition of many rows against one dictionary.

    Args:
        rows: (R, S) complex observations.
        atoms: (S, P) unit-norm dictionary from doppler_atoms.
        max_iter: sparsity cap per row (<= S).
        eps_power: stop a row once its squared residual norm falls to or
            below this level.

    Every iteration re-solves the unconstrained least squares on the selected
    atoms (batched normal equations), so coefficients of earlier picks are
    refined as later ones join.  A row also stops if its residual refuses to
    shrink, which bounds error growth on ill-conditioned picks.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=complex))
    R, S = rows.shape
    P = atoms.shape[1]
    max_iter = int(min(max_iter, S, P))

    coeffs = np.zeros((R, P), dtype=complex)
    selected = np.zeros((R, P), dtype=bool)
    support = np.zeros((R, max_iter), dtype=int)
    n_sel = np.zeros(R, dtype=int)
    resid = rows.copy()
    resid_power = np.einsum("rs,rs->r", resid, resid.conj()).real
    active = resid_power > eps_power

    conj_atoms = atoms.conj()
    for it in range(max_iter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        corr = resid[idx] @ conj_atoms              # (A, P)
        corr[selected[idx]] = 0.0
        pick = np.argmax(np.abs(corr), axis=1)      # (A,)
        # a vanishing best correlation means the dictionary is exhausted
        dead = np.abs(corr[np.arange(len(idx)), pick]) == 0.0
        if dead.any():
            active[idx[dead]] = False
            idx = idx[~dead]
            pick = pick[~dead]
            if idx.size == 0:
                break
        selected[idx, pick] = True
        support[idx, it] = pick
        n_sel[idx] = it + 1

        # batched LS on the supports gathered so far
        sup = support[idx, :it + 1]                 # (A, t)
        a_sel = atoms[:, sup].transpose(1, 0, 2)    # (A, S, t)
        ah = a_sel.conj().transpose(0, 2, 1)        # (A, t, S)
        gram = ah @ a_sel                           # (A, t, t)
        rhs = np.einsum("ats,as->at", ah, rows[idx])
        sol = np.linalg.solve(gram, rhs[..., None])[..., 0]  # (A, t)

        new_resid = rows[idx] - np.einsum("ast,at->as", a_sel, sol)
        new_power = np.einsum("as,as->a", new_resid, new_resid.conj()).real

        stalled = new_power >= resid_power[idx] - 1e-12 * resid_power[idx]
        resid[idx] = new_resid
        resid_power[idx] = new_power
        for j, r in enumerate(idx):
            coeffs[r, sup[j]] = sol[j]
        done = (new_power <= eps_power) | stalled
        active[idx[done]] = False

    return OmpResult(coeffs=coeffs, selected=selected,
                     residual_power=resid_power, iterations=n_sel)


def dft_top_k(rows: np.ndarray, P: int, k: int) -> np.ndarray:
    """Reference solver for full sampling: keep the k largest DFT bins.

    Uses the same tone convention as doppler_atoms, so with S == P and a
    contiguous sample_idx this matches omp_batch output exactly.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=complex))
    S = rows.shape[1]
    spec = np.fft.fft(rows, n=P, axis=1) / np.sqrt(S)
    out = np.zeros_like(spec)
    order = np.argsort(-np.abs(spec), axis=1)[:, :k]
    for r in range(rows.shape[0]):
        out[r, order[r]] = spec[r, order[r]]
    return out
