"""DFT beam codebook construction and column selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BeamSelection, ComplexMatrix


@dataclass(frozen=True)
class Codebook:
    """A bank of constant-modulus candidate beamforming vectors (columns of w)."""

    w: ComplexMatrix

    @property
    def m(self) -> int:
        return self.w.rows

    @property
    def n_vec(self) -> int:
        return self.w.cols


def build_dft_codebook(m: int, n_vec: int) -> Codebook:
    """Build the oversampled M x N_vec DFT codebook.

    Entry (u, v) is exp(-j*2*pi*u*v / N_vec) for 0-based u, v, so every entry
    has unit modulus and the first row and column are all ones. Power scaling
    is applied downstream, not here.
    """
    if m < 1:
        raise ValueError(f"codebook needs at least one antenna row, got M={m}")
    if n_vec < m:
        raise ValueError(f"codebook needs N_vec >= M candidate vectors, got N_vec={n_vec} < M={m}")
    rows = np.arange(m, dtype=np.float64)[:, None]
    cols = np.arange(n_vec, dtype=np.float64)[None, :]
    w = np.exp(-2j * np.pi * rows * cols / n_vec)
    return Codebook(ComplexMatrix(w))


def materialize(cb: Codebook, sel: BeamSelection) -> ComplexMatrix:
    """Assemble the M x N beamforming matrix whose column i is codebook column sel[i]."""
    sel.check_range(cb.n_vec)
    return ComplexMatrix(cb.w.data[:, sel.as_array()])
