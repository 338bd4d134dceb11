"""Flat array layout of a panel dataset for the likelihood kernels.

Spells are stored CSR-style: subject i owns slots ``offsets[i]:offsets[i+1]``
in observation order.  Prefix-sum indices are precomputed per spell, clipped
to the hazard grid, with flags marking sums that would reach the infinite
tail past the grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PackedPanel:
    subject_ids: tuple
    offsets: np.ndarray   # int64 (n+1,)
    s0_idx: np.ndarray    # int64 (N,) survivor-side prefix index, clipped
    s1_idx: np.ndarray    # int64 (N,) event-side prefix index, clipped
    tail0: np.ndarray     # uint8 (N,) survivor sum lies past the grid
    tail1: np.ndarray     # uint8 (N,) event sum lies past the grid
    d: np.ndarray         # int64 (N,)
    X: np.ndarray         # float64 (N, p)
    # padded (n, max_spells) views for the vectorized backend
    slot: np.ndarray      # int64, CSR slot of spell j of subject i (0 where invalid)
    valid: np.ndarray     # bool

    @property
    def n_subjects(self):
        return len(self.subject_ids)

    @property
    def n_spells(self):
        return self.d.shape[0]

    @property
    def max_spells(self):
        return self.valid.shape[1] if self.valid.size else 0


def pack_panel(ds, hz):
    """Lay out ``ds`` against the grid of ``hz``."""
    n = ds.n_subjects
    total = ds.n_spells
    n_intervals = hz.n_intervals

    offsets = np.zeros(n + 1, dtype=np.int64)
    m = np.zeros(total, dtype=np.int64)
    d = np.zeros(total, dtype=np.int64)
    X = np.zeros((total, ds.p), dtype=np.float64)
    ids = []

    t = 0
    for i, (sid, spells) in enumerate(ds.subjects):
        ids.append(sid)
        for s in spells:
            m[t] = hz.grid_index(s.y)
            d[t] = s.d
            X[t] = s.x
            t += 1
        offsets[i + 1] = t

    s0_idx = np.minimum(m, n_intervals)
    s1_idx = np.minimum(m + 1, n_intervals)
    tail0 = (m > n_intervals).astype(np.uint8)
    tail1 = (m + 1 > n_intervals).astype(np.uint8)

    counts = np.diff(offsets)
    max_spells = int(counts.max()) if n else 0
    j_grid = np.arange(max_spells, dtype=np.int64)[None, :]
    valid = j_grid < counts[:, None] if n else np.zeros((0, 0), dtype=bool)
    slot = np.where(valid, offsets[:-1, None] + j_grid, 0)

    return PackedPanel(
        subject_ids=tuple(ids), offsets=offsets,
        s0_idx=s0_idx, s1_idx=s1_idx, tail0=tail0, tail1=tail1,
        d=d, X=X, slot=slot, valid=valid,
    )
