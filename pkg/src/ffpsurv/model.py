"""Core domain types: Gamma frailty parameters, the discretized baseline hazard,
the exponential-linear feature transform, and panel data containers.

All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, ValidationError

# Relative tolerance (in units of the interval length) for "y sits on the grid".
GRID_RTOL = 1e-9


def _readonly(a, dtype=float):
    out = np.ascontiguousarray(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GammaParams:
    """Shape/rate parameterization of a Gamma distribution.

    Used both for the frailty prior and for the sequentially updated
    posterior states.
    """

    shape: float
    rate: float

    def __post_init__(self):
        if not (math.isfinite(self.shape) and self.shape > 0):
            raise ValidationError(f"Gamma shape must be finite and > 0, got {self.shape}")
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise ValidationError(f"Gamma rate must be finite and > 0, got {self.rate}")

    @property
    def mean(self):
        return self.shape / self.rate


@dataclass(frozen=True)
class DiscreteBaselineHazard:
    """Piecewise-constant cumulative baseline hazard on a grid of width ``interval``.

    ``increments[k-1]`` is the hazard mass accumulated over ``[(k-1)*interval,
    k*interval)`` for k = 1..K.  Entries with ``free_mask`` False are pinned at
    zero (intervals in which no outcome was observed are not estimable and carry
    no hazard).  Beyond the last stored interval the hazard mass is infinite:
    an event term that would reach past the grid simply drops its second term.

    ``cumulative`` holds prefix sums with ``cumulative[0] == 0`` and
    ``cumulative[k] == increments[:k].sum()``.
    """

    interval: float
    increments: np.ndarray
    free_mask: np.ndarray
    cumulative: np.ndarray = field(init=False)

    def __post_init__(self):
        if not (math.isfinite(self.interval) and self.interval > 0):
            raise ValidationError(f"interval length must be finite and > 0, got {self.interval}")
        inc = _readonly(self.increments)
        mask = _readonly(self.free_mask, dtype=bool)
        if inc.ndim != 1 or mask.shape != inc.shape:
            raise ValidationError("increments and free_mask must be 1-D arrays of equal length")
        if np.any(inc < 0) or not np.all(np.isfinite(inc)):
            raise ValidationError("hazard increments must be finite and non-negative")
        if np.any(inc[~mask] != 0.0):
            raise ValidationError("masked-off hazard increments must be exactly zero")
        # sequential accumulation so cumulative[k] == cumulative[k-1] + increments[k-1]
        # holds exactly entry by entry
        cum = np.zeros(inc.shape[0] + 1)
        for k in range(inc.shape[0]):
            cum[k + 1] = cum[k] + inc[k]
        object.__setattr__(self, "increments", inc)
        object.__setattr__(self, "free_mask", mask)
        object.__setattr__(self, "cumulative", _readonly(cum))

    @property
    def n_intervals(self):
        return self.increments.shape[0]

    @property
    def n_free(self):
        return int(self.free_mask.sum())

    def grid_index(self, y, row=None):
        """Map an on-grid outcome y to its prefix-sum index k = y / interval."""
        k = int(round(y / self.interval))
        if k < 0 or abs(y - k * self.interval) > GRID_RTOL * self.interval:
            raise ValidationError(
                f"outcome {y!r} is not a non-negative multiple of the interval "
                f"length {self.interval!r}", row=row)
        return k

    def with_free_increments(self, values):
        """Return a copy with the free increments replaced by ``values``."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_free,):
            raise DimensionMismatchError(self.n_free, values.size, "free increment vector")
        inc = np.array(self.increments)
        inc[self.free_mask] = values
        return DiscreteBaselineHazard(self.interval, inc, self.free_mask)


def build_baseline(psi, observed_ys):
    """Construct the baseline-hazard structure implied by a set of observed outcomes.

    Interval k (1-based) is estimable iff some observed outcome falls in
    ``[(k-1)*psi, k*psi)``, i.e. iff ``(k-1)*psi`` is among the outcomes; all
    other increments are pinned at zero.  The grid extends one interval past
    the largest outcome so that an event observed there still has a finite
    event-side prefix sum.  Increments start at zero; fitting assigns values.
    """
    ys = list(observed_ys)
    if not ys:
        return DiscreteBaselineHazard(psi, np.zeros(0), np.zeros(0, dtype=bool))
    occupied = set()
    k_max = 0
    for row, y in enumerate(ys):
        k = int(round(y / psi))
        if k < 0 or abs(y - k * psi) > GRID_RTOL * psi:
            raise ValidationError(
                f"outcome {y!r} is not a non-negative multiple of psi={psi!r}", row=row)
        occupied.add(k + 1)  # interval containing y
        k_max = max(k_max, k + 1)
    mask = np.zeros(k_max, dtype=bool)
    for k in occupied:
        mask[k - 1] = True
    return DiscreteBaselineHazard(psi, np.zeros(k_max), mask)


@dataclass(frozen=True)
class LinearTransform:
    """Exponential of a linear combination of features: x -> exp(x . coefficients)."""

    coefficients: np.ndarray

    def __post_init__(self):
        c = _readonly(self.coefficients)
        if c.ndim != 1:
            raise ValidationError("coefficients must be a 1-D vector")
        if not np.all(np.isfinite(c)):
            raise ValidationError("coefficients must be finite")
        object.__setattr__(self, "coefficients", c)

    @property
    def p(self):
        return self.coefficients.shape[0]


def transform(lt, x):
    """Evaluate exp(x . beta); strictly positive and finite for finite inputs."""
    x = np.asarray(x, dtype=float)
    if x.shape != (lt.p,):
        raise DimensionMismatchError(lt.p, x.size)
    return float(np.exp(x @ lt.coefficients))


def transform_many(lt, X):
    """Row-wise transform for a feature matrix of shape (n, p)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != lt.p:
        raise DimensionMismatchError(lt.p, X.shape[-1], "feature matrix column count")
    return np.exp(X @ lt.coefficients)


@dataclass(frozen=True)
class Spell:
    """One observed (outcome, censoring indicator, features) triplet.

    ``d`` is 1 when the event was observed inside the interval starting at
    ``y`` and 0 when observation ended there instead.
    """

    y: float
    d: int
    x: np.ndarray

    def __post_init__(self):
        if self.d not in (0, 1):
            raise ValidationError(f"censoring indicator must be 0 or 1, got {self.d!r}")
        if not (math.isfinite(self.y) and self.y >= 0):
            raise ValidationError(f"outcome must be finite and >= 0, got {self.y!r}")
        x = _readonly(self.x)
        if x.ndim != 1:
            raise ValidationError("feature vector must be 1-D")
        if not np.all(np.isfinite(x)):
            raise ValidationError("feature vector must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "d", int(self.d))


@dataclass(frozen=True)
class PanelDataset:
    """An ordered panel of subjects, each with an ordered list of spells.

    Subjects are stored sorted by subject id, which fixes the summation order
    of every dataset-level reduction; the spell order within a subject is the
    observation order and is what the sequential frailty update conditions on.
    """

    subjects: tuple
    p: int
    psi: float

    def __post_init__(self):
        if not (math.isfinite(self.psi) and self.psi > 0):
            raise ValidationError(f"psi must be finite and > 0, got {self.psi!r}")
        seen = set()
        normalized = []
        for subject_id, spells in self.subjects:
            sid = str(subject_id)
            if sid in seen:
                raise ValidationError(f"duplicate subject id {sid!r}")
            seen.add(sid)
            spells = tuple(spells)
            for j, s in enumerate(spells):
                if s.x.shape[0] != self.p:
                    raise DimensionMismatchError(
                        self.p, s.x.shape[0],
                        f"feature vector of subject {sid!r} spell {j + 1}")
                k = round(s.y / self.psi)
                if abs(s.y - k * self.psi) > GRID_RTOL * self.psi:
                    raise ValidationError(
                        f"outcome {s.y!r} of subject {sid!r} spell {j + 1} is not "
                        f"a multiple of psi={self.psi!r}")
            normalized.append((sid, spells))
        normalized.sort(key=lambda item: item[0])
        object.__setattr__(self, "subjects", tuple(normalized))
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "psi", float(self.psi))

    @property
    def n_subjects(self):
        return len(self.subjects)

    @property
    def n_spells(self):
        return sum(len(spells) for _, spells in self.subjects)

    @property
    def n_events(self):
        return sum(s.d for _, spells in self.subjects for s in spells)

    def observed_ys(self):
        return [s.y for _, spells in self.subjects for s in spells]

    def iter_spells(self):
        """Yield (subject_id, spell_index_1based, spell) over all spells."""
        for sid, spells in self.subjects:
            for j, s in enumerate(spells, start=1):
                yield sid, j, s

    def baseline_structure(self):
        """The estimable-hazard structure implied by this dataset's outcomes."""
        return build_baseline(self.psi, self.observed_ys())
