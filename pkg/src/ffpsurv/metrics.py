"""Survival-curve prediction, risk scoring, and predictive metrics.

A prediction instance is a feature vector plus that subject's prior spells
(possibly none); the history folds into a posterior frailty state first, so
recurrent subjects are scored with what their earlier spells revealed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .frailty import fold_chain
from .model import (DiscreteBaselineHazard, GammaParams, LinearTransform,
                    transform)


@dataclass(frozen=True)
class SurvivalCurve:
    """Survival probabilities on the model grid; starts at 1, non-increasing."""

    grid: np.ndarray
    survival: np.ndarray

    def at(self, t):
        """Survival at grid time t."""
        idx = int(round(t / (self.grid[1] - self.grid[0]))) if self.grid.size > 1 else 0
        if idx < 0 or idx >= self.grid.size or abs(self.grid[idx] - t) > 1e-9 * max(t, 1.0):
            raise ValidationError(f"time {t!r} is not on the prediction grid")
        return float(self.survival[idx])


def _hazard_of(model):
    return DiscreteBaselineHazard(model.psi, model.delta, model.free_mask)


def _state_after(model, history, hz):
    prior = GammaParams(model.alpha, model.kappa)
    if not history:
        return prior
    lt = LinearTransform(model.beta)
    return fold_chain(prior, history, lt, hz)[-1]


def predict_survival(model, x, history=()):
    """Survival curve for features ``x`` given the subject's prior spells."""
    hz = _hazard_of(model)
    phi = transform(LinearTransform(model.beta), x)
    state = _state_after(model, tuple(history), hz)
    grid = model.psi * np.arange(hz.n_intervals + 1)
    surv = np.exp(-state.shape * np.log1p(phi * hz.cumulative / state.rate))
    return SurvivalCurve(grid=grid, survival=surv)


def risk_score(model, x, history=()):
    """Feature effect times the posterior mean frailty; higher is riskier."""
    hz = _hazard_of(model)
    phi = transform(LinearTransform(model.beta), x)
    state = _state_after(model, tuple(history), hz)
    return phi * state.mean


def c_index(scores, y, d):
    """Concordance over pairs where one record demonstrably failed first.

    Pair (i, j) is comparable when ``y[i] < y[j]`` and record i is an event;
    the pair counts 1 when the earlier failure got the higher score and 0.5
    on score ties.
    """
    scores = np.asarray(scores, dtype=float)
    y = np.asarray(y, dtype=float)
    d = np.asarray(d)
    if not (scores.shape == y.shape == d.shape and scores.ndim == 1):
        raise ValidationError("scores, y and d must be 1-D arrays of equal length")
    comparable = (y[:, None] < y[None, :]) & (d[:, None] == 1)
    n_comp = int(np.count_nonzero(comparable))
    if n_comp == 0:
        raise ValidationError("no comparable pairs: cannot compute a concordance index")
    higher = scores[:, None] > scores[None, :]
    tied = scores[:, None] == scores[None, :]
    concordant = np.count_nonzero(comparable & higher) \
        + 0.5 * np.count_nonzero(comparable & tied)
    return float(concordant / n_comp)


def _history_iter(ds):
    """Yield (spell, history) pairs across the dataset, histories in order."""
    for _, spells in ds.subjects:
        for j, s in enumerate(spells):
            yield s, spells[:j]


def integrated_brier(model, ds, horizon):
    """Mean squared error between survival indicators and predicted curves,
    trapezoid-averaged over grid times up to ``horizon``.

    Event records contribute at every time; censored records only at times
    before their censoring cell, where their survival status is still known
    (no inverse-censoring weights).  Grid times with no contributors are
    skipped; having none anywhere is an error.
    """
    hz = _hazard_of(model)
    k_h = hz.grid_index(horizon)
    if k_h < 1 or k_h > hz.n_intervals:
        raise ValidationError(
            f"horizon {horizon!r} must be a grid multiple within the model grid")
    if ds.n_spells == 0:
        raise ValidationError("cannot evaluate on an empty dataset")
    taus = model.psi * np.arange(1, k_h + 1)
    sq_err = np.zeros(k_h)
    counts = np.zeros(k_h, dtype=np.int64)
    for s, history in _history_iter(ds):
        curve = predict_survival(model, s.x, history)
        surv = curve.survival[1:k_h + 1]
        alive = (s.y > taus).astype(float)
        if s.d == 1:
            mask = np.ones(k_h, dtype=bool)
        else:
            mask = taus < s.y
        err = (alive - surv) ** 2
        sq_err[mask] += err[mask]
        counts[mask] += 1
    have = counts > 0
    if not np.any(have):
        raise ValidationError("no record contributes at any grid time before the horizon")
    mse = sq_err[have] / counts[have]
    t_have = taus[have]
    if t_have.size == 1:
        return float(mse[0])
    return float(np.trapezoid(mse, t_have) / (t_have[-1] - t_have[0]))


def evaluate_dataset(model, ds, horizon=None, condition_on_history=True):
    """Per-spell risk scores pooled into a concordance index, plus the
    integrated Brier score.  The default horizon is the latest event cell
    observed in ``ds`` (falling back to the model grid end).

    With ``condition_on_history`` False every spell is scored as a fresh
    first spell (feature-driven ranking only); the default folds each
    subject's earlier spells into the score.
    """
    scores = []
    ys = []
    events = []
    for s, history in _history_iter(ds):
        scores.append(risk_score(model, s.x, history if condition_on_history else ()))
        ys.append(s.y)
        events.append(s.d)
    if horizon is None:
        grid_end = model.psi * len(model.delta)
        event_ys = [y for y, d in zip(ys, events) if d == 1]
        horizon = max(event_ys) if event_ys else grid_end
        horizon = min(max(horizon, model.psi), grid_end)
    return {
        "c_index": c_index(np.array(scores), np.array(ys), np.array(events)),
        "ibs": integrated_brier(model, ds, horizon),
        "horizon": float(horizon),
        "records": len(scores),
    }
