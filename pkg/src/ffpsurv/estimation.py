"""Maximum-likelihood fitting of the panel model.

Limited-memory quasi-Newton ascent on the unconstrained parameterization
(free coefficients, log hazard increments, log frailty shape), with an Armijo
backtracking line search.  Positivity of increments and of the shape comes
from the log parameterization rather than explicit bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._pack import pack_panel
from .errors import NumericalError, ValidationError
from .likelihood import (ParameterVector, eval_loglik_grad_packed,
                         eval_loglik_packed)

# Armijo line search: sufficient-decrease constant, shrink factor, retry cap.
ARMIJO_C1 = 1e-4
ARMIJO_SHRINK = 0.5
MAX_BACKTRACKS = 40
LBFGS_MEMORY = 10

# Free increments optimized below this are effectively pinned at zero.
NEGLIGIBLE_LOG_DELTA = -30.0

# Floor for the empirical-hazard initial values of free increments.
INIT_DELTA_FLOOR = 1e-6


@dataclass(frozen=True)
class FitConfig:
    """Optimizer settings; fitting is deterministic, there is no seed."""

    max_iters: int = 500
    grad_tol: float = 1e-6       # inf-norm of the unconstrained gradient
    rel_f_tol: float = 1e-9      # relative objective change between accepted steps
    unit_mean_frailty: bool = True  # constrain rate = shape (mean-one frailty)

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")
        if not (self.grad_tol > 0 and self.rel_f_tol > 0):
            raise ValidationError("tolerances must be strictly positive")


@dataclass(frozen=True)
class FittedModel:
    """Estimates plus convergence report.

    ``delta`` is the full increment vector (masked entries are zero);
    ``normalization`` records whether the rate was tied to the shape.  There
    is no intercept coefficient: a constant feature effect is absorbed by the
    scale of the increments and the frailty mean.
    """

    beta: np.ndarray
    delta: np.ndarray
    free_mask: np.ndarray
    alpha: float
    kappa: float
    psi: float
    loglik: float
    converged: bool
    iterations: int
    normalization: str  # "unit_mean" | "free_kappa"
    clamp_count: int

    def __post_init__(self):
        if self.normalization not in ("unit_mean", "free_kappa"):
            raise ValidationError(f"unknown normalization {self.normalization!r}")
        if self.converged and not math.isfinite(self.loglik):
            raise ValidationError("a converged fit must report a finite log-likelihood")
        if self.normalization == "unit_mean" and self.kappa != self.alpha:
            raise ValidationError("unit-mean normalization requires kappa == alpha")

    @property
    def p(self):
        return self.beta.shape[0]

    def negligible_free_count(self):
        """Free increments driven to the effective-zero boundary."""
        free = self.delta[self.free_mask]
        return int(np.count_nonzero(free < math.exp(NEGLIGIBLE_LOG_DELTA)))


@dataclass(frozen=True)
class OverparamReport:
    """Free-parameter count versus observation count."""

    free_delta_count: int
    feature_count: int
    param_count: int
    spell_count: int
    ratio: float | None
    warn: bool

    def summary(self):
        if self.ratio is None:
            return "overparameterization check: empty dataset, ratio undefined"
        msg = (f"free parameters {self.param_count} "
               f"({self.free_delta_count} hazard increments + "
               f"{self.feature_count} coefficients + 1 shape) over "
               f"{self.spell_count} spells, ratio {self.ratio:.4g}")
        if self.warn:
            msg += " -- WARNING: at least as many parameters as observations"
        return msg


def overparam_check(ds):
    hz = ds.baseline_structure()
    r = hz.n_free
    spell_count = ds.n_spells
    param_count = r + ds.p + 1
    if spell_count == 0:
        return OverparamReport(r, ds.p, param_count, 0, None, False)
    return OverparamReport(
        free_delta_count=r, feature_count=ds.p, param_count=param_count,
        spell_count=spell_count, ratio=param_count / spell_count,
        warn=param_count >= spell_count)


def initialize(ds, hz=None, unit_mean_frailty=True):
    """Starting parameters: zero coefficients, unit shape, and the empirical
    discrete hazard (events in interval / at risk entering it) as increments,
    floored away from zero."""
    if hz is None:
        hz = ds.baseline_structure()
    if ds.n_events == 0:
        raise ValidationError(
            "dataset has no observed events; the hazard scale is degenerate")
    n_int = hz.n_intervals
    events = np.zeros(n_int, dtype=np.int64)
    entered = np.zeros(n_int, dtype=np.int64)  # at risk entering interval k
    for _, _, s in ds.iter_spells():
        k = hz.grid_index(s.y)  # outcome sits in interval k+1 (1-based)
        if s.d == 1 and k < n_int:
            events[k] += 1
        # the spell is at risk through intervals 1..k+1
        entered[:min(k + 1, n_int)] += 1
    with np.errstate(invalid="ignore"):
        hazard = np.where(entered > 0, events / np.maximum(entered, 1), 0.0)
    delta0 = np.maximum(hazard, INIT_DELTA_FLOOR)
    log_delta = np.log(delta0[hz.free_mask])
    return ParameterVector(
        beta=np.zeros(ds.p), log_delta=log_delta, log_alpha=0.0,
        log_kappa=None if unit_mean_frailty else 0.0)


def _two_loop_direction(grad, history):
    """L-BFGS two-loop recursion; returns the quasi-Newton descent direction."""
    q = grad.copy()
    alphas = []
    for s, y, rho in reversed(history):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if history:
        s, y, _ = history[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(history, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def fit(ds, cfg=None):
    """Maximize the panel log-likelihood; deterministic for a given dataset.

    Returns a FittedModel with ``converged`` False (not an error) when the
    iteration cap is hit first.
    """
    cfg = cfg or FitConfig()
    hz = ds.baseline_structure()
    packed = pack_panel(ds, hz)
    pv0 = initialize(ds, hz, cfg.unit_mean_frailty)
    p, r, unit = ds.p, hz.n_free, cfg.unit_mean_frailty

    def unpack(x):
        return ParameterVector.from_array(x, p, r, unit_mean=unit)

    def value_only(x):
        total, _, _ = eval_loglik_packed(packed, hz, unpack(x))
        return -total

    def value_and_grad(x):
        total, grad, clamps = eval_loglik_grad_packed(packed, hz, unpack(x))
        return -total, -grad, clamps

    x = pv0.to_array()
    f, g, clamps = value_and_grad(x)
    if not (math.isfinite(f) and np.all(np.isfinite(g))):
        raise NumericalError("objective is not finite at the initial parameters")

    history = []
    iterations = 0
    converged = np.max(np.abs(g)) <= cfg.grad_tol

    while not converged and iterations < cfg.max_iters:
        direction = _two_loop_direction(g, history)
        gtd = g @ direction
        if not (gtd < 0 and np.all(np.isfinite(direction))):
            history.clear()
            direction = -g
            gtd = g @ direction
        step = 1.0 if history else 1.0 / max(1.0, np.max(np.abs(g)))

        accepted = False
        for _ in range(MAX_BACKTRACKS + 1):
            x_new = x + step * direction
            f_new = value_only(x_new)
            if math.isfinite(f_new) and f_new <= f + ARMIJO_C1 * step * gtd:
                accepted = True
                break
            step *= ARMIJO_SHRINK
        if not accepted:
            break
        if f_new > f + 1e-12 * (1.0 + abs(f)):
            raise NumericalError("line search accepted a non-improving step")

        f_new2, g_new, clamps = value_and_grad(x_new)
        s = x_new - x
        yv = g_new - g
        sy = s @ yv
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(yv):
            history.append((s, yv, 1.0 / sy))
            if len(history) > LBFGS_MEMORY:
                history.pop(0)

        rel_done = abs(f_new2 - f) <= cfg.rel_f_tol * (1.0 + abs(f))
        x, f, g = x_new, f_new2, g_new
        iterations += 1
        if np.max(np.abs(g)) <= cfg.grad_tol or rel_done:
            converged = True

    pv = unpack(x)
    delta = np.zeros(hz.n_intervals)
    delta[hz.free_mask] = pv.delta_free
    total, _, clamps = eval_loglik_packed(packed, hz, pv)
    return FittedModel(
        beta=pv.beta.copy(), delta=delta, free_mask=np.array(hz.free_mask),
        alpha=pv.alpha, kappa=pv.kappa, psi=ds.psi,
        loglik=total, converged=bool(converged), iterations=iterations,
        normalization="unit_mean" if unit else "free_kappa",
        clamp_count=int(clamps))
