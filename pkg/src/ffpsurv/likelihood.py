"""Spell, panel and dataset log-likelihoods for the grouped-duration model.

The single-spell probability is the survivor term minus (for events) the
one-interval-later survivor term, each of the form
``(1 + phi * prefix_sum / rate) ** -shape``.  Panel likelihoods chain these
conditionally: spell j is scored against the frailty state folded from spells
1..j-1.  Dataset-level evaluation runs on flat arrays through the selected
kernel backend; the per-spell functions here are the readable scalar
reference the kernels are tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from ._constants import LIK_FLOOR
from ._pack import pack_panel
from .errors import NumericalError, PanelLikelihoodError, ValidationError
from .frailty import compute_xi, posterior_update
from .model import transform, transform_many


def kahan_sum(values):
    """Compensated sum in the given order; reproducible across runs."""
    total = 0.0
    carry = 0.0
    for v in values:
        y = v - carry
        t = total + y
        carry = (t - total) - y
        total = t
    return total


def spell_likelihood(prior, phi, y, d, hz):
    """Probability of observing (y, d) for one spell under Gamma frailty.

    Events whose second term would need hazard mass past the stored grid keep
    only the survivor term (the mass out there is infinite, so the deeper
    survivor factor vanishes).  A survivor term past the grid is itself zero.
    """
    k = hz.grid_index(y)
    n = hz.n_intervals
    a = prior.shape
    if k > n:
        return 0.0
    s0 = hz.cumulative[k]
    u0 = phi * s0 / prior.rate
    log_surv = -a * math.log1p(u0)
    if d == 0 or k + 1 > n:
        return math.exp(log_surv)
    s1 = hz.cumulative[k + 1]
    du = phi * (s1 - s0) / prior.rate
    q = -math.expm1(-a * math.log1p(du / (1.0 + u0)))
    value = math.exp(log_surv) * q
    if value < -1e-15:
        raise NumericalError(
            f"negative spell likelihood {value!r}; hazard prefix sums are inconsistent")
    return max(value, 0.0)


def conditional_spell_likelihood(state, phi, y, d, hz):
    """Likelihood of a spell given its subject's history, i.e. evaluated at
    the folded frailty state instead of the prior."""
    return spell_likelihood(state, phi, y, d, hz)


def panel_loglik(spells, lt, hz, prior, subject_id="subject"):
    """Log-likelihood of one subject's ordered spells.

    Interleaves scoring and updating: spell j is scored against the state
    after spells 1..j-1, then folded in.  Raises when a spell's likelihood is
    not positive; likelihoods below the floor are clamped.
    """
    state = prior
    total = 0.0
    for j, s in enumerate(spells, start=1):
        phi = transform(lt, s.x)
        lik = conditional_spell_likelihood(state, phi, s.y, s.d, hz)
        if lik <= 0.0:
            raise PanelLikelihoodError(subject_id, j, lik)
        total += math.log(max(lik, LIK_FLOOR))
        xp = compute_xi(state, phi, s.y, hz)
        state = posterior_update(state, xp, s.d)
    return total


@dataclass(frozen=True)
class ParameterVector:
    """Unconstrained parameterization of the model.

    ``beta`` is free; hazard increments and the frailty shape live on the log
    scale.  ``log_kappa`` is present only when the unit-mean frailty
    normalization is disabled; otherwise the rate tracks the shape exactly
    (mean-one frailty), which removes the joint (delta, kappa) scale freedom.
    """

    beta: np.ndarray
    log_delta: np.ndarray
    log_alpha: float
    log_kappa: float | None = None

    def __post_init__(self):
        beta = np.ascontiguousarray(self.beta, dtype=float)
        log_delta = np.ascontiguousarray(self.log_delta, dtype=float)
        if not (np.all(np.isfinite(beta)) and np.all(np.isfinite(log_delta))
                and math.isfinite(self.log_alpha)
                and (self.log_kappa is None or math.isfinite(self.log_kappa))):
            raise ValidationError("parameter vector entries must be finite")
        beta.setflags(write=False)
        log_delta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "log_delta", log_delta)

    @property
    def unit_mean(self):
        return self.log_kappa is None

    @property
    def alpha(self):
        return math.exp(self.log_alpha)

    @property
    def kappa(self):
        return self.alpha if self.unit_mean else math.exp(self.log_kappa)

    @property
    def delta_free(self):
        return np.exp(self.log_delta)

    @property
    def size(self):
        return self.beta.size + self.log_delta.size + 1 + (0 if self.unit_mean else 1)

    def to_array(self):
        tail = [self.log_alpha] if self.unit_mean else [self.log_alpha, self.log_kappa]
        return np.concatenate([self.beta, self.log_delta, tail])

    @classmethod
    def from_array(cls, arr, p, n_free, unit_mean=True):
        arr = np.asarray(arr, dtype=float)
        expected = p + n_free + (1 if unit_mean else 2)
        if arr.shape != (expected,):
            raise ValidationError(
                f"parameter array has length {arr.size}, expected {expected}")
        beta = arr[:p]
        log_delta = arr[p:p + n_free]
        log_alpha = float(arr[p + n_free])
        log_kappa = None if unit_mean else float(arr[p + n_free + 1])
        return cls(beta=beta, log_delta=log_delta,
                   log_alpha=log_alpha, log_kappa=log_kappa)

    def component_name(self, i):
        """Human-readable name of unconstrained component i (for error messages)."""
        p, r = self.beta.size, self.log_delta.size
        if i < p:
            return f"beta[{i}]"
        if i < p + r:
            return f"log_delta[{i - p}]"
        if i == p + r:
            return "log_alpha"
        return "log_kappa"


def _cumulative_from_pv(hz, pv):
    if pv.log_delta.size != hz.n_free:
        raise ValidationError(
            f"parameter vector has {pv.log_delta.size} free increments, "
            f"hazard structure has {hz.n_free}")
    delta_full = np.zeros(hz.n_intervals)
    delta_full[hz.free_mask] = pv.delta_free
    cum = np.concatenate(([0.0], np.cumsum(delta_full)))
    return delta_full, cum


def eval_loglik_packed(packed, hz, pv):
    """(total, per-subject vector, clamp count) on a prepacked dataset."""
    _, cum = _cumulative_from_pv(hz, pv)
    phi = np.exp(packed.X @ pv.beta)
    ll, clamps = _backend.panel_loglik(packed, phi, cum, pv.alpha, pv.kappa)
    return kahan_sum(ll), ll, clamps


def eval_loglik_grad_packed(packed, hz, pv):
    """(total, gradient in the layout of pv, clamp count) on a prepacked dataset."""
    delta_full, cum = _cumulative_from_pv(hz, pv)
    phi = np.exp(packed.X @ pv.beta)
    ll, g_phi, g_cum, g_alpha, g_kappa, clamps = _backend.panel_loglik_grad(
        packed, phi, cum, pv.alpha, pv.kappa)
    g_beta = packed.X.T @ (g_phi * phi)
    # cum[j] contains delta_k for every j >= k: suffix-sum the prefix adjoints
    suffix = np.cumsum(g_cum[::-1])[::-1]
    g_delta_full = suffix[1:]
    g_log_delta = delta_full[hz.free_mask] * g_delta_full[hz.free_mask]
    alpha = pv.alpha
    if pv.unit_mean:
        tail = [alpha * (g_alpha + g_kappa)]
    else:
        tail = [alpha * g_alpha, pv.kappa * g_kappa]
    grad = np.concatenate([g_beta, g_log_delta, tail])
    return kahan_sum(ll), grad, clamps


def dataset_loglik(ds, pv, hz=None):
    """Panel log-likelihood summed over subjects (fixed order, compensated).

    Spell likelihoods below the floor are clamped rather than raised here;
    the clamp count is surfaced through the fitting report.
    """
    if hz is None:
        hz = ds.baseline_structure()
    total, _, _ = eval_loglik_packed(pack_panel(ds, hz), hz, pv)
    return total


def dataset_loglik_grad(ds, pv, hz=None):
    """Gradient of :func:`dataset_loglik` in the unconstrained coordinates of ``pv``."""
    if hz is None:
        hz = ds.baseline_structure()
    _, grad, _ = eval_loglik_grad_packed(pack_panel(ds, hz), hz, pv)
    bad = np.flatnonzero(~np.isfinite(grad))
    if bad.size:
        raise NumericalError(
            f"non-finite gradient component {pv.component_name(int(bad[0]))}")
    return grad
