"""Sequential Gamma-frailty posterior updates.

After each observed spell the frailty posterior is (exactly, for censored
spells; approximately, by matching the first two raw moments, for event
spells) another Gamma distribution, so a subject's whole history folds into a
single running (shape, rate) state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln
from scipy.stats import gamma as gamma_dist

from ._constants import EPS_LARGE, EPS_SMALL
from .errors import NumericalError, ValidationError
from .model import GammaParams, transform


@dataclass(frozen=True)
class XiPair:
    """Posterior-rate candidates for one spell.

    ``xi`` is the prior rate plus the feature effect times the survivor-side
    hazard prefix sum; ``xi_prime`` extends the sum by one interval (the
    event side).  ``epsilon = (xi_prime - xi) / xi_prime`` measures their
    relative gap.  An event falling past the stored hazard grid has an
    infinite event-side sum: ``epsilon`` is then exactly 1 and ``tail_event``
    is set (``xi_prime`` is reported as ``inf``).
    """

    xi: float
    xi_prime: float
    epsilon: float
    tail_event: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.xi) and self.xi > 0):
            raise ValidationError(f"xi must be finite and > 0, got {self.xi!r}")
        if self.tail_event:
            if not (self.xi_prime == math.inf and self.epsilon == 1.0):
                raise ValidationError("tail events must carry xi_prime=inf, epsilon=1")
        else:
            if not (math.isfinite(self.xi_prime) and self.xi_prime >= self.xi):
                raise ValidationError("xi_prime must be finite and >= xi")
            if not (0.0 <= self.epsilon < 1.0):
                raise ValidationError(f"epsilon must lie in [0, 1), got {self.epsilon!r}")


def compute_xi(prior, phi, y, hz):
    """Rate candidates for an outcome ``y`` under feature effect ``phi``.

    Histories that overshoot the hazard grid entirely are truncated at the
    grid end on the survivor side (the stored prefix sums are exhausted), and
    any event reaching past the grid is flagged as a tail event.
    """
    k = hz.grid_index(y)
    n = hz.n_intervals
    s_low = hz.cumulative[min(k, n)]
    xi = prior.rate + phi * s_low
    if k + 1 > n:
        return XiPair(xi=xi, xi_prime=math.inf, epsilon=1.0, tail_event=True)
    s_high = hz.cumulative[k + 1]
    xi_prime = prior.rate + phi * s_high
    return XiPair(xi=xi, xi_prime=xi_prime, epsilon=(xi_prime - xi) / xi_prime)


def moment_matched_gamma(shape, xi, epsilon):
    """Gamma approximation of the post-event frailty, by matching raw moments.

    Valid for epsilon strictly inside (0, 1); the limiting regimes are handled
    by :func:`posterior_update`.  Powers of (1 - epsilon) are evaluated through
    log1p/expm1 so the expressions stay accurate down to epsilon ~ 1e-6 and up
    to 1 - 1e-8.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValidationError(f"epsilon must lie strictly in (0, 1), got {epsilon!r}")
    t = math.log1p(-epsilon)           # log(1 - epsilon)
    pow0 = math.exp(shape * t)         # (1 - eps)^shape
    a0 = -math.expm1(shape * t)        # 1 - (1 - eps)^shape
    a1 = -math.expm1((shape + 1.0) * t)
    a2 = -math.expm1((shape + 2.0) * t)
    denom = a0 * a2 - shape * pow0 * epsilon * epsilon
    return GammaParams(shape=shape * a1 * a1 / denom, rate=xi * a0 * a1 / denom)


def posterior_update(prior, xp, d):
    """Fold one spell into the running Gamma frailty state.

    Censored spells shift only the rate (exact conjugate update).  Event
    spells use the moment-matched Gamma, except near the epsilon extremes
    where the limiting forms are both exact in the limit and numerically
    safe: epsilon -> 0 gives (shape+1, (xi+xi')/2) and epsilon -> 1 gives
    (shape, xi).
    """
    if d == 0:
        return GammaParams(prior.shape, xp.xi)
    if xp.tail_event or xp.epsilon >= EPS_LARGE:
        return GammaParams(prior.shape, xp.xi)
    if xp.epsilon <= EPS_SMALL:
        return GammaParams(prior.shape + 1.0, 0.5 * (xp.xi + xp.xi_prime))
    return moment_matched_gamma(prior.shape, xp.xi, xp.epsilon)


def fold_chain(prior, spells, lt, hz):
    """States of the frailty distribution before/after each spell, in order.

    Returns ``[prior, state_after_spell_1, ..., state_after_spell_J]``.
    """
    states = [prior]
    state = prior
    for s in spells:
        phi = transform(lt, s.x)
        xp = compute_xi(state, phi, s.y, hz)
        state = posterior_update(state, xp, s.d)
        states.append(state)
    return states


def posterior_moments_oracle(prior, xp):
    """First two raw moments of the exact (non-Gamma) post-event frailty density.

    The density is proportional to v^(shape-1) * (exp(-v*xi) - exp(-v*xi')),
    with normalizer Gamma(shape) * (xi^-shape - xi'^-shape).  Computed by
    adaptive quadrature on [0, U] where U leaves Gamma(shape, xi) tail mass
    below 1e-14 (that Gamma density dominates the integrand).  Test-support
    operation: deliberately independent of the closed-form update above.
    """
    a, xi, xip = prior.shape, xp.xi, xp.xi_prime
    if xp.tail_event:
        raise ValidationError("tail events have a plain Gamma posterior; no oracle needed")
    if not xip > xi:
        raise ValidationError("the event-case oracle requires xi_prime > xi")
    # the weighted integrand v^(order) * density is dominated by a Gamma(a+2, xi)
    # shape; truncating where that tail is < 1e-18 keeps the truncation error
    # well below the quadrature tolerance even after normalization
    upper = float(gamma_dist.isf(1e-18, a + 2.0, scale=1.0 / xi))
    # log-space normalizer: Gamma(a) * xi^-a * (1 - (xi/xi')^a)
    log_norm = gammaln(a) - a * math.log(xi) + math.log(-math.expm1(a * math.log(xi / xip)))

    def density(v):
        return math.exp((a - 1.0) * math.log(v) - v * xi - log_norm) * -math.expm1(-v * (xip - xi))

    moments = []
    for order in (1, 2):
        val, err = quad(lambda v: v ** order * density(v), 0.0, upper,
                        epsabs=1e-13, epsrel=1e-13, limit=800)
        if err > 1e-8 * max(1.0, abs(val)):
            raise NumericalError(
                f"moment quadrature did not converge: achieved abs error {err:g} "
                f"for moment {order} at shape={a}, xi={xi}, xi_prime={xip}")
        moments.append(val)
    return moments[0], moments[1]


def moment_matched_from_moments(mu1, mu2):
    """Gamma(shape, rate) with the given first two raw moments."""
    var = mu2 - mu1 * mu1
    if var <= 0:
        raise NumericalError(f"non-positive implied variance {var!r}")
    return GammaParams(shape=mu1 * mu1 / var, rate=mu1 / var)
