"""JIT-compiled panel likelihood and gradient kernels.

Straight-line scalar loops over subjects and spells; one pass for the
objective, a forward/backward pair for the gradient.  The numpy fallback in
``_kernels_numpy`` implements the same recurrences with vectorized array ops;
both must produce matching results.
"""

import math

import numpy as np
from numba import njit

from ._constants import EPS_LARGE, EPS_SMALL, LOG_LIK_FLOOR


@njit(cache=True, nogil=True)
def panel_loglik_csr(offsets, s0_idx, s1_idx, tail0, tail1, d, phi, cum,
                     alpha, kappa):
    """Per-subject log-likelihoods; returns (loglik[n], clamp_count)."""
    n = offsets.shape[0] - 1
    ll = np.zeros(n)
    clamps = 0
    for i in range(n):
        a = alpha
        k = kappa
        acc = 0.0
        for t in range(offsets[i], offsets[i + 1]):
            ph = phi[t]
            s0 = cum[s0_idx[t]]
            u0 = ph * s0 / k
            l0 = math.log1p(u0)
            xi = k + ph * s0
            if d[t] == 0:
                if tail0[t]:
                    acc += LOG_LIK_FLOOR
                    clamps += 1
                else:
                    logl = -a * l0
                    if logl < LOG_LIK_FLOOR:
                        acc += LOG_LIK_FLOOR
                        clamps += 1
                    else:
                        acc += logl
                k = xi
            else:
                if tail0[t]:
                    acc += LOG_LIK_FLOOR
                    clamps += 1
                    k = xi
                elif tail1[t]:
                    logl = -a * l0
                    if logl < LOG_LIK_FLOOR:
                        acc += LOG_LIK_FLOOR
                        clamps += 1
                    else:
                        acc += logl
                    k = xi
                else:
                    s1 = cum[s1_idx[t]]
                    du = ph * (s1 - s0) / k
                    diff = -a * math.log1p(du / (1.0 + u0))
                    q = -math.expm1(diff)
                    if q <= 0.0:
                        acc += LOG_LIK_FLOOR
                        clamps += 1
                    else:
                        logl = -a * l0 + math.log(q)
                        if logl < LOG_LIK_FLOOR:
                            acc += LOG_LIK_FLOOR
                            clamps += 1
                        else:
                            acc += logl
                    xi_p = k + ph * s1
                    eps = (xi_p - xi) / xi_p
                    if eps >= EPS_LARGE:
                        k = xi
                    elif eps <= EPS_SMALL:
                        a = a + 1.0
                        k = 0.5 * (xi + xi_p)
                    else:
                        t_log = math.log1p(-eps)
                        pw = math.exp(a * t_log)
                        a0 = -math.expm1(a * t_log)
                        a1 = -math.expm1((a + 1.0) * t_log)
                        a2 = -math.expm1((a + 2.0) * t_log)
                        den = a0 * a2 - a * pw * eps * eps
                        a_new = a * a1 * a1 / den
                        k = xi * a0 * a1 / den
                        a = a_new
        ll[i] = acc
    return ll, clamps


@njit(cache=True, nogil=True)
def panel_loglik_grad_csr(offsets, s0_idx, s1_idx, tail0, tail1, d, phi, cum,
                          alpha, kappa, max_spells):
    """Objective plus gradient pieces.

    Returns (loglik[n], g_phi[N], g_cum[K+1], g_alpha, g_kappa, clamp_count)
    where g_phi/g_cum are adjoints of the per-spell feature effects and of the
    hazard prefix sums, and g_alpha/g_kappa are adjoints of the prior.
    """
    n = offsets.shape[0] - 1
    total = phi.shape[0]
    ll = np.zeros(n)
    g_phi = np.zeros(total)
    g_cum = np.zeros(cum.shape[0])
    g_alpha = 0.0
    g_kappa = 0.0
    clamps = 0

    a_states = np.empty(max_spells + 1)
    k_states = np.empty(max_spells + 1)

    for i in range(n):
        lo = offsets[i]
        hi = offsets[i + 1]
        count = hi - lo

        # forward: record the state entering each spell
        a = alpha
        k = kappa
        acc = 0.0
        for j in range(count):
            t = lo + j
            a_states[j] = a
            k_states[j] = k
            ph = phi[t]
            s0 = cum[s0_idx[t]]
            u0 = ph * s0 / k
            l0 = math.log1p(u0)
            xi = k + ph * s0
            if d[t] == 0:
                if tail0[t]:
                    acc += LOG_LIK_FLOOR
                    clamps += 1
                else:
                    logl = -a * l0
                    if logl < LOG_LIK_FLOOR:
                        acc += LOG_LIK_FLOOR
                        clamps += 1
                    else:
                        acc += logl
                k = xi
            else:
                if tail0[t]:
                    acc += LOG_LIK_FLOOR
                    clamps += 1
                    k = xi
                elif tail1[t]:
                    logl = -a * l0
                    if logl < LOG_LIK_FLOOR:
                        acc += LOG_LIK_FLOOR
                        clamps += 1
                    else:
                        acc += logl
                    k = xi
                else:
                    s1 = cum[s1_idx[t]]
                    du = ph * (s1 - s0) / k
                    diff = -a * math.log1p(du / (1.0 + u0))
                    q = -math.expm1(diff)
                    if q <= 0.0:
                        acc += LOG_LIK_FLOOR
                        clamps += 1
                    else:
                        logl = -a * l0 + math.log(q)
                        if logl < LOG_LIK_FLOOR:
                            acc += LOG_LIK_FLOOR
                            clamps += 1
                        else:
                            acc += logl
                    xi_p = k + ph * s1
                    eps = (xi_p - xi) / xi_p
                    if eps >= EPS_LARGE:
                        k = xi
                    elif eps <= EPS_SMALL:
                        a = a + 1.0
                        k = 0.5 * (xi + xi_p)
                    else:
                        t_log = math.log1p(-eps)
                        pw = math.exp(a * t_log)
                        a0 = -math.expm1(a * t_log)
                        a1 = -math.expm1((a + 1.0) * t_log)
                        a2 = -math.expm1((a + 2.0) * t_log)
                        den = a0 * a2 - a * pw * eps * eps
                        a_new = a * a1 * a1 / den
                        k = xi * a0 * a1 / den
                        a = a_new
        ll[i] = acc

        # backward: adjoints of the running state, newest spell first
        va = 0.0
        vk = 0.0
        for j in range(count - 1, -1, -1):
            t = lo + j
            a = a_states[j]
            k = k_states[j]
            ph = phi[t]
            s0 = cum[s0_idx[t]]
            u0 = ph * s0 / k
            l0 = math.log1p(u0)
            xi = k + ph * s0

            ga = va
            gk = 0.0
            gph = 0.0
            gs0 = 0.0
            gs1 = 0.0

            censored_shape = d[t] == 0 or tail0[t] or tail1[t]
            if censored_shape:
                # update was (a, xi)
                gk += vk
                gph += vk * s0
                gs0 += vk * ph
            else:
                s1 = cum[s1_idx[t]]
                xi_p = k + ph * s1
                eps = (xi_p - xi) / xi_p
                if eps >= EPS_LARGE:
                    gk += vk
                    gph += vk * s0
                    gs0 += vk * ph
                elif eps <= EPS_SMALL:
                    # update was (a + 1, (xi + xi') / 2)
                    gk += vk
                    gph += vk * 0.5 * (s0 + s1)
                    gs0 += vk * 0.5 * ph
                    gs1 += vk * 0.5 * ph
                else:
                    t_log = math.log1p(-eps)
                    om = 1.0 - eps
                    pw = math.exp(a * t_log)
                    a0 = -math.expm1(a * t_log)
                    a1 = -math.expm1((a + 1.0) * t_log)
                    a2 = -math.expm1((a + 2.0) * t_log)
                    den = a0 * a2 - a * pw * eps * eps
                    da0_da = -(1.0 - a0) * t_log
                    da1_da = -(1.0 - a1) * t_log
                    da2_da = -(1.0 - a2) * t_log
                    da0_de = (1.0 - a0) * a / om
                    da1_de = (1.0 - a1) * (a + 1.0) / om
                    da2_de = (1.0 - a2) * (a + 2.0) / om
                    dp_de = -a * pw / om
                    dden_da = da0_da * a2 + a0 * da2_da \
                        - eps * eps * (pw + a * pw * t_log)
                    dden_de = da0_de * a2 + a0 * da2_de \
                        - a * (dp_de * eps * eps + 2.0 * eps * pw)
                    danew_da = (a1 * a1 + 2.0 * a * a1 * da1_da) / den \
                        - a * a1 * a1 * dden_da / (den * den)
                    danew_de = a * (2.0 * a1 * da1_de * den
                                    - a1 * a1 * dden_de) / (den * den)
                    dknew_dxi = a0 * a1 / den
                    dknew_da = xi * (da0_da * a1 + a0 * da1_da) / den \
                        - xi * a0 * a1 * dden_da / (den * den)
                    dknew_de = xi * ((da0_de * a1 + a0 * da1_de) * den
                                     - a0 * a1 * dden_de) / (den * den)
                    ga = va * danew_da + vk * dknew_da
                    geps = va * danew_de + vk * dknew_de
                    gxi = vk * dknew_dxi - geps / xi_p
                    gxip = geps * xi / (xi_p * xi_p)
                    gk += gxi + gxip
                    gph += gxi * s0 + gxip * s1
                    gs0 += gxi * ph
                    gs1 += gxip * ph

            # likelihood-term partials (zero when the term was clamped)
            if d[t] == 0:
                if not tail0[t]:
                    logl = -a * l0
                    if logl >= LOG_LIK_FLOOR:
                        ga += -l0
                        glu0 = -a / (1.0 + u0)
                        gph += glu0 * s0 / k
                        gs0 += glu0 * ph / k
                        gk += glu0 * (-u0 / k)
            else:
                if tail0[t]:
                    pass
                elif tail1[t]:
                    logl = -a * l0
                    if logl >= LOG_LIK_FLOOR:
                        ga += -l0
                        glu0 = -a / (1.0 + u0)
                        gph += glu0 * s0 / k
                        gs0 += glu0 * ph / k
                        gk += glu0 * (-u0 / k)
                else:
                    s1 = cum[s1_idx[t]]
                    u1 = ph * s1 / k
                    l1 = math.log1p(u1)
                    du = ph * (s1 - s0) / k
                    diff = -a * math.log1p(du / (1.0 + u0))
                    q = -math.expm1(diff)
                    if q > 0.0:
                        logl = -a * l0 + math.log(q)
                        if logl >= LOG_LIK_FLOOR:
                            big_g = (q - 1.0) / q
                            ga += -l0 - big_g * (l1 - l0)
                            glu0 = (big_g - 1.0) * a / (1.0 + u0)
                            glu1 = -big_g * a / (1.0 + u1)
                            gph += glu0 * s0 / k + glu1 * s1 / k
                            gs0 += glu0 * ph / k
                            gs1 += glu1 * ph / k
                            gk += glu0 * (-u0 / k) + glu1 * (-u1 / k)

            g_phi[t] = gph
            g_cum[s0_idx[t]] += gs0
            g_cum[s1_idx[t]] += gs1
            va = ga
            vk = gk

        g_alpha += va
        g_kappa += vk

    return ll, g_phi, g_cum, g_alpha, g_kappa, clamps
