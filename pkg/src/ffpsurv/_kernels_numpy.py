"""Pure-numpy fallback for the panel likelihood kernels.

Processes one spell position at a time, vectorized across subjects; padded
index matrices come from the packed layout.  The recurrences and clamp rules
match ``_kernels_numba`` step for step.
"""

import numpy as np

from ._constants import EPS_LARGE, EPS_SMALL, LOG_LIK_FLOOR

# epsilon is clipped to this range before the general-update formulas run on
# lanes outside their regime (results there are discarded by the selects)
_EPS_CLIP_LO = 1e-12
_EPS_CLIP_HI = 1.0 - 1e-12


def _column(packed, phi, cum, j):
    """Gather spell-position-j data across subjects."""
    slot_j = packed.slot[:, j]
    act = packed.valid[:, j]
    s0i = packed.s0_idx[slot_j]
    s1i = packed.s1_idx[slot_j]
    return (
        act, slot_j, s0i, s1i,
        phi[slot_j], cum[s0i], cum[s1i],
        packed.d[slot_j] == 1,
        packed.tail0[slot_j] == 1,
        packed.tail1[slot_j] == 1,
    )


def _spell_terms(a, k, ph, s0, s1, is_event, t0, t1):
    """Per-lane likelihood pieces and update candidates."""
    u0 = ph * s0 / k
    l0 = np.log1p(u0)
    xi = k + ph * s0
    logl_cens = -a * l0

    du = ph * (s1 - s0) / k
    diff = -a * np.log1p(du / (1.0 + u0))
    q = -np.expm1(diff)
    q_pos = q > 0.0
    logl_event = logl_cens + np.log(np.where(q_pos, q, 1.0))

    xi_p = k + ph * s1
    eps = (xi_p - xi) / xi_p

    case_gen = is_event & ~t0 & ~t1
    logl_raw = np.where(case_gen, logl_event, logl_cens)
    bad = t0 | (case_gen & ~q_pos) | (logl_raw < LOG_LIK_FLOOR)
    logl = np.where(bad, LOG_LIK_FLOOR, logl_raw)
    return u0, l0, xi, xi_p, eps, q, case_gen, bad, logl


def _general_update(a, xi, eps):
    """Moment-matched update evaluated lane-wise on clipped epsilon."""
    epsc = np.clip(eps, _EPS_CLIP_LO, _EPS_CLIP_HI)
    t_log = np.log1p(-epsc)
    pw = np.exp(a * t_log)
    a0 = -np.expm1(a * t_log)
    a1 = -np.expm1((a + 1.0) * t_log)
    a2 = -np.expm1((a + 2.0) * t_log)
    den = a0 * a2 - a * pw * epsc * epsc
    den = np.where(den != 0.0, den, 1.0)
    return epsc, t_log, pw, a0, a1, a2, den


def panel_loglik_padded(packed, phi, cum, alpha, kappa):
    n = packed.n_subjects
    ll = np.zeros(n)
    clamps = 0
    a = np.full(n, alpha)
    k = np.full(n, kappa)
    for j in range(packed.max_spells):
        act, _, _, _, ph, s0, s1, is_event, t0, t1 = _column(packed, phi, cum, j)
        _, _, xi, xi_p, eps, _, case_gen, bad, logl = _spell_terms(
            a, k, ph, s0, s1, is_event, t0, t1)
        clamps += int(np.count_nonzero(bad & act))
        ll = ll + np.where(act, logl, 0.0)

        upd_small = case_gen & (eps <= EPS_SMALL)
        upd_large = case_gen & (eps >= EPS_LARGE)
        upd_gen = case_gen & ~upd_small & ~upd_large
        _, _, _, a0, a1, _, den = _general_update(a, xi, eps)
        a_gen = a * a1 * a1 / den
        k_gen = xi * a0 * a1 / den
        a_next = np.where(upd_gen, a_gen, np.where(upd_small, a + 1.0, a))
        k_next = np.where(upd_gen, k_gen,
                          np.where(upd_small, 0.5 * (xi + xi_p), xi))
        a = np.where(act, a_next, a)
        k = np.where(act, k_next, k)
    return ll, clamps


def panel_loglik_grad_padded(packed, phi, cum, alpha, kappa):
    n = packed.n_subjects
    jmax = packed.max_spells
    ll = np.zeros(n)
    g_phi = np.zeros(packed.n_spells)
    g_cum = np.zeros(cum.shape[0])
    clamps = 0

    a_states = np.empty((n, jmax + 1))
    k_states = np.empty((n, jmax + 1))
    a_states[:, 0] = alpha
    k_states[:, 0] = kappa

    # forward
    for j in range(jmax):
        a = a_states[:, j]
        k = k_states[:, j]
        act, _, _, _, ph, s0, s1, is_event, t0, t1 = _column(packed, phi, cum, j)
        _, _, xi, xi_p, eps, _, case_gen, bad, logl = _spell_terms(
            a, k, ph, s0, s1, is_event, t0, t1)
        clamps += int(np.count_nonzero(bad & act))
        ll = ll + np.where(act, logl, 0.0)

        upd_small = case_gen & (eps <= EPS_SMALL)
        upd_large = case_gen & (eps >= EPS_LARGE)
        upd_gen = case_gen & ~upd_small & ~upd_large
        _, _, _, a0, a1, _, den = _general_update(a, xi, eps)
        a_gen = a * a1 * a1 / den
        k_gen = xi * a0 * a1 / den
        a_next = np.where(upd_gen, a_gen, np.where(upd_small, a + 1.0, a))
        k_next = np.where(upd_gen, k_gen,
                          np.where(upd_small, 0.5 * (xi + xi_p), xi))
        a_states[:, j + 1] = np.where(act, a_next, a)
        k_states[:, j + 1] = np.where(act, k_next, k)

    # backward
    va = np.zeros(n)
    vk = np.zeros(n)
    for j in range(jmax - 1, -1, -1):
        a = a_states[:, j]
        k = k_states[:, j]
        act, slot_j, s0i, s1i, ph, s0, s1, is_event, t0, t1 = _column(
            packed, phi, cum, j)
        u0, l0, xi, xi_p, eps, q, case_gen, bad, _ = _spell_terms(
            a, k, ph, s0, s1, is_event, t0, t1)

        upd_small = case_gen & (eps <= EPS_SMALL)
        upd_large = case_gen & (eps >= EPS_LARGE)
        upd_gen = case_gen & ~upd_small & ~upd_large
        m_identity = ~case_gen | upd_large

        ga = va.copy()
        gk = np.zeros(n)
        gph = np.zeros(n)
        gs0 = np.zeros(n)
        gs1 = np.zeros(n)

        gk += np.where(m_identity, vk, 0.0)
        gph += np.where(m_identity, vk * s0, 0.0)
        gs0 += np.where(m_identity, vk * ph, 0.0)

        gk += np.where(upd_small, vk, 0.0)
        gph += np.where(upd_small, vk * 0.5 * (s0 + s1), 0.0)
        gs0 += np.where(upd_small, vk * 0.5 * ph, 0.0)
        gs1 += np.where(upd_small, vk * 0.5 * ph, 0.0)

        epsc, t_log, pw, a0, a1, a2, den = _general_update(a, xi, eps)
        om = 1.0 - epsc
        da0_da = -(1.0 - a0) * t_log
        da1_da = -(1.0 - a1) * t_log
        da2_da = -(1.0 - a2) * t_log
        da0_de = (1.0 - a0) * a / om
        da1_de = (1.0 - a1) * (a + 1.0) / om
        da2_de = (1.0 - a2) * (a + 2.0) / om
        dp_de = -a * pw / om
        dden_da = da0_da * a2 + a0 * da2_da - epsc * epsc * (pw + a * pw * t_log)
        dden_de = da0_de * a2 + a0 * da2_de - a * (dp_de * epsc * epsc + 2.0 * epsc * pw)
        danew_da = (a1 * a1 + 2.0 * a * a1 * da1_da) / den \
            - a * a1 * a1 * dden_da / (den * den)
        danew_de = a * (2.0 * a1 * da1_de * den - a1 * a1 * dden_de) / (den * den)
        dknew_dxi = a0 * a1 / den
        dknew_da = xi * (da0_da * a1 + a0 * da1_da) / den \
            - xi * a0 * a1 * dden_da / (den * den)
        dknew_de = xi * ((da0_de * a1 + a0 * da1_de) * den
                         - a0 * a1 * dden_de) / (den * den)
        geps = va * danew_de + vk * dknew_de
        gxi = vk * dknew_dxi - geps / xi_p
        gxip = geps * xi / (xi_p * xi_p)
        ga = np.where(upd_gen, va * danew_da + vk * dknew_da, ga)
        gk += np.where(upd_gen, gxi + gxip, 0.0)
        gph += np.where(upd_gen, gxi * s0 + gxip * s1, 0.0)
        gs0 += np.where(upd_gen, gxi * ph, 0.0)
        gs1 += np.where(upd_gen, gxip * ph, 0.0)

        # likelihood-term partials: survivor-only shape for censored spells and
        # tail events, two-term shape for in-grid events; none when clamped
        m_cens = (~is_event | (is_event & ~t0 & t1)) & ~bad
        glu0 = -a / (1.0 + u0)
        ga += np.where(m_cens, -l0, 0.0)
        gph += np.where(m_cens, glu0 * s0 / k, 0.0)
        gs0 += np.where(m_cens, glu0 * ph / k, 0.0)
        gk += np.where(m_cens, glu0 * (-u0 / k), 0.0)

        m_gen = case_gen & ~bad
        u1 = ph * s1 / k
        l1 = np.log1p(u1)
        q_safe = np.where(q > 0.0, q, 1.0)
        big_g = (q_safe - 1.0) / q_safe
        glu0g = (big_g - 1.0) * a / (1.0 + u0)
        glu1 = -big_g * a / (1.0 + u1)
        ga += np.where(m_gen, -l0 - big_g * (l1 - l0), 0.0)
        gph += np.where(m_gen, glu0g * s0 / k + glu1 * s1 / k, 0.0)
        gs0 += np.where(m_gen, glu0g * ph / k, 0.0)
        gs1 += np.where(m_gen, glu1 * ph / k, 0.0)
        gk += np.where(m_gen, glu0g * (-u0 / k) + glu1 * (-u1 / k), 0.0)

        g_phi[slot_j[act]] = gph[act]
        np.add.at(g_cum, s0i[act], gs0[act])
        np.add.at(g_cum, s1i[act], gs1[act])
        va = np.where(act, ga, va)
        vk = np.where(act, gk, vk)

    return ll, g_phi, g_cum, float(va.sum()), float(vk.sum()), clamps
