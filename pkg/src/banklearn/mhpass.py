"""Compiled inner loop for per-frequency Metropolis updates (regression).

One call runs a sequence of single-frequency proposals against the
marginal-likelihood state of the conjugate linear model. Replacing
frequency j swaps a cosine and a sine column of the design, which
perturbs the Gram matrix Lambda_n by a symmetric rank-4 matrix

    U C U^T,   U = [e_j, e_{M+j}, g_c, g_s],   C = [[0, I2], [I2, 0]],

so a proposal is scored without touching the Cholesky factor:

    logdet Lambda' = logdet Lambda + logdet(C + T^T T),
    quad' = w'.w' - h^T (C + T^T T)^{-1} h,

with T = R^{-T} U (two of the four solves start sparse), w' the
forward-substituted right-hand side, h = T^T w'. Only accepted moves
rotate R in place via `apply_swap4`; rejected ones cost four triangular
solves and one thin matrix product. A failed rotation or a non-positive
4x4 determinant falls back to a full refactorization (counted, so the
caller can log it).

State (r, eta, w_solve, phi_t, freqs) is mutated in place. The caller
is expected to refresh r / eta / w_solve / logdet from scratch between
sweeps; accumulated rotation roundoff then never survives a sweep.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .lowrank import apply_swap4, solve_rt2, solve_rt_inplace, solve_rt_unit

__all__ = ["mh_pass_regression", "STATUS_OK", "STATUS_DIVERGED"]

STATUS_OK = 0
STATUS_DIVERGED = 1

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


@njit(cache=True)
def _lu4(b, rhs, z):
    """Partially pivoted LU of a 4x4 matrix; solves b z = rhs in place.

    Returns (ok, logabsdet) where ok is False when the determinant is
    not strictly positive.
    """
    a = b.copy()
    piv_sign = 1.0
    for col in range(4):
        p = col
        big = abs(a[col, col])
        for i in range(col + 1, 4):
            v = abs(a[i, col])
            if v > big:
                big = v
                p = i
        if big == 0.0:
            return False, 0.0
        if p != col:
            piv_sign = -piv_sign
            for l in range(4):
                tmp = a[col, l]
                a[col, l] = a[p, l]
                a[p, l] = tmp
            tmp = rhs[col]
            rhs[col] = rhs[p]
            rhs[p] = tmp
        inv = 1.0 / a[col, col]
        for i in range(col + 1, 4):
            f = a[i, col] * inv
            a[i, col] = f
            for l in range(col + 1, 4):
                a[i, l] -= f * a[col, l]
            rhs[i] -= f * rhs[col]
    det_sign = piv_sign
    logabsdet = 0.0
    for i in range(4):
        d = a[i, i]
        if d < 0.0:
            det_sign = -det_sign
        logabsdet += math.log(abs(d))
    if det_sign <= 0.0:
        return False, logabsdet
    for i in range(3, -1, -1):
        acc = rhs[i]
        for l in range(i + 1, 4):
            acc -= a[i, l] * z[l]
        z[i] = acc / a[i, i]
    return True, logabsdet


@njit(cache=True)
def mh_pass_regression(
    r,
    eta,
    w_solve,
    phi_t,
    freqs,
    x,
    y,
    comp_mu,
    comp_chol,
    z_assign,
    order,
    znorm,
    u_log,
    out_w,
    record,
    cur_logev,
    logdet,
    a_n,
    b0,
    yty,
    c0,
    log_const,
    lam0,
):
    n_freq = freqs.shape[0]
    d = freqs.shape[1]
    n = x.shape[0]
    p = 2 * n_freq
    inv_sqrt_m = 1.0 / math.sqrt(n_freq)

    omega = np.empty(d)
    d_c = np.empty(n)
    d_s = np.empty(n)
    nc = np.empty(n)
    ns = np.empty(n)
    oc = np.empty(n)
    os_ = np.empty(n)
    dmat = np.empty((n, 2))
    gc = np.empty(p)
    gs = np.empty(p)
    t0 = np.empty(p)
    t1 = np.empty(p)
    wp = np.empty(p)
    uc = np.empty(p)
    us = np.empty(p)
    vc = np.empty(p)
    vs = np.empty(p)
    bmat = np.empty((4, 4))
    h4 = np.empty(4)
    z4 = np.empty(4)

    n_accept = 0
    n_fallback = 0

    for step in range(order.shape[0]):
        j = order[step]
        jm = n_freq + j
        k = z_assign[j]
        for l in range(d):
            acc = comp_mu[k, l]
            for l2 in range(l + 1):
                acc += comp_chol[k, l, l2] * znorm[step, l2]
            omega[l] = acc

        for i in range(n):
            proj = 0.0
            for l in range(d):
                proj += x[i, l] * omega[l]
            ncv = math.cos(proj) * inv_sqrt_m
            nsv = math.sin(proj) * inv_sqrt_m
            nc[i] = ncv
            ns[i] = nsv
            dc = ncv - phi_t[j, i]
            ds = nsv - phi_t[jm, i]
            d_c[i] = dc
            d_s[i] = ds
            dmat[i, 0] = dc
            dmat[i, 1] = ds

        gmat = np.dot(phi_t, dmat)
        cc = 0.0
        ss = 0.0
        cs = 0.0
        dyc = 0.0
        dys = 0.0
        for i in range(n):
            dc = d_c[i]
            ds = d_s[i]
            cc += dc * dc
            ss += ds * ds
            cs += dc * ds
            dyc += dc * y[i]
            dys += ds * y[i]

        for i in range(p):
            gc[i] = gmat[i, 0]
            gs[i] = gmat[i, 1]
        gc[j] += 0.5 * cc
        gs[j] += cs
        gs[jm] += 0.5 * ss

        solve_rt_unit(r, j, t0)
        solve_rt_unit(r, jm, t1)
        t2 = gc.copy()
        t3 = gs.copy()
        solve_rt2(r, t2, t3)

        for i in range(p):
            wp[i] = w_solve[i] + dyc * t0[i] + dys * t1[i]

        b00 = 0.0
        b01 = 0.0
        b02 = 0.0
        b03 = 0.0
        b11 = 0.0
        b12 = 0.0
        b13 = 0.0
        b22 = 0.0
        b23 = 0.0
        b33 = 0.0
        h0 = 0.0
        h1 = 0.0
        h2 = 0.0
        h3 = 0.0
        for i in range(p):
            a0v = t0[i]
            a1v = t1[i]
            a2v = t2[i]
            a3v = t3[i]
            wv = wp[i]
            b00 += a0v * a0v
            b01 += a0v * a1v
            b02 += a0v * a2v
            b03 += a0v * a3v
            b11 += a1v * a1v
            b12 += a1v * a2v
            b13 += a1v * a3v
            b22 += a2v * a2v
            b23 += a2v * a3v
            b33 += a3v * a3v
            h0 += a0v * wv
            h1 += a1v * wv
            h2 += a2v * wv
            h3 += a3v * wv

        bmat[0, 0] = b00
        bmat[0, 1] = b01
        bmat[0, 2] = b02 + 1.0
        bmat[0, 3] = b03
        bmat[1, 0] = b01
        bmat[1, 1] = b11
        bmat[1, 2] = b12
        bmat[1, 3] = b13 + 1.0
        bmat[2, 0] = b02 + 1.0
        bmat[2, 1] = b12
        bmat[2, 2] = b22
        bmat[2, 3] = b23
        bmat[3, 0] = b03
        bmat[3, 1] = b13 + 1.0
        bmat[3, 2] = b23
        bmat[3, 3] = b33
        h4[0] = h0
        h4[1] = h1
        h4[2] = h2
        h4[3] = h3

        ok, logdet_b = _lu4(bmat, h4, z4)

        accept = False
        use_fallback = not ok
        cand_logev = 0.0
        cand_logdet = 0.0
        if ok:
            wpwp = 0.0
            for i in range(p):
                wpwp += wp[i] * wp[i]
            # h4 was consumed by the LU; the pristine h lives in h0..h3
            quad = wpwp - (h0 * z4[0] + h1 * z4[1] + h2 * z4[2] + h3 * z4[3])
            b_n = b0 + 0.5 * (yty + c0 - quad)
            if not np.isfinite(b_n) or b_n <= 0.0:
                return STATUS_DIVERGED, n_accept, n_fallback, cur_logev, logdet
            cand_logdet = logdet + logdet_b
            cand_logev = log_const - a_n * math.log(b_n) - 0.5 * cand_logdet
            if u_log[step] < cand_logev - cur_logev:
                for i in range(p):
                    half_gc = gc[i] * _INV_SQRT2
                    half_gs = gs[i] * _INV_SQRT2
                    uc[i] = half_gc
                    vc[i] = half_gc
                    us[i] = half_gs
                    vs[i] = half_gs
                uc[j] += _INV_SQRT2
                vc[j] -= _INV_SQRT2
                us[jm] += _INV_SQRT2
                vs[jm] -= _INV_SQRT2
                if apply_swap4(r, uc, us, vc, vs):
                    accept = True
                else:
                    use_fallback = True

        if use_fallback:
            # Rare numerical escape hatch: score (and on accept, commit)
            # the proposal through a from-scratch factorization.
            n_fallback += 1
            for i in range(n):
                oc[i] = phi_t[j, i]
                os_[i] = phi_t[jm, i]
                phi_t[j, i] = nc[i]
                phi_t[jm, i] = ns[i]
            gram = np.dot(phi_t, np.ascontiguousarray(phi_t.T))
            for i in range(p):
                gram[i, i] += lam0
            lfac = np.linalg.cholesky(gram)
            r_cand = np.empty((p, p))
            cand_logdet = 0.0
            for i in range(p):
                for l in range(i):
                    r_cand[l, i] = lfac[i, l]
                    r_cand[i, l] = 0.0
                r_cand[i, i] = lfac[i, i]
                cand_logdet += 2.0 * math.log(lfac[i, i])
            for i in range(p):
                wp[i] = eta[i]
            wp[j] += dyc
            wp[jm] += dys
            solve_rt_inplace(r_cand, wp)
            wpwp = 0.0
            for i in range(p):
                wpwp += wp[i] * wp[i]
            b_n = b0 + 0.5 * (yty + c0 - wpwp)
            if not np.isfinite(b_n) or b_n <= 0.0:
                for i in range(n):
                    phi_t[j, i] = oc[i]
                    phi_t[jm, i] = os_[i]
                return STATUS_DIVERGED, n_accept, n_fallback, cur_logev, logdet
            cand_logev = log_const - a_n * math.log(b_n) - 0.5 * cand_logdet
            if u_log[step] < cand_logev - cur_logev:
                r[:, :] = r_cand
                accept = True
            else:
                for i in range(n):
                    phi_t[j, i] = oc[i]
                    phi_t[jm, i] = os_[i]

        if accept:
            n_accept += 1
            if not use_fallback:
                for i in range(n):
                    phi_t[j, i] = nc[i]
                    phi_t[jm, i] = ns[i]
            eta[j] += dyc
            eta[jm] += dys
            for l in range(d):
                freqs[j, l] = omega[l]
            logdet = cand_logdet
            cur_logev = cand_logev
            for i in range(p):
                w_solve[i] = eta[i]
            solve_rt_inplace(r, w_solve)

        if record:
            for l in range(d):
                out_w[step, l] = freqs[j, l]

    return STATUS_OK, n_accept, n_fallback, cur_logev, logdet
