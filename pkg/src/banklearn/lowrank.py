"""Rank-1 Cholesky updates for swapping design-matrix columns.

Replacing column j of a design Phi by a new column changes the Gram
matrix Lambda = Phi^T Phi + Lambda0 by a symmetric rank-2 matrix

    e_j g'^T + g' e_j^T = v+ v+^T - v- v-^T,
    g' = Phi^T (new - old) + (|new - old|^2 / 2) e_j,
    v+- = (e_j +- g') / sqrt(2),

i.e. one rank-1 update plus one rank-1 downdate of the Cholesky factor.
A frequency swap touches a cosine and a sine column, so four rank-1
operations; `apply_swap4` interleaves their Givens/hyperbolic rotations
column by column so the factor is streamed through memory once.

Factors here are UPPER triangular (Lambda = R^T R), kept C-contiguous so
the inner loops run over contiguous rows. All jitted routines mutate
their arguments in place; downdates return False when roundoff makes the
factor lose positive definiteness (the caller falls back to a full
refactorization).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

__all__ = [
    "chol_update",
    "chol_downdate",
    "apply_swap4",
    "solve_rt",
    "solve_rt_inplace",
    "solve_rt_unit",
    "solve_rt2",
    "solve_r",
    "chol_update_ref",
    "chol_downdate_ref",
]


@njit(cache=True)
def chol_update(r, x):
    """In-place update R <- chol(R^T R + x x^T). Consumes x."""
    n = r.shape[0]
    for k in range(n):
        rkk = r[k, k]
        xk = x[k]
        rad = math.sqrt(rkk * rkk + xk * xk)
        c = rad / rkk
        ic = rkk / rad
        s = xk / rkk
        r[k, k] = rad
        for i in range(k + 1, n):
            t = (r[k, i] + s * x[i]) * ic
            x[i] = c * x[i] - s * t
            r[k, i] = t


@njit(cache=True)
def chol_downdate(r, x):
    """In-place downdate R <- chol(R^T R - x x^T). Consumes x.

    Returns False (factor left corrupt) if the result is not PD.
    """
    n = r.shape[0]
    for k in range(n):
        rkk = r[k, k]
        xk = x[k]
        h = rkk * rkk - xk * xk
        if h <= 0.0:
            return False
        rad = math.sqrt(h)
        c = rad / rkk
        ic = rkk / rad
        s = xk / rkk
        r[k, k] = rad
        for i in range(k + 1, n):
            t = (r[k, i] - s * x[i]) * ic
            x[i] = c * x[i] - s * t
            r[k, i] = t
    return True


@njit(cache=True)
def apply_swap4(r, x1, x2, x3, x4):
    """update(x1), update(x2), downdate(x3), downdate(x4), column-fused.

    Arithmetic is element-for-element identical to running the four
    rank-1 operations sequentially; fusing just streams R once. Consumes
    the four vectors; returns False on downdate failure (R corrupt).
    """
    n = r.shape[0]
    for k in range(n):
        rkk = r[k, k]

        a = x1[k]
        rad = math.sqrt(rkk * rkk + a * a)
        c1 = rad / rkk
        i1 = rkk / rad
        s1 = a / rkk
        rkk = rad

        a = x2[k]
        rad = math.sqrt(rkk * rkk + a * a)
        c2 = rad / rkk
        i2 = rkk / rad
        s2 = a / rkk
        rkk = rad

        a = x3[k]
        h = rkk * rkk - a * a
        if h <= 0.0:
            return False
        rad = math.sqrt(h)
        c3 = rad / rkk
        i3 = rkk / rad
        s3 = a / rkk
        rkk = rad

        a = x4[k]
        h = rkk * rkk - a * a
        if h <= 0.0:
            return False
        rad = math.sqrt(h)
        c4 = rad / rkk
        i4 = rkk / rad
        s4 = a / rkk
        r[k, k] = rad

        for i in range(k + 1, n):
            t = r[k, i]
            t = (t + s1 * x1[i]) * i1
            x1[i] = c1 * x1[i] - s1 * t
            t = (t + s2 * x2[i]) * i2
            x2[i] = c2 * x2[i] - s2 * t
            t = (t - s3 * x3[i]) * i3
            x3[i] = c3 * x3[i] - s3 * t
            t = (t - s4 * x4[i]) * i4
            x4[i] = c4 * x4[i] - s4 * t
            r[k, i] = t
    return True


@njit(cache=True)
def solve_rt(r, b):
    """Solve R^T w = b (forward substitution against an upper factor)."""
    n = r.shape[0]
    w = b.copy()
    for j in range(n):
        w[j] /= r[j, j]
        wj = w[j]
        for i in range(j + 1, n):
            w[i] -= wj * r[j, i]
    return w


@njit(cache=True)
def solve_rt_inplace(r, w):
    """Forward substitution for R^T w = b with b preloaded into w."""
    n = r.shape[0]
    for j in range(n):
        w[j] /= r[j, j]
        wj = w[j]
        for i in range(j + 1, n):
            w[i] -= wj * r[j, i]


@njit(cache=True)
def solve_rt_unit(r, j, out):
    """Solve R^T w = e_j into out; entries before j are exactly zero."""
    n = r.shape[0]
    out[:] = 0.0
    out[j] = 1.0
    for k in range(j, n):
        out[k] /= r[k, k]
        wk = out[k]
        for i in range(k + 1, n):
            out[i] -= wk * r[k, i]


@njit(cache=True)
def solve_rt2(r, w1, w2):
    """Forward substitution for two right-hand sides, streaming R once.

    w1 and w2 hold b1 and b2 on entry and the solutions on exit.
    """
    n = r.shape[0]
    for j in range(n):
        rjj = r[j, j]
        w1[j] /= rjj
        w2[j] /= rjj
        a1 = w1[j]
        a2 = w2[j]
        for i in range(j + 1, n):
            rji = r[j, i]
            w1[i] -= a1 * rji
            w2[i] -= a2 * rji


@njit(cache=True)
def solve_r(r, b):
    """Solve R x = b (back substitution)."""
    n = r.shape[0]
    x = b.copy()
    for i in range(n - 1, -1, -1):
        acc = x[i]
        for j in range(i + 1, n):
            acc -= r[i, j] * x[j]
        x[i] = acc / r[i, i]
    return x


def chol_update_ref(r, x):
    """Pure-numpy twin of chol_update, for algorithm verification."""
    r = r.copy()
    x = x.copy()
    n = r.shape[0]
    for k in range(n):
        rad = math.sqrt(r[k, k] ** 2 + x[k] ** 2)
        c = rad / r[k, k]
        ic = r[k, k] / rad
        s = x[k] / r[k, k]
        r[k, k] = rad
        r[k, k + 1 :] = (r[k, k + 1 :] + s * x[k + 1 :]) * ic
        x[k + 1 :] = c * x[k + 1 :] - s * r[k, k + 1 :]
    return r


def chol_downdate_ref(r, x):
    """Pure-numpy twin of chol_downdate. Returns None on failure."""
    r = r.copy()
    x = x.copy()
    n = r.shape[0]
    for k in range(n):
        h = r[k, k] ** 2 - x[k] ** 2
        if h <= 0.0:
            return None
        rad = math.sqrt(h)
        c = rad / r[k, k]
        ic = r[k, k] / rad
        s = x[k] / r[k, k]
        r[k, k] = rad
        r[k, k + 1 :] = (r[k, k + 1 :] - s * x[k + 1 :]) * ic
        x[k + 1 :] = c * x[k + 1 :] - s * r[k, k + 1 :]
    return r
