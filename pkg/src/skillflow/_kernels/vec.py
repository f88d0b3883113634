"""Numpy batch kernels for the fallback backend.

These vectorize over paths and mirror the scalar kernels operation for
operation, so results agree bit-for-bit with the compiled backend.
"""

from __future__ import annotations

import numpy as np

from .common import ASYMMETRIC, HIGH, LOW, MISPERCEIVED, NOAI, NON_FINITE, OK, SADDLE, STEP_TOO_LARGE, UNRESOLVED


def skill_bracket(par, th, p):
    a = 1.0 - th
    den = a + par[2] * (th - par[3])
    safe = (p != 0.0) & (den != 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(safe, den * (a / den - p), a)


def drift(code, par, th, p):
    a = 1.0 - th
    if code == NOAI:
        return th * a * a, np.zeros_like(th)
    dth = th * a * skill_bracket(par, th, p)
    g = a * a - par[4]
    if code == MISPERCEIVED:
        g = g + (1.0 - p) * (par[4] - par[5])
    dp = par[1] * p * (1.0 - p) * g
    if code == ASYMMETRIC:
        dp = np.where(dp < 0.0, par[5] * dp, dp)
    return dth, dp


def rk4_step(code, par, th, p, h):
    k1t, k1p = drift(code, par, th, p)
    k2t, k2p = drift(code, par, th + 0.5 * h * k1t, p + 0.5 * h * k1p)
    k3t, k3p = drift(code, par, th + 0.5 * h * k2t, p + 0.5 * h * k2p)
    k4t, k4p = drift(code, par, th + h * k3t, p + h * k3p)
    s = h / 6.0
    return (
        th + s * (k1t + 2.0 * k2t + 2.0 * k3t + k4t),
        p + s * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
    )


def settle(th, p, tol):
    """Per-path status plus the clamped state."""
    status = np.full(th.shape, OK, dtype=np.int64)
    finite = np.isfinite(th) & np.isfinite(p)
    status[~finite] = NON_FINITE
    excess = np.maximum(np.maximum(-th, th - 1.0), np.maximum(-p, p - 1.0))
    status[finite & (excess > tol)] = STEP_TOO_LARGE
    return status, np.clip(th, 0.0, 1.0), np.clip(p, 0.0, 1.0)


def label_state(code, par, th, p, cert, eps):
    td = par[3]
    lab = np.full(th.shape, -1, dtype=np.int64)
    if code != NOAI:
        lab[np.maximum(np.abs(th - td), np.abs(p - 1.0)) <= eps] = LOW
    lab[np.maximum(np.abs(th - 1.0), np.abs(p)) <= eps] = HIGH
    if cert[0] == 0.0:
        return lab
    open_ = lab < 0
    if code == NOAI:
        lab[open_ & (th > 0.0)] = HIGH
        return lab
    b = skill_bracket(par, th, p)
    hi = open_ & (th > cert[1]) & ((th == 1.0) | (b > 0.0))
    lab[hi] = HIGH
    open_ &= ~hi
    lo = open_ & (td < th) & (th < cert[2]) & (b < 0.0)
    lab[lo] = LOW
    open_ &= ~lo
    if td == 0.0 and cert[2] > 0.0:
        lab[open_ & (th == 0.0) & (p > 0.0)] = LOW
    return lab


def classify_batch(code, par, th0, p0, h, n_max, tol, cert, eps, saddle, labels, steps, status):
    th = np.array(th0, dtype=np.float64)
    p = np.array(p0, dtype=np.float64)
    labels[:] = UNRESOLVED
    steps[:] = 0
    status[:] = OK
    active = np.arange(th.shape[0])
    undecided = []  # indices that stopped without a label
    k = 0
    while active.size:
        t, q = th[active], p[active]
        lab = label_state(code, par, t, q, cert, eps)
        done = lab >= 0
        labels[active[done]] = lab[done]
        steps[active[done]] = k
        active = active[~done]
        if not active.size:
            break
        if k == n_max:
            steps[active] = k
            undecided.append(active)
            break
        t, q = th[active], p[active]
        nt, nq = rk4_step(code, par, t, q, h)
        st, nt, nq = settle(nt, nq, tol)
        bad = st != OK
        status[active[bad]] = st[bad]
        steps[active[bad]] = k
        k += 1
        still = (nt == t) & (nq == q) & ~bad
        steps[active[still]] = k
        undecided.append(active[still])
        keep = ~bad & ~still
        th[active[keep]] = nt[keep]
        p[active[keep]] = nq[keep]
        active = active[keep]
    if undecided and saddle[2] > 0.0:
        idx = np.concatenate(undecided)
        near = np.maximum(np.abs(th[idx] - saddle[0]), np.abs(p[idx] - saddle[1])) <= saddle[2]
        labels[idx[near]] = SADDLE


def sde_advance(code, par, th, p, normals, h, sigma):
    sq = np.sqrt(h)
    kappa = par[1]
    for k in range(normals.shape[0]):
        dx, dy = drift(code, par, th, p)
        y = p + h * dy + kappa * p * (1.0 - p) * sigma * sq * normals[k]
        x = th + h * dx
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            return NON_FINITE
        th[:] = np.minimum(np.maximum(x, 0.0), 1.0)
        p[:] = np.minimum(np.maximum(y, 0.0), 1.0)
    return OK
