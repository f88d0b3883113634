"""Scalar kernels written once and compiled by numba or run as plain Python.

:func:`build` takes a decorator. The numba backend passes ``njit``; the
fallback passes the identity, so both backends execute the same arithmetic
in the same order.
"""

from __future__ import annotations

import math
from types import SimpleNamespace

import numpy as np

from .common import (
    ASYMMETRIC,
    DRAW_DETECTION,
    DRAW_JAGGED,
    HIGH,
    LOW,
    MISPERCEIVED,
    NOAI,
    NON_FINITE,
    NOT_REACHED,
    OK,
    OVERFLOW,
    SADDLE,
    STEP_TOO_LARGE,
    UNRESOLVED,
)


def build(jit):
    @jit
    def skill_bracket(par, th, p):
        # (1-p)(1-th) + delta*p*(td-th), written as den*(n - p) with n the
        # p-nullcline of the skill equation, so the bracket is exactly zero
        # wherever p was computed from the same nullcline expression
        a = 1.0 - th
        if p == 0.0:
            return a
        den = a + par[2] * (th - par[3])
        if den == 0.0:
            return a
        return den * (a / den - p)

    @jit
    def drift(code, par, th, p):
        a = 1.0 - th
        if code == NOAI:
            return th * a * a, 0.0
        dth = th * a * skill_bracket(par, th, p)
        g = a * a - par[4]
        if code == MISPERCEIVED:
            # blend of perceived and true gaps; exact when the two losses agree
            g = g + (1.0 - p) * (par[4] - par[5])
        dp = par[1] * p * (1.0 - p) * g
        if code == ASYMMETRIC and dp < 0.0:
            dp = par[5] * dp
        return dth, dp

    @jit
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

    @jit
    def clamp_excess(x):
        if x < 0.0:
            return 0.0, -x
        if x > 1.0:
            return 1.0, x - 1.0
        return x, 0.0

    @jit
    def settle(th, p, tol):
        # finite check and clamp to the unit square; status, th, p
        if not (math.isfinite(th) and math.isfinite(p)):
            return NON_FINITE, th, p
        th, e1 = clamp_excess(th)
        p, e2 = clamp_excess(p)
        if e1 > tol or e2 > tol:
            return STEP_TOO_LARGE, th, p
        return OK, th, p

    @jit
    def rk4_path(code, par, th, p, h, n_steps, stride, tol, out_th, out_p):
        """Fixed-step RK4; records step 0, every ``stride``-th step and the last one.

        Returns (status, records written, steps completed).
        """
        out_th[0] = th
        out_p[0] = p
        j = 1
        for k in range(1, n_steps + 1):
            th, p = rk4_step(code, par, th, p, h)
            status, th, p = settle(th, p, tol)
            if status != OK:
                return status, j, k - 1
            if k % stride == 0 or k == n_steps:
                out_th[j] = th
                out_p[j] = p
                j += 1
        return OK, j, n_steps

    @jit
    def label_state(code, par, th, p, cert, eps):
        """Limit label certified at (th, p), or -1 when nothing is certain yet.

        ``cert = [enabled, th_hi, th_lo]``. Above ``th_hi`` delegation strictly
        falls and below ``th_lo`` it strictly rises; combined with the sign of
        the skill bracket these cut out forward-invariant regions that drain
        into the high- and low-skill sinks respectively.
        """
        td = par[3]
        if max(abs(th - 1.0), abs(p)) <= eps:
            return HIGH
        if code != NOAI and max(abs(th - td), abs(p - 1.0)) <= eps:
            return LOW
        if cert[0] == 0.0:
            return -1
        if code == NOAI:
            return HIGH if th > 0.0 else -1
        if th > cert[1] and (th == 1.0 or skill_bracket(par, th, p) > 0.0):
            return HIGH
        if td < th < cert[2] and skill_bracket(par, th, p) < 0.0:
            return LOW
        if th == 0.0 and td == 0.0 and p > 0.0 and cert[2] > 0.0:
            return LOW
        return -1

    @jit
    def classify_one(code, par, th, p, h, n_max, tol, cert, eps, saddle):
        """Integrate until a label is certified. Returns (label, steps, status).

        ``saddle = [theta, p, radius]``; radius <= 0 disables the saddle test.
        """
        k = 0
        while True:
            lab = label_state(code, par, th, p, cert, eps)
            if lab >= 0:
                return lab, k, OK
            if k == n_max:
                break
            nth, npp = rk4_step(code, par, th, p, h)
            status, nth, npp = settle(nth, npp, tol)
            if status != OK:
                return UNRESOLVED, k, status
            k += 1
            if nth == th and npp == p:
                break  # exactly stationary
            th = nth
            p = npp
        if saddle[2] > 0.0 and max(abs(th - saddle[0]), abs(p - saddle[1])) <= saddle[2]:
            return SADDLE, k, OK
        return UNRESOLVED, k, OK

    @jit
    def classify_batch(code, par, th0, p0, h, n_max, tol, cert, eps, saddle, labels, steps, status):
        for i in range(th0.shape[0]):
            labels[i], steps[i], status[i] = classify_one(
                code, par, th0[i], p0[i], h, n_max, tol, cert, eps, saddle
            )

    @jit
    def trace(code, par, th, p, h, n_max, spacing, target_th, target_p, tol, clamp_tol, out_th, out_p):
        """Integrate with step ``h`` (negative for reversed time) toward a target corner.

        Records a node whenever the state has moved ``spacing`` in max-norm
        since the previous node. Returns (status, nodes written).
        """
        out_th[0] = th
        out_p[0] = p
        j = 1
        lt = th
        lp = p
        cap = out_th.shape[0]
        for _ in range(n_max):
            nth, npp = rk4_step(code, par, th, p, h)
            status, nth, npp = settle(nth, npp, clamp_tol)
            if status != OK:
                return status, j
            if nth == th and npp == p:
                return NOT_REACHED, j
            th = nth
            p = npp
            done = max(abs(th - target_th), abs(p - target_p)) <= tol
            if done or max(abs(th - lt), abs(p - lp)) >= spacing:
                if j == cap:
                    return OVERFLOW, j
                out_th[j] = th
                out_p[j] = p
                j += 1
                lt = th
                lp = p
            if done:
                return OK, j
        return NOT_REACHED, j

    @jit
    def sde_advance(code, par, th, p, normals, h, sigma):
        """Euler-Maruyama over ``normals.shape[0]`` steps for every path, in place."""
        sq = math.sqrt(h)
        kappa = par[1]
        n_paths = th.shape[0]
        for k in range(normals.shape[0]):
            for i in range(n_paths):
                x = th[i]
                y = p[i]
                dx, dy = drift(code, par, x, y)
                y = y + h * dy + kappa * y * (1.0 - y) * sigma * sq * normals[k, i]
                x = x + h * dx
                if not (math.isfinite(x) and math.isfinite(y)):
                    return NON_FINITE
                th[i] = min(max(x, 0.0), 1.0)
                p[i] = min(max(y, 0.0), 1.0)
        return OK

    @jit
    def sde_path(code, par, th, p, normals, h, sigma, stride, out_th, out_p):
        sq = math.sqrt(h)
        kappa = par[1]
        n = normals.shape[0]
        out_th[0] = th
        out_p[0] = p
        j = 1
        for k in range(n):
            dx, dy = drift(code, par, th, p)
            y = p + h * dy + kappa * p * (1.0 - p) * sigma * sq * normals[k]
            x = th + h * dx
            if not (math.isfinite(x) and math.isfinite(y)):
                return NON_FINITE, j, k
            th = min(max(x, 0.0), 1.0)
            p = min(max(y, 0.0), 1.0)
            if (k + 1) % stride == 0 or k + 1 == n:
                out_th[j] = th
                out_p[j] = p
                j += 1
        return OK, j, n

    @jit
    def discrete_path(code, mode, par, th, p, eta, uniforms, support, cumw, tol, out_th, out_p, out_x):
        """Bernoulli-delegation learner; ``uniforms[k] = (u_delegate, u_ai)``.

        Returns (status, steps completed).
        """
        two_eta = 2.0 * eta
        kappa = par[1]
        delta = par[2]
        td = par[3]
        n = uniforms.shape[0]
        out_th[0] = th
        out_p[0] = p
        last = support.shape[0] - 1
        for k in range(n):
            x = 0
            if code != NOAI and uniforms[k, 0] < p:
                x = 1
            a = 1.0 - th
            if x == 0:
                bracket = a
            else:
                bracket = delta * (td - th)
            nth = th + two_eta * th * a * bracket
            if code == NOAI:
                npp = p
            else:
                if x == 1 and mode == DRAW_JAGGED:
                    idx = np.searchsorted(cumw, uniforms[k, 1], side="right")
                    s = support[min(idx, last)]
                    ai = (1.0 - s) * (1.0 - s)
                elif x == 1 and mode == DRAW_DETECTION:
                    e = 1.0 - par[0]
                    ai = abs(e) if uniforms[k, 1] < par[5] else e * e
                elif x == 0 and code == MISPERCEIVED:
                    ai = par[5]
                else:
                    ai = par[4]
                dp = kappa * p * (1.0 - p) * (a * a - ai)
                if code == ASYMMETRIC and dp < 0.0:
                    dp = par[5] * dp
                npp = p + two_eta * dp
            status, th, p = settle(nth, npp, tol)
            if status != OK:
                return status, k
            out_th[k + 1] = th
            out_p[k + 1] = p
            out_x[k] = x
        return OK, n

    return SimpleNamespace(
        skill_bracket=skill_bracket,
        drift=drift,
        rk4_step=rk4_step,
        rk4_path=rk4_path,
        label_state=label_state,
        classify_one=classify_one,
        classify_batch=classify_batch,
        trace=trace,
        sde_advance=sde_advance,
        sde_path=sde_path,
        discrete_path=discrete_path,
    )
