"""Performance gap between an AI-assisted and an unassisted learner, and when it turns for good."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ._kernels import py as _py
from ._kernels.common import pack
from .config import DEFAULT, NumericsConfig
from .errors import DomainError, Unresolved
from .model import ModelParams, NoAI, PhaseState
from .simulate import Trajectory, integrate_ode, no_ai_time_to_reach


@dataclass(frozen=True, eq=False)
class GapSeries:
    """``gap[k]`` is the assisted loss minus the unassisted loss at ``times[k]``."""

    times: np.ndarray
    gap: np.ndarray
    assisted: Trajectory
    baseline: Trajectory


@dataclass(frozen=True)
class CrossingResult:
    """Crossing time ``t_c`` after which the assisted learner is worse for good.

    ``bracket`` encloses ``t_c``; ``roots`` lists the approximate times of every
    sign change seen on the scan grid; ``t_star`` is the time the unassisted
    learner needs to reach the AI's skill, an upper bound on ``t_c``.
    """

    t_c: float
    bracket: tuple[float, float]
    sign_changes: int
    t_star: float
    roots: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "t_c": self.t_c,
            "t_star": self.t_star,
            "sign_changes": self.sign_changes,
            "bracket": list(self.bracket),
        }


def _check(params: ModelParams, init: PhaseState) -> None:
    if params.theta_d != 0.0:
        raise DomainError("the performance gap is defined for theta_d = 0")
    if isinstance(params.variant, NoAI):
        raise DomainError("the assisted learner needs an AI variant")
    if not (0.0 < init.theta < 1.0 and 0.0 <= init.p <= 1.0):
        raise DomainError(f"initial state {init} must have 0 < theta < 1")


def _gap(theta, p, theta_base, ai_loss):
    own = (1.0 - theta) * (1.0 - theta)
    base = (1.0 - theta_base) * (1.0 - theta_base)
    return (1.0 - p) * own + p * ai_loss - base


def performance_gap(
    params: ModelParams,
    init: PhaseState,
    t_end: float,
    step: float | None = None,
    *,
    config: NumericsConfig = DEFAULT,
) -> GapSeries:
    """Loss of the learner starting at ``(theta_0, p_0)`` minus that of the learner starting at ``(theta_0, 0)``."""
    _check(params, init)
    assisted = integrate_ode(params, init, t_end, step, config=config)
    baseline = integrate_ode(replace(params, variant=NoAI()), PhaseState(init.theta, 0.0), t_end, step, config=config)
    gap = _gap(assisted.theta, assisted.p, baseline.theta, params.ai_loss)
    return GapSeries(assisted.times, gap, assisted, baseline)


def _refine(params: ModelParams, start: tuple[float, float, float], h: float, tol: float) -> tuple[float, float]:
    """Bisect on a single RK4 sub-step for the root of the gap inside one grid step."""
    code, par = pack(params)
    base_code, base_par = pack(replace(params, variant=NoAI()))
    th, p, thb = start

    def g(tau):
        a, b = _py.rk4_step(code, par, th, p, tau)
        c, _ = _py.rk4_step(base_code, base_par, thb, 0.0, tau)
        return _gap(a, b, c, params.ai_loss)

    lo, hi = 0.0, h
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return lo, hi


def crossing_time(
    params: ModelParams,
    init: PhaseState,
    t_max: float | None = None,
    *,
    step: float | None = None,
    config: NumericsConfig = DEFAULT,
) -> CrossingResult:
    """Last time the performance gap turns positive.

    The gap is sampled on the RK4 grid over ``[0, min(t_max, 2 t* + 10)]``;
    past ``t*`` the unassisted learner is already better than the AI, so the
    gap stays positive. The last non-positive sample brackets ``t_c``, which
    is then bisected to ``config.bisect_tol``.

    Raises
    ------
    DomainError
        For ``p_0 = 0`` (the gap is identically zero) or ``theta_d != 0``.
    Unresolved
        If the gap is still non-positive at the end of the scan.
    """
    _check(params, init)
    if not init.p > 0.0:
        raise DomainError("p_0 = 0 gives an identically zero gap; the crossing time is undefined")
    ts = params.effective_theta_a
    if init.theta >= ts:
        return CrossingResult(0.0, (0.0, 0.0), 0, 0.0)
    t_star = no_ai_time_to_reach(init.theta, ts)
    t_max = config.t_max if t_max is None else t_max
    horizon = min(t_max, 2.0 * t_star + 10.0)
    series = performance_gap(params, init, horizon, step, config=config)
    pos = series.gap > 0.0
    flips = np.nonzero(pos[1:] != pos[:-1])[0]
    roots = tuple(float(0.5 * (series.times[k] + series.times[k + 1])) for k in flips)
    nonpos = np.nonzero(~pos)[0]
    if nonpos.size == 0:
        return CrossingResult(0.0, (0.0, 0.0), len(flips), t_star, roots)
    k = int(nonpos[-1])
    if k == pos.shape[0] - 1:
        raise Unresolved(f"gap still non-positive at t = {horizon:.6g}")
    t0 = float(series.times[k])
    h = float(series.times[k + 1]) - t0
    start = (float(series.assisted.theta[k]), float(series.assisted.p[k]), float(series.baseline.theta[k]))
    lo, hi = _refine(params, start, h, config.bisect_tol)
    return CrossingResult(t0 + 0.5 * (lo + hi), (t0 + lo, t0 + hi), len(flips), t_star, roots)


def crossing_curve(
    params: ModelParams,
    init: PhaseState,
    theta_a_values,
    *,
    t_max: float | None = None,
    config: NumericsConfig = DEFAULT,
) -> list[tuple[float, CrossingResult]]:
    """:func:`crossing_time` at each AI skill in ``theta_a_values``."""
    out = []
    for v in np.asarray(theta_a_values, dtype=np.float64).ravel():
        if not 0.0 < v < 1.0:
            raise DomainError(f"theta_a values must lie in (0, 1), got {v}")
        out.append((float(v), crossing_time(replace(params, theta_a=float(v)), init, t_max, config=config)))
    return out
