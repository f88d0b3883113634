"""Time integration: RK4 for the ODE, the Bernoulli-delegation learner and the SDE.

All simulators emit :class:`Trajectory` objects whose states stay in the unit
square. Random draws come from numpy's PCG64 generator seeded through
``SeedSequence``, so every stochastic run is reproducible from its seed, and
draws are made outside the kernels so both backends consume identical
numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._kernels import get_backend
from ._kernels import py as _py
from ._kernels import vec as _vec
from ._kernels.common import HIGH, LOW, NON_FINITE, OK, SADDLE, STEP_TOO_LARGE, pack, pack_draws
from .config import DEFAULT, NumericsConfig
from .errors import DegenerateParams, DomainError, NonFinite, StepTooLarge, UnsupportedVariant
from .model import Asymmetric, MisperceivedAI, ModelParams, NoAI, PhaseState, validate_params


class LimitLabel(str, Enum):
    HIGH_SKILL = "HighSkill"
    LOW_SKILL = "LowSkill"
    SADDLE_NEIGHBORHOOD = "SaddleNeighborhood"
    UNRESOLVED = "Unresolved"


_LABELS = {
    HIGH: LimitLabel.HIGH_SKILL,
    LOW: LimitLabel.LOW_SKILL,
    SADDLE: LimitLabel.SADDLE_NEIGHBORHOOD,
}


def _label(code: int) -> LimitLabel:
    return _LABELS.get(int(code), LimitLabel.UNRESOLVED)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-stamped path in the unit square.

    ``decisions`` holds the per-round delegation draws of the discrete
    simulator (``decisions[k]`` is the draw that produced state ``k + 1``).
    """

    times: np.ndarray
    theta: np.ndarray
    p: np.ndarray
    terminal: LimitLabel
    decisions: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.times.shape[0]

    @property
    def states(self) -> list[PhaseState]:
        return [PhaseState(float(a), float(b)) for a, b in zip(self.theta, self.p)]

    @property
    def final(self) -> PhaseState:
        return PhaseState(float(self.theta[-1]), float(self.p[-1]))

    def to_dict(self) -> dict:
        return {
            "terminal": self.terminal.value,
            "final": self.final.to_dict(),
            "n_points": len(self),
            "t_end": float(self.times[-1]),
            "config": self.meta,
        }


@dataclass(frozen=True)
class DiscreteSimConfig:
    eta: float
    n_steps: int
    seed: int = 0

    @classmethod
    def for_horizon(cls, eta: float, t_end: float, seed: int = 0) -> "DiscreteSimConfig":
        """Config whose rounds cover ``t_end`` units of model time (each round is ``2 eta``)."""
        return cls(eta, int(round(t_end / (2.0 * eta))), seed)


@dataclass(frozen=True)
class SdeConfig:
    sigma: float
    step: float = DEFAULT.sde_step
    seed: int = 0
    t_end: float = DEFAULT.sde_t_end


# -- helpers ----------------------------------------------------------------


def _check_params(params: ModelParams) -> None:
    report = validate_params(params)
    if not report.ok:
        raise DomainError("; ".join(i.message for i in report.errors))


def _check_state(state: PhaseState) -> tuple[float, float]:
    th, p = float(state.theta), float(state.p)
    if not (0.0 <= th <= 1.0 and 0.0 <= p <= 1.0):
        raise DomainError(f"state {state} lies outside the unit square")
    return th, p


def _grid(t_end: float, step: float) -> tuple[int, float]:
    if not (step > 0.0 and math.isfinite(step)):
        raise DomainError(f"step must be positive, got {step}")
    if not (t_end >= 0.0 and math.isfinite(t_end)):
        raise DomainError(f"t_end must be nonnegative, got {t_end}")
    n = max(1, math.ceil(t_end / step - 1e-9))
    return n, t_end / n


def _record_index(n_steps: int, stride: int) -> np.ndarray:
    idx = np.arange(0, n_steps + 1, stride)
    if idx[-1] != n_steps:
        idx = np.append(idx, n_steps)
    return idx


def _raise_status(status: int, t: float) -> None:
    if status == STEP_TOO_LARGE:
        raise StepTooLarge(f"clamping beyond tolerance after t = {t:.6g}; reduce the step")
    if status == NON_FINITE:
        raise NonFinite(f"non-finite state after t = {t:.6g}")


def certificate(params: ModelParams) -> np.ndarray:
    """``[enabled, theta_hi, theta_lo]`` for the kernels' trapping-region test.

    Above ``theta_hi`` the AI beats the learner in every loss the delegation
    update can see, so delegation strictly falls; below ``theta_lo`` it
    strictly rises. Disabled when delegation cannot move.
    """
    v = params.variant
    if isinstance(v, NoAI):
        return np.array([1.0, 0.0, 0.0])
    if not params.kappa > 0.0 or (isinstance(v, Asymmetric) and not v.alpha > 0.0):
        return np.array([0.0, 1.0, 0.0])
    cross = 1.0 - math.sqrt(params.ai_loss)
    if isinstance(v, MisperceivedAI):
        other = 1.0 - abs(1.0 - v.theta_tilde_a)
        return np.array([1.0, max(cross, other), min(cross, other)])
    return np.array([1.0, cross, cross])


def saddle_probe(params: ModelParams, radius: float) -> np.ndarray:
    """``[theta, p, radius]`` of the interior saddle, radius -1 when there is none."""
    from .equilibria import saddle_point

    try:
        s = saddle_point(params)
    except (DegenerateParams, UnsupportedVariant):
        return np.array([0.0, 0.0, -1.0])
    return np.array([s.theta, s.p, radius])


def label_state(params: ModelParams, state: PhaseState, config: NumericsConfig = DEFAULT) -> LimitLabel:
    """Label certified at ``state`` without integrating, or ``Unresolved``."""
    code, par = pack(params)
    lab = _py.label_state(code, par, float(state.theta), float(state.p), certificate(params), config.eps_eq)
    return _label(lab) if lab >= 0 else LimitLabel.UNRESOLVED


# -- deterministic ----------------------------------------------------------


def integrate_ode(
    params: ModelParams,
    init: PhaseState,
    t_end: float,
    step: float | None = None,
    *,
    record_every: int = 1,
    config: NumericsConfig = DEFAULT,
) -> Trajectory:
    """Classical fixed-step RK4 on the variant's drift.

    The step is shrunk slightly so that it divides ``t_end``. After each step
    the state is clamped to the unit square; a clamp larger than
    ``config.clamp_tol`` raises :class:`StepTooLarge`.

    Parameters
    ----------
    params, init
        Model and initial state.
    t_end : float
        Horizon in model time.
    step : float, optional
        Nominal step, ``config.step`` by default.
    record_every : int
        Keep every n-th state (the last state is always kept).

    Returns
    -------
    Trajectory
        ``terminal`` is HighSkill or LowSkill when the final state is within
        ``eps_eq`` of the sink or inside the trapping region that drains into
        it, Unresolved otherwise.
    """
    _check_params(params)
    th, p = _check_state(init)
    step = config.step if step is None else step
    n, h = _grid(t_end, step)
    stride = max(1, int(record_every))
    idx = _record_index(n, stride)
    out_th = np.empty(idx.shape[0])
    out_p = np.empty(idx.shape[0])
    code, par = pack(params)
    status, written, done = get_backend().rk4_path(code, par, th, p, h, n, stride, config.clamp_tol, out_th, out_p)
    if status != OK:
        _raise_status(status, done * h)
    times = idx * h
    times[-1] = t_end
    final = PhaseState(float(out_th[-1]), float(out_p[-1]))
    return Trajectory(
        times,
        out_th,
        out_p,
        label_state(params, final, config),
        meta={"solver": "rk4", "step": h, "t_end": t_end, "params": params.to_dict()},
    )


def arrival_time(
    params: ModelParams,
    init: PhaseState,
    theta_target: float,
    t_max: float = DEFAULT.t_max,
    *,
    config: NumericsConfig = DEFAULT,
    chunk: int = 200_000,
) -> float:
    """First time the RK4 skill path reaches ``theta_target``.

    The crossing step is located on the fixed grid and refined by bisection
    on the length of a single RK4 sub-step. Returns ``inf`` if the target is
    not reached by ``t_max``.
    """
    _check_params(params)
    th, p = _check_state(init)
    up = theta_target >= th
    if th == theta_target:
        return 0.0
    code, par = pack(params)
    h = config.step
    t = 0.0
    buf_th = np.empty(chunk + 1)
    buf_p = np.empty(chunk + 1)
    be = get_backend()
    while t < t_max:
        n = min(chunk, max(1, math.ceil((t_max - t) / h)))
        status, written, done = be.rk4_path(code, par, th, p, h, n, 1, config.clamp_tol, buf_th, buf_p)
        if status != OK:
            _raise_status(status, t + done * h)
        seg = buf_th[: n + 1]
        hit = np.nonzero(seg >= theta_target if up else seg <= theta_target)[0]
        if hit.size:
            k = int(hit[0]) - 1
            t0, th0, p0 = t + k * h, float(buf_th[k]), float(buf_p[k])
            lo, hi = 0.0, h
            while hi - lo > 1e-14:
                mid = 0.5 * (lo + hi)
                x, _ = _py.rk4_step(code, par, th0, p0, mid)
                if (x >= theta_target) == up:
                    hi = mid
                else:
                    lo = mid
            return t0 + 0.5 * (lo + hi)
        t += n * h
        th, p = float(buf_th[n]), float(buf_p[n])
    return math.inf


def _no_ai_potential(theta: float) -> float:
    return math.log(theta) - math.log1p(-theta) + 1.0 / (1.0 - theta)


def no_ai_time_to_reach(theta_0: float, theta_target: float) -> float:
    """Time the unassisted learner needs to go from ``theta_0`` to ``theta_target``.

    Closed form of the integral of ``d theta / (theta (1-theta)^2)``:
    ``F(target) - F(theta_0)`` with ``F(x) = ln(x / (1-x)) + 1 / (1-x)``.

    Raises
    ------
    DomainError
        Unless ``0 < theta_0 <= theta_target < 1``.
    """
    if not (0.0 < theta_0 <= theta_target < 1.0):
        raise DomainError(f"need 0 < theta_0 <= theta_target < 1, got {theta_0}, {theta_target}")
    if theta_0 == theta_target:
        return 0.0
    return _no_ai_potential(theta_target) - _no_ai_potential(theta_0)


def classify_many(
    params: ModelParams,
    theta0: np.ndarray,
    p0: np.ndarray,
    t_max: float | None = None,
    *,
    config: NumericsConfig = DEFAULT,
) -> list[LimitLabel]:
    """Vectorized :func:`classify_limit`."""
    _check_params(params)
    th = np.ascontiguousarray(theta0, dtype=np.float64).ravel()
    pp = np.ascontiguousarray(p0, dtype=np.float64).ravel()
    if th.shape != pp.shape:
        raise DomainError("theta0 and p0 must have the same length")
    if th.size and not (((0 <= th) & (th <= 1)).all() and ((0 <= pp) & (pp <= 1)).all()):
        raise DomainError("initial states must lie in the unit square")
    t_max = config.t_max if t_max is None else t_max
    code, par = pack(params)
    n_max = max(1, math.ceil(t_max / config.step - 1e-9))
    saddle = saddle_probe(params, config.saddle_radius)
    labels = np.empty(th.size, dtype=np.int64)
    steps = np.empty(th.size, dtype=np.int64)
    status = np.empty(th.size, dtype=np.int64)
    get_backend().classify_batch(
        code, par, th, pp, config.step, n_max, config.clamp_tol, certificate(params), config.eps_eq,
        saddle, labels, steps, status,
    )
    out = [_label(x) for x in labels]
    if saddle[2] > 0.0:
        near = np.maximum(np.abs(th - saddle[0]), np.abs(pp - saddle[1])) <= config.saddle_snap
        for i in np.nonzero(near)[0]:
            out[i] = LimitLabel.SADDLE_NEIGHBORHOOD
    return out


def classify_limit(
    params: ModelParams,
    init: PhaseState,
    t_max: float | None = None,
    *,
    config: NumericsConfig = DEFAULT,
) -> LimitLabel:
    """Long-run fate of ``init`` under the deterministic flow.

    Integrates until the state is within ``eps_eq`` of a sink or inside a
    trapping region that drains into one. Starting points within
    ``saddle_snap`` of the saddle, and paths that stall near it, are labelled
    SaddleNeighborhood. Anything else still open at ``t_max`` (or an
    integration failure) is Unresolved.
    """
    return classify_many(params, np.array([init.theta]), np.array([init.p]), t_max, config=config)[0]


# -- stochastic -------------------------------------------------------------


def _rng(seed) -> np.random.Generator:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.PCG64(ss))


def max_discrete_rate(params: ModelParams) -> float:
    """Bound on the bracketed increments of one discrete round."""
    v = params.variant
    alpha = v.alpha if isinstance(v, Asymmetric) else 1.0
    return max(1.0, params.delta, params.kappa * max(1.0, alpha))


def simulate_discrete(params: ModelParams, init: PhaseState, cfg: DiscreteSimConfig) -> Trajectory:
    """Per-round learner: delegate with probability ``p``, then update skill and delegation.

    Skill moves by ``2 eta theta(1-theta)`` times ``(1-theta)`` after a manual
    round or ``delta (theta_d - theta)`` after a delegated one. Delegation
    moves by ``2 eta kappa p(1-p)`` times the loss gap the learner perceives
    that round. Jagged AIs draw the realised AI skill of delegated rounds and
    a detection penalty draws detection, both from the second uniform of the
    round. Round ``k`` is stamped with model time ``2 eta k``.

    Raises
    ------
    DomainError
        If ``2 eta`` times the largest bracket could push a state out of the
        unit square in one round.
    """
    _check_params(params)
    th, p = _check_state(init)
    if not (cfg.eta > 0.0 and math.isfinite(cfg.eta)):
        raise DomainError(f"eta must be positive, got {cfg.eta}")
    if cfg.n_steps < 0:
        raise DomainError("n_steps must be nonnegative")
    if 2.0 * cfg.eta * max_discrete_rate(params) >= 1.0:
        raise DomainError(f"eta = {cfg.eta} is too large for these rates; one round could leave [0, 1]")
    code, par = pack(params)
    mode, support, cumw = pack_draws(params)
    n = int(cfg.n_steps)
    uniforms = _rng(cfg.seed).random((n, 2))
    out_th = np.empty(n + 1)
    out_p = np.empty(n + 1)
    out_x = np.zeros(n, dtype=np.int8)
    status, done = get_backend().discrete_path(
        code, mode, par, th, p, cfg.eta, uniforms, support, cumw, DEFAULT.clamp_tol, out_th, out_p, out_x
    )
    if status != OK:
        _raise_status(status, 2.0 * cfg.eta * done)
    final = PhaseState(float(out_th[-1]), float(out_p[-1]))
    return Trajectory(
        2.0 * cfg.eta * np.arange(n + 1),
        out_th,
        out_p,
        label_state(params, final),
        decisions=out_x,
        meta={"simulator": "discrete", "eta": cfg.eta, "n_steps": n, "seed": cfg.seed, "rng": "PCG64"},
    )


def _check_sde(cfg: SdeConfig) -> tuple[int, float]:
    if not (cfg.sigma >= 0.0 and math.isfinite(cfg.sigma)):
        raise DomainError(f"sigma must be nonnegative, got {cfg.sigma}")
    return _grid(cfg.t_end, cfg.step)


def simulate_sde(params: ModelParams, init: PhaseState, cfg: SdeConfig, *, record_every: int = 1) -> Trajectory:
    """Euler-Maruyama with delegation noise ``kappa p(1-p) sigma dW``.

    Both coordinates are clamped to [0, 1] after every step; the noise
    amplitude vanishes on the boundary, so the clamp only removes overshoot.
    """
    _check_params(params)
    th, p = _check_state(init)
    n, h = _check_sde(cfg)
    stride = max(1, int(record_every))
    idx = _record_index(n, stride)
    normals = _rng(cfg.seed).standard_normal(n)
    out_th = np.empty(idx.shape[0])
    out_p = np.empty(idx.shape[0])
    code, par = pack(params)
    status, written, done = get_backend().sde_path(code, par, th, p, normals, h, cfg.sigma, stride, out_th, out_p)
    if status != OK:
        _raise_status(status, done * h)
    times = idx * h
    times[-1] = cfg.t_end
    final = PhaseState(float(out_th[-1]), float(out_p[-1]))
    return Trajectory(
        times,
        out_th,
        out_p,
        label_state(params, final),
        meta={"simulator": "sde", "sigma": cfg.sigma, "step": h, "t_end": cfg.t_end, "seed": cfg.seed, "rng": "PCG64"},
    )


def sde_endpoints(
    params: ModelParams,
    theta0: np.ndarray,
    p0: np.ndarray,
    cfg: SdeConfig,
    n_samples: int,
    seeds: list | None = None,
    *,
    chunk_steps: int = 250,
) -> tuple[np.ndarray, np.ndarray]:
    """Final states of ``n_samples`` SDE paths from each of several starting points.

    Start ``i`` draws its noise from its own generator (``seeds[i]``, spawned
    from ``cfg.seed`` by default), one row of ``n_samples`` normals per step,
    so results do not depend on ``chunk_steps`` or on how starts are batched.

    Returns
    -------
    theta, p : ndarray, shape (n_starts, n_samples)
    """
    _check_params(params)
    th0 = np.asarray(theta0, dtype=np.float64).ravel()
    pp0 = np.asarray(p0, dtype=np.float64).ravel()
    n, h = _check_sde(cfg)
    if seeds is None:
        seeds = np.random.SeedSequence(cfg.seed).spawn(th0.size)
    gens = [_rng(s) for s in seeds]
    th = np.repeat(th0, n_samples)
    pp = np.repeat(pp0, n_samples)
    code, par = pack(params)
    be = get_backend()
    done = 0
    while done < n:
        k = min(chunk_steps, n - done)
        normals = np.concatenate([g.standard_normal((k, n_samples)) for g in gens], axis=1) if gens else np.empty((k, 0))
        status = be.sde_advance(code, par, th, pp, normals, h, cfg.sigma)
        if status != OK:
            _raise_status(status, (done + k) * h)
        done += k
    return th.reshape(th0.size, n_samples), pp.reshape(th0.size, n_samples)


def label_endpoints(params: ModelParams, theta: np.ndarray, p: np.ndarray, config: NumericsConfig = DEFAULT) -> np.ndarray:
    """Kernel label codes (HIGH/LOW or -1) for an array of final states."""
    code, par = pack(params)
    flat = _vec.label_state(code, par, np.ravel(theta), np.ravel(p), certificate(params), config.eps_eq)
    return flat.reshape(np.shape(theta))
