"""The saddle's stable manifold, its piecewise closed-form approximation, and basins."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from ._kernels import get_backend
from ._kernels.common import HIGH, LOW, NOT_REACHED, OK, OVERFLOW, pack
from .config import DEFAULT, NumericsConfig
from .equilibria import eigen2, jacobian, saddle_point
from .errors import DegenerateParams, DomainError, ManifoldEscape, SingularPasting, UnsupportedVariant
from .model import ModelParams, PhaseState
from .simulate import LimitLabel, SdeConfig, classify_many, label_endpoints, sde_endpoints


@dataclass(frozen=True, eq=False)
class Separatrix:
    """Monotone polyline from (0, 0) through the saddle to (1, 1)."""

    saddle: PhaseState
    theta: np.ndarray
    p: np.ndarray
    params: ModelParams
    saddle_index: int

    @property
    def nodes(self) -> list[PhaseState]:
        return [PhaseState(float(a), float(b)) for a, b in zip(self.theta, self.p)]

    def __call__(self, theta):
        return psi_eval(self, theta)

    def to_dict(self) -> dict:
        return {
            "saddle": self.saddle.to_dict(),
            "n_nodes": int(self.theta.shape[0]),
            "params": self.params.to_dict(),
        }


def _trace_branch(params, seed, target, config: NumericsConfig):
    code, par = pack(params)
    cap = int(2.5 / config.manifold_spacing) + 16
    out_th = np.empty(cap)
    out_p = np.empty(cap)
    n_max = math.ceil(config.manifold_t_max / config.step)
    status, n = get_backend().trace(
        code, par, seed[0], seed[1], -config.step, n_max, config.manifold_spacing,
        target[0], target[1], config.manifold_corner_tol, config.clamp_tol, out_th, out_p,
    )
    if status != OK:
        why = {NOT_REACHED: "stalled or ran out of time", OVERFLOW: "node buffer overflow"}.get(status, "integration failed")
        end = (float(out_th[n - 1]), float(out_p[n - 1]))
        raise ManifoldEscape(f"backward orbit toward {target} {why}; last node {end}")
    return out_th[:n], out_p[:n]


def _resample(th: np.ndarray, p: np.ndarray, k_saddle: int, resolution: int):
    """Resample a monotone polyline to ``resolution`` nodes, keeping the saddle node.

    Nodes are spaced uniformly in ``theta + p``, which advances along both the
    flat stretch near (0, 0) and the steep one near (1, 1).
    """
    s = th + p
    s_mid = s[k_saddle]
    keep = np.concatenate(([True], np.diff(s) > 0.0))
    s_u, th_u, p_u = s[keep], th[keep], p[keep]
    n_left = int(round((resolution - 1) * s_mid / s[-1]))
    n_left = min(max(n_left, 1), resolution - 2)
    grid = np.concatenate((np.linspace(s[0], s_mid, n_left + 1), np.linspace(s_mid, s[-1], resolution - n_left)[1:]))
    new_th = np.interp(grid, s_u, th_u)
    new_p = np.interp(grid, s_u, p_u)
    new_th[0], new_p[0] = th[0], p[0]
    new_th[-1], new_p[-1] = th[-1], p[-1]
    new_th[n_left], new_p[n_left] = th[k_saddle], p[k_saddle]
    return new_th, new_p, n_left


def compute_separatrix(
    params: ModelParams,
    resolution: int | None = None,
    *,
    config: NumericsConfig = DEFAULT,
) -> Separatrix:
    """Stable manifold of the interior saddle as a polyline ``p = psi(theta)``.

    Two seeds sit at ``saddle -/+ offset * v_s`` on the stable eigenvector.
    Each is integrated in reversed time with fixed-step RK4 until it is within
    ``manifold_corner_tol`` of (0, 0) or (1, 1). The joined curve is checked
    for monotonicity in both coordinates and resampled.

    Raises
    ------
    DegenerateParams
        No interior saddle, or ``kappa = 0``.
    ManifoldEscape
        A backward orbit misses its corner, or the joined curve is not monotone.
    """
    resolution = config.manifold_resolution if resolution is None else int(resolution)
    if resolution < 3:
        raise DomainError("resolution must be at least 3")
    saddle = saddle_point(params)
    if not params.kappa > 0.0:
        raise DegenerateParams("kappa = 0 leaves the saddle without a stable direction")
    vals, vecs = eigen2(jacobian(params, saddle))
    if vecs is None or not (vals[0] > 0.0 > vals[1]):
        raise DegenerateParams(f"saddle eigenvalues {vals} are not of opposite sign")
    vs = np.array(vecs[1])
    if not (vs[0] > 0.0 and vs[1] > 0.0):
        raise ManifoldEscape(f"stable direction {tuple(vs)} is not increasing")
    s = np.array([saddle.theta, saddle.p])
    off = config.manifold_offset
    lth, lp = _trace_branch(params, s - off * vs, (0.0, 0.0), config)
    rth, rp = _trace_branch(params, s + off * vs, (1.0, 1.0), config)
    th = np.concatenate(([0.0], lth[::-1], [saddle.theta], rth, [1.0]))
    p = np.concatenate(([0.0], lp[::-1], [saddle.p], rp, [1.0]))
    k_saddle = lth.shape[0] + 1
    worst = min(np.diff(th).min(), np.diff(p).min())
    if worst < -config.monotone_tol:
        raise ManifoldEscape(f"manifold is not monotone (step {worst:.3g})")
    # sub-tolerance wiggles are flattened, never reordered
    th = np.maximum.accumulate(th)
    p = np.maximum.accumulate(p)
    th, p, k = _resample(th, p, k_saddle, resolution)
    return Separatrix(saddle, th, p, params, k)


def psi_eval(sep: Separatrix, theta):
    """Linear interpolation of the separatrix; scalar in, scalar out."""
    x = np.asarray(theta, dtype=np.float64)
    if np.any((x < 0.0) | (x > 1.0)) or not np.all(np.isfinite(x)):
        raise DomainError("theta must lie in [0, 1]")
    y = np.interp(x, sep.theta, sep.p)
    return float(y) if y.ndim == 0 else y


# -- closed-form approximation ----------------------------------------------


@dataclass(frozen=True)
class PiecewiseSeparatrix:
    """Three-branch approximation of the separatrix.

    A power law ``C_l theta^beta_l`` on ``[0, theta_l]``, the tangent line at
    the saddle on ``(theta_l, theta_r)`` and ``1 - C_r (1-theta)^beta_r`` on
    ``[theta_r, 1]``, with value and slope matched at both breakpoints.
    """

    theta_dagger: float
    p_dagger: float
    m_dagger: float
    beta_l: float
    beta_r: float
    theta_l: float
    theta_r: float
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def line(self, theta):
        return self.p_dagger + self.m_dagger * (theta - self.theta_dagger)

    def __call__(self, theta):
        x = np.asarray(theta, dtype=np.float64)
        if np.any((x < 0.0) | (x > 1.0)):
            raise DomainError("theta must lie in [0, 1]")
        y = self.line(x)
        left = x <= self.theta_l
        if np.any(left):
            y = np.where(left, self.line(self.theta_l) * (x / self.theta_l) ** self.beta_l, y)
        right = x >= self.theta_r
        if np.any(right):
            if self.theta_r >= 1.0:
                tail = np.ones_like(x)
            else:
                with np.errstate(invalid="ignore"):
                    tail = 1.0 - (1.0 - self.line(self.theta_r)) * ((1.0 - x) / (1.0 - self.theta_r)) ** self.beta_r
            y = np.where(right, tail, y)
        # every branch passes through the saddle; use the exact anchor there
        y = np.where(x == self.theta_dagger, self.p_dagger, y)
        return float(y) if y.ndim == 0 else y

    def to_dict(self) -> dict:
        return {
            "theta_dagger": self.theta_dagger,
            "p_dagger": self.p_dagger,
            "m_dagger": self.m_dagger,
            "beta_l": self.beta_l,
            "beta_r": self.beta_r,
            "theta_l": self.theta_l,
            "theta_r": self.theta_r,
        }


def psi_approx(params: ModelParams, *, config: NumericsConfig = DEFAULT) -> PiecewiseSeparatrix:
    """Closed-form shape parameters of the piecewise approximation.

    ``m_dagger`` is the stable-eigenvector slope from the saddle Jacobian,
    ``beta_l = kappa (1 - (1-theta*)^2)`` and ``beta_r = kappa (1-theta*)^2 / delta``
    are the exponents of the flow's linearisation at (0, 0) and (1, 1), and
    the breakpoints come from matching slopes with the tangent line, capped at
    ``theta*`` and 1 respectively.

    Raises
    ------
    SingularPasting
        When an exponent equals 1 within ``config.pasting_tol``.
    """
    saddle = saddle_point(params)
    ts, ps = saddle.theta, saddle.p
    j = jacobian(params, saddle)
    if j.j12 == 0.0:
        raise DegenerateParams("vanishing cross-derivative at the saddle")
    m = (-j.j11 - math.sqrt(j.j11 * j.j11 + 4.0 * j.j12 * j.j21)) / (2.0 * j.j12)
    a = 1.0 - ts
    beta_l = params.kappa * (1.0 - a * a)
    beta_r = params.kappa * a * a / params.delta
    for name, b in (("beta_l", beta_l), ("beta_r", beta_r)):
        if abs(b - 1.0) <= config.pasting_tol:
            raise SingularPasting(f"{name} = {b} makes the breakpoint formula singular")
    notes = []
    theta_l = min(ts, beta_l * (ps - m * ts) / (m * (1.0 - beta_l)))
    if not theta_l > 0.0:
        notes.append(f"left breakpoint {theta_l:.6g} <= 0; using the saddle instead")
        theta_l = ts
    theta_r = min(1.0, (m - beta_r * (1.0 - ps + m * ts)) / ((1.0 - beta_r) * m))
    if not theta_r >= ts:
        notes.append(f"right breakpoint {theta_r:.6g} below the saddle; using the saddle instead")
        theta_r = ts
    return PiecewiseSeparatrix(ts, ps, m, beta_l, beta_r, theta_l, theta_r, tuple(notes))


# -- basins -----------------------------------------------------------------


class BasinLabel(str, Enum):
    HIGH = "High"
    LOW = "Low"
    BOUNDARY = "Boundary"


_FROM_LIMIT = {LimitLabel.HIGH_SKILL: BasinLabel.HIGH, LimitLabel.LOW_SKILL: BasinLabel.LOW}


def _check_sep(params: ModelParams, sep: Separatrix) -> None:
    if sep.params != params:
        raise DomainError("separatrix was computed for different parameters")


def classify_basins(
    params: ModelParams,
    theta0,
    p0,
    sep: Separatrix,
    *,
    config: NumericsConfig = DEFAULT,
) -> list[BasinLabel]:
    """Vectorized :func:`classify_basin`."""
    _check_sep(params, sep)
    th = np.atleast_1d(np.asarray(theta0, dtype=np.float64))
    pp = np.atleast_1d(np.asarray(p0, dtype=np.float64))
    d = pp - psi_eval(sep, th)
    out = [BasinLabel.LOW if x > config.basin_band else BasinLabel.HIGH for x in d]
    band = np.nonzero(np.abs(d) <= config.basin_band)[0]
    if band.size:
        sims = classify_many(params, th[band], pp[band], config=config)
        for i, lab in zip(band, sims):
            out[i] = _FROM_LIMIT.get(lab, BasinLabel.BOUNDARY)
    return out


def classify_basin(
    params: ModelParams,
    init: PhaseState,
    sep: Separatrix,
    *,
    config: NumericsConfig = DEFAULT,
) -> BasinLabel:
    """Side of the separatrix ``init`` starts on.

    Points within ``config.basin_band`` of the curve are settled by simulating
    the flow; if that ends near the saddle the point is a Boundary point.
    """
    return classify_basins(params, [init.theta], [init.p], sep, config=config)[0]


@dataclass(frozen=True)
class SdeMethod:
    sigma: float
    n_samples: int = 200
    seed: int = 0
    step: float = DEFAULT.sde_step
    t_end: float = DEFAULT.sde_t_end

    def to_dict(self) -> dict:
        return {"kind": "sde", "sigma": self.sigma, "n_samples": self.n_samples, "seed": self.seed,
                "step": self.step, "t_end": self.t_end}


@dataclass(frozen=True, eq=False)
class BasinGrid:
    """Labels or high-skill probabilities on a ``len(theta) x len(p)`` grid (``cells[i, j]`` at ``(theta[i], p[j])``)."""

    theta: np.ndarray
    p: np.ndarray
    cells: np.ndarray
    method: dict
    meta: dict = field(default_factory=dict)


def cell_centres(n: int) -> np.ndarray:
    """Midpoints of ``n`` equal cells covering [0, 1]."""
    return (np.arange(n) + 0.5) / n


def basin_grid(
    params: ModelParams,
    theta_axis,
    p_axis,
    method: str | SdeMethod = "deterministic",
    *,
    sep: Separatrix | None = None,
    config: NumericsConfig = DEFAULT,
    max_paths: int = 40_000,
) -> BasinGrid:
    """Basin map on a grid of starting points.

    ``"deterministic"`` labels each cell High/Low/Boundary against the
    separatrix (or by direct simulation for variants without a closed-form
    saddle). An :class:`SdeMethod` runs ``n_samples`` SDE paths per cell and
    stores the fraction that ends in the high-skill basin; cell ``k`` (row
    major) draws from the ``k``-th child of ``SeedSequence(seed)``.
    """
    th = np.asarray(theta_axis, dtype=np.float64).ravel()
    pp = np.asarray(p_axis, dtype=np.float64).ravel()
    if th.size == 0 or pp.size == 0:
        raise DomainError("grid axes must be non-empty")
    TH, PP = np.meshgrid(th, pp, indexing="ij")
    if method == "deterministic":
        try:
            sep = compute_separatrix(params, config=config) if sep is None else sep
        except UnsupportedVariant:
            sep = None
        if sep is not None:
            labels = classify_basins(params, TH.ravel(), PP.ravel(), sep, config=config)
        else:
            labels = [_FROM_LIMIT.get(x, BasinLabel.BOUNDARY) for x in classify_many(params, TH.ravel(), PP.ravel(), config=config)]
        cells = np.array([x.value for x in labels], dtype=object).reshape(TH.shape)
        return BasinGrid(th, pp, cells, {"kind": "deterministic"}, {"separatrix": sep is not None})
    if not isinstance(method, SdeMethod):
        raise DomainError(f"unknown basin method {method!r}")
    cfg = SdeConfig(method.sigma, method.step, method.seed, method.t_end)
    seeds = np.random.SeedSequence(method.seed).spawn(TH.size)
    starts_th, starts_p = TH.ravel(), PP.ravel()
    high = np.empty(TH.size)
    unresolved = 0
    block = max(1, max_paths // max(1, method.n_samples))
    for lo in range(0, TH.size, block):
        hi = min(TH.size, lo + block)
        fth, fp = sde_endpoints(params, starts_th[lo:hi], starts_p[lo:hi], cfg, method.n_samples, seeds[lo:hi])
        lab = label_endpoints(params, fth, fp, config)
        high[lo:hi] = (lab == HIGH).mean(axis=1)
        unresolved += int(((lab != HIGH) & (lab != LOW)).sum())
    return BasinGrid(th, pp, high.reshape(TH.shape), method.to_dict(), {"unresolved_paths": unresolved})


# -- sweeps -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SweepTable:
    vary: str
    values: np.ndarray
    probes: np.ndarray
    psi: np.ndarray  # shape (len(values), len(probes))
    saddles: list[PhaseState]


SWEEPABLE = ("theta_a", "kappa", "delta")


def separatrix_sweep(
    base: ModelParams,
    vary: str,
    values,
    probes,
    *,
    resolution: int | None = None,
    config: NumericsConfig = DEFAULT,
) -> SweepTable:
    """Separatrix height at ``probes`` as one parameter varies."""
    if vary not in SWEEPABLE:
        raise DomainError(f"vary must be one of {SWEEPABLE}, got {vary!r}")
    vals = np.asarray(values, dtype=np.float64).ravel()
    pr = np.asarray(probes, dtype=np.float64).ravel()
    psi = np.empty((vals.size, pr.size))
    saddles = []
    for i, v in enumerate(vals):
        sep = compute_separatrix(replace(base, **{vary: float(v)}), resolution, config=config)
        psi[i] = psi_eval(sep, pr)
        saddles.append(sep.saddle)
    return SweepTable(vary, vals, pr, psi, saddles)
