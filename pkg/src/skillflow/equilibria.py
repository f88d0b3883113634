"""Fixed points, Jacobians and their stability.

Closed forms are available for the variants whose delegation equation is
``kappa p(1-p)[(1-theta)^2 - c]`` for a constant ``c`` (Simplified, General,
JaggedAI, DetectionPenalty). The interior saddle then sits at the skill whose
own loss equals ``c``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

from ._kernels import py as _py
from ._kernels.common import pack
from .dynamics import eval_drift
from .errors import DegenerateParams, UnsupportedVariant
from .model import (
    Asymmetric,
    DetectionPenalty,
    General,
    JaggedAI,
    ModelParams,
    PhaseState,
    Simplified,
)

_CLOSED_FORM = (Simplified, General, JaggedAI, DetectionPenalty)


class Kind(str, Enum):
    STABLE_SINK = "StableSink"
    UNSTABLE_SOURCE = "UnstableSource"
    SADDLE = "Saddle"


@dataclass(frozen=True)
class Jacobian2:
    j11: float
    j12: float
    j21: float
    j22: float

    @property
    def det(self) -> float:
        return self.j11 * self.j22 - self.j12 * self.j21

    @property
    def trace(self) -> float:
        return self.j11 + self.j22

    def as_rows(self) -> list[list[float]]:
        return [[self.j11, self.j12], [self.j21, self.j22]]

    def to_dict(self) -> dict:
        return {"j11": self.j11, "j12": self.j12, "j21": self.j21, "j22": self.j22}


@dataclass(frozen=True)
class Equilibrium:
    state: PhaseState
    kind: Kind
    eigenvalues: tuple
    eigenvectors: tuple | None

    def to_dict(self) -> dict:
        vals = [v if isinstance(v, float) else {"re": v.real, "im": v.imag} for v in self.eigenvalues]
        vecs = None if self.eigenvectors is None else [list(v) for v in self.eigenvectors]
        return {
            "theta": self.state.theta,
            "p": self.state.p,
            "kind": self.kind.value,
            "eigenvalues": vals,
            "eigenvectors": vecs,
        }


def _require_closed_form(params: ModelParams, allow=()) -> None:
    if not isinstance(params.variant, _CLOSED_FORM + tuple(allow)):
        raise UnsupportedVariant(f"no closed-form analysis for the {params.variant.tag} variant")


def saddle_point(params: ModelParams) -> PhaseState:
    """Interior saddle ``(theta*, (1-theta*) / ((1-theta*) + delta (theta* - theta_d)))``.

    ``theta*`` is the AI skill, or the effective skill when the AI loss is
    random or penalised. Asymmetric updates share the saddle of the symmetric
    model since both vanish on the same set.

    Raises
    ------
    DegenerateParams
        Unless ``0 < theta* < 1``, ``delta > 0`` and ``theta_d < theta*``.
    UnsupportedVariant
        For NoAI and MisperceivedAI.
    """
    _require_closed_form(params, allow=(Asymmetric,))
    ts = params.effective_theta_a
    if not (0.0 < ts < 1.0):
        raise DegenerateParams(f"saddle needs 0 < theta_a < 1, got {ts}")
    if not (params.delta > 0.0 and math.isfinite(params.delta)):
        raise DegenerateParams(f"saddle needs delta > 0, got {params.delta}")
    if not (0.0 <= params.theta_d < ts):
        raise DegenerateParams(f"saddle needs 0 <= theta_d < theta_a, got theta_d={params.theta_d}")
    a = 1.0 - ts
    # same expression as the skill-nullcline in the drift kernel, so the
    # drift vanishes here bit-for-bit
    den = a + params.delta * (ts - params.theta_d)
    return PhaseState(ts, a / den)


def jacobian(params: ModelParams, state: PhaseState) -> Jacobian2:
    """Analytic partial derivatives of the drift at ``state``."""
    _require_closed_form(params)
    th, p = float(state.theta), float(state.p)
    k, d, td, c = params.kappa, params.delta, params.theta_d, params.ai_loss
    _, par = pack(params)
    b = _py.skill_bracket(par, th, p)
    w = th * (1.0 - th)
    j11 = (1.0 - 2.0 * th) * b + w * (-(1.0 - p) - d * p)
    j12 = w * (-(1.0 - th) + d * (td - th))
    j21 = -2.0 * k * p * (1.0 - p) * (1.0 - th)
    j22 = k * (1.0 - 2.0 * p) * ((1.0 - th) * (1.0 - th) - c)
    return Jacobian2(float(j11), float(j12), float(j21), float(j22))


def _unit(x: float, y: float) -> tuple[float, float]:
    n = math.hypot(x, y)
    x, y = x / n, y / n
    if x < 0.0 or (x == 0.0 and y < 0.0):
        x, y = -x, -y
    return (x + 0.0, y + 0.0)


def eigen2(j: Jacobian2) -> tuple[tuple, tuple | None]:
    """Eigenvalues of a 2x2 matrix by the quadratic formula.

    Real eigenvalues come sorted in decreasing order. Unit eigenvectors (first
    nonzero component positive) are returned only when the eigenvalues are
    real and distinct; otherwise the second item is ``None``.
    """
    tr = j.j11 + j.j22
    disc = (j.j11 - j.j22) ** 2 + 4.0 * j.j12 * j.j21
    if disc < 0.0:
        r = cmath.sqrt(disc)
        return ((tr + r) / 2.0, (tr - r) / 2.0), None
    s = math.sqrt(disc)
    hi, lo = (tr + s) / 2.0, (tr - s) / 2.0
    if s == 0.0:
        return (hi, lo), None
    vecs = []
    for lam in (hi, lo):
        # two candidate null vectors of (J - lam I); take the better conditioned one
        u = (j.j12, lam - j.j11)
        v = (lam - j.j22, j.j21)
        best = u if math.hypot(*u) >= math.hypot(*v) else v
        if best == (0.0, 0.0):
            best = (1.0, 0.0) if lam == j.j11 else (0.0, 1.0)
        vecs.append(_unit(*best))
    return (hi, lo), tuple(vecs)


def _centre_sign(params: ModelParams, state: PhaseState, vec: tuple[float, float]) -> float:
    """Sign of the flow along a zero-eigenvalue direction: -1 toward ``state``, +1 away."""
    for s in (1.0, -1.0):
        q = PhaseState(state.theta + s * 1e-3 * vec[0], state.p + s * 1e-3 * vec[1])
        if 0.0 <= q.theta <= 1.0 and 0.0 <= q.p <= 1.0:
            v = eval_drift(params, q)
            along = v.d_theta * vec[0] + v.d_p * vec[1]
            return -1.0 if along * s < 0.0 else 1.0
    raise DegenerateParams("cannot probe the centre direction inside the unit square")


def _classify(params: ModelParams, state: PhaseState, vals, vecs) -> Kind:
    if isinstance(vals[0], complex):
        signs = [math.copysign(1.0, vals[0].real)] * 2
    else:
        signs = []
        for i, lam in enumerate(vals):
            if lam != 0.0:
                signs.append(math.copysign(1.0, lam))
            elif vecs is not None:
                signs.append(_centre_sign(params, state, vecs[i]))
            else:
                raise DegenerateParams(f"doubly degenerate equilibrium at {state}")
    if all(s < 0 for s in signs):
        return Kind.STABLE_SINK
    if all(s > 0 for s in signs):
        return Kind.UNSTABLE_SOURCE
    return Kind.SADDLE


def equilibrium_at(params: ModelParams, state: PhaseState) -> Equilibrium:
    vals, vecs = eigen2(jacobian(params, state))
    return Equilibrium(state, _classify(params, state, vals, vecs), vals, vecs)


def all_equilibria(params: ModelParams) -> list[Equilibrium]:
    """Every fixed point in the unit square with its linear stability.

    With ``theta_d = 0`` there are five: sinks at (1, 0) and (0, 1), sources at
    (0, 0) and (1, 1) and the interior saddle. With ``theta_d > 0`` the
    low-skill sink moves to (theta_d, 1) and (0, 1) becomes a boundary saddle.
    """
    _require_closed_form(params)
    if not (params.kappa > 0.0 and math.isfinite(params.kappa)):
        raise DegenerateParams("equilibrium analysis needs kappa > 0")
    saddle = saddle_point(params)
    points = [PhaseState(1.0, 0.0), PhaseState(0.0, 1.0), PhaseState(0.0, 0.0), PhaseState(1.0, 1.0)]
    if params.theta_d > 0.0:
        points.insert(1, PhaseState(params.theta_d, 1.0))
    points.append(saddle)
    return [equilibrium_at(params, s) for s in points]
