"""Drift fields of every model variant, the instantaneous loss and effective AI skill."""

from __future__ import annotations

import math

from ._kernels import py as _py
from ._kernels.common import pack
from .model import ModelParams, PhaseState, SkillDistribution, Velocity


def eval_drift(params: ModelParams, state: PhaseState) -> Velocity:
    """Velocity of the variant's vector field at ``state``.

    The skill equation is ``theta(1-theta)[(1-p)(1-theta) + delta p (theta_d - theta)]``
    for every variant except ``NoAI`` (which drops delegation). The delegation
    equation is ``kappa p(1-p)[(1-theta)^2 - c]`` with ``c = params.ai_loss``,
    blended with the perceived loss for ``MisperceivedAI`` and with negative
    values scaled by ``alpha`` for ``Asymmetric``.

    Parameters
    ----------
    params : ModelParams
    state : PhaseState
        Point in the unit square.

    Returns
    -------
    Velocity
    """
    code, par = pack(params)
    dth, dp = _py.drift(code, par, float(state.theta), float(state.p))
    return Velocity(float(dth), float(dp))


def loss(theta: float, p: float, params: ModelParams) -> float:
    """Expected loss of one round: ``(1-p)(1-theta)^2 + p c``.

    ``c`` is the expected squared error of the AI output (``E[(1-s)^2]`` for a
    jagged AI, the detection-weighted loss under a detection penalty).
    """
    own = (1.0 - theta) * (1.0 - theta)
    return (1.0 - p) * own + p * params.ai_loss


def effective_skill(dist: SkillDistribution) -> float:
    """Deterministic skill with the same expected squared error as ``dist``."""
    return 1.0 - math.sqrt(dist.expected_sq_error())
