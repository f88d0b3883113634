"""Integer codes and parameter packing shared by both kernel backends."""

from __future__ import annotations

import numpy as np

from ..model import (
    Asymmetric,
    DetectionPenalty,
    JaggedAI,
    MisperceivedAI,
    ModelParams,
    NoAI,
)

# drift families
STANDARD = 0
NOAI = 1
MISPERCEIVED = 2
ASYMMETRIC = 3

# how a delegated round's AI loss is drawn in the discrete simulator
DRAW_EXPECTED = 0
DRAW_JAGGED = 1
DRAW_DETECTION = 2

# kernel status
OK = 0
STEP_TOO_LARGE = 1
NON_FINITE = 2
NOT_REACHED = 3
OVERFLOW = 4

# limit labels
HIGH = 0
LOW = 1
SADDLE = 2
UNRESOLVED = 3

# par layout
P_THETA_A, P_KAPPA, P_DELTA, P_THETA_D, P_AI_LOSS, P_AUX = range(6)


def pack(params: ModelParams) -> tuple[int, np.ndarray]:
    """Flatten params into ``(code, par)`` for the kernels.

    ``par[P_AUX]`` carries the perceived AI loss (MisperceivedAI), the
    down-weighting factor (Asymmetric) or the detection probability
    (DetectionPenalty); it is unused otherwise.
    """
    v = params.variant
    aux = 0.0
    code = STANDARD
    if isinstance(v, NoAI):
        code = NOAI
    elif isinstance(v, MisperceivedAI):
        code = MISPERCEIVED
        aux = (1.0 - v.theta_tilde_a) * (1.0 - v.theta_tilde_a)
    elif isinstance(v, Asymmetric):
        code = ASYMMETRIC
        aux = v.alpha
    elif isinstance(v, DetectionPenalty):
        aux = v.q
    par = np.array(
        [params.theta_a, params.kappa, params.delta, params.theta_d, params.ai_loss, aux],
        dtype=np.float64,
    )
    return code, par


def pack_draws(params: ModelParams) -> tuple[int, np.ndarray, np.ndarray]:
    """Per-round AI-loss sampling mode plus the skill support and cumulative weights."""
    v = params.variant
    if isinstance(v, JaggedAI):
        support = np.asarray(v.dist.support, dtype=np.float64)
        cumw = np.cumsum(np.asarray(v.dist.weights, dtype=np.float64))
        return DRAW_JAGGED, support, cumw
    mode = DRAW_DETECTION if isinstance(v, DetectionPenalty) else DRAW_EXPECTED
    return mode, np.zeros(1), np.ones(1)
