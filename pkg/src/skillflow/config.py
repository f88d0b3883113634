"""Numerical tolerances and backend selection.

Every tolerance used by the solvers lives in :class:`NumericsConfig` so tests
can tighten or loosen them in one place.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

#: Set to ``1`` to force the pure-numpy kernels even when numba is importable.
DISABLE_NUMBA_ENV = "SKILLFLOW_DISABLE_NUMBA"
OUT_DIR_ENV = "SKILLFLOW_OUT_DIR"
JOBS_ENV = "SKILLFLOW_JOBS"


def numba_disabled() -> bool:
    return os.environ.get(DISABLE_NUMBA_ENV, "").strip().lower() in {"1", "true", "yes", "on"}


@dataclass(frozen=True)
class NumericsConfig:
    # fixed-step RK4
    step: float = 1e-3
    clamp_tol: float = 1e-12
    # limit classification
    eps_eq: float = 1e-6
    t_max: float = 1e4
    saddle_snap: float = 1e-12
    saddle_radius: float = 1e-3
    # stable manifold
    manifold_offset: float = 1e-6
    manifold_corner_tol: float = 1e-4
    manifold_resolution: int = 512
    manifold_t_max: float = 1e5
    manifold_spacing: float = 1e-4
    monotone_tol: float = 1e-9
    basin_band: float = 1e-4
    # crossing time
    bisect_tol: float = 1e-6
    # SDE defaults used by the basin heatmap
    sde_step: float = 1e-2
    sde_t_end: float = 100.0
    # breakpoint singularity guard for the piecewise approximation
    pasting_tol: float = 1e-9

    def with_(self, **changes) -> "NumericsConfig":
        return replace(self, **changes)


DEFAULT = NumericsConfig()
