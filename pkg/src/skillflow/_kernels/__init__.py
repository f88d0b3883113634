"""Backend selection for the hot loops.

The compiled backend is used whenever numba imports and
``SKILLFLOW_DISABLE_NUMBA`` is unset. The numpy backend runs the same scalar
kernels as plain Python and swaps in vectorized versions of the batch kernels.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable

from ..config import numba_disabled
from . import scalar, vec


@dataclass(frozen=True)
class Backend:
    name: str
    drift: Callable
    rk4_path: Callable
    classify_batch: Callable
    trace: Callable
    sde_advance: Callable
    sde_path: Callable
    discrete_path: Callable


def _from_namespace(name, ns, **overrides) -> Backend:
    fields = {f: getattr(ns, f) for f in Backend.__dataclass_fields__ if f != "name"}
    fields.update(overrides)
    return Backend(name=name, **fields)


#: plain-Python build of the scalar kernels
py = scalar.build(lambda f: f)


@functools.lru_cache(maxsize=None)
def _numpy_backend() -> Backend:
    return _from_namespace("numpy", py, classify_batch=vec.classify_batch, sde_advance=vec.sde_advance)


@functools.lru_cache(maxsize=None)
def _numba_backend() -> Backend | None:
    try:
        import numba
    except ImportError:
        return None
    return _from_namespace("numba", scalar.build(numba.njit(cache=True)))


def available() -> list[str]:
    return ["numba", "numpy"] if _numba_backend() is not None else ["numpy"]


def get_backend(name: str | None = None) -> Backend:
    """Return the requested backend, or the default one for this environment."""
    if name is None:
        name = "numpy" if numba_disabled() else "numba"
    if name == "numba":
        be = _numba_backend()
        return be if be is not None else _numpy_backend()
    if name == "numpy":
        return _numpy_backend()
    raise ValueError(f"unknown backend {name!r}")
