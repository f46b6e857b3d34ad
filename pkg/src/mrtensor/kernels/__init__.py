"""Hot-loop kernels with a compiled core and a numpy/scipy fallback.

The compiled extension is preferred when it imported successfully; set the
environment variable ``MRTENSOR_KERNELS=numpy`` (or ``cython``) before import
to force a backend, or call :func:`use` at runtime.
"""

import os

from . import _numpy_backend

try:
    from . import _coo_kernels as _cython_backend
except ImportError:  # extension not built; pure fallback
    _cython_backend = None

_BACKENDS = {"numpy": _numpy_backend}
if _cython_backend is not None:
    _BACKENDS["cython"] = _cython_backend


def available_backends():
    """Names of the backends importable in this environment."""
    return tuple(sorted(_BACKENDS))


def _initial_backend():
    forced = os.environ.get("MRTENSOR_KERNELS")
    if forced:
        if forced not in _BACKENDS:
            raise ImportError(
                f"MRTENSOR_KERNELS={forced!r} but available backends are "
                f"{available_backends()}"
            )
        return forced
    return "cython" if _cython_backend is not None else "numpy"


_active_name = _initial_backend()
_active = _BACKENDS[_active_name]


def use(name):
    """Switch the active backend; returns the previously active name."""
    global _active, _active_name
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; have {available_backends()}")
    previous = _active_name
    _active_name = name
    _active = _BACKENDS[name]
    return previous


def active_backend():
    return _active_name


def pair_scores(rows, cols, left, right):
    """out[e] = dot(left[rows[e]], right[cols[e]]) for int32 index arrays."""
    return _active.pair_scores(rows, cols, left, right)


def scatter_rows(rows, cols, coeff, source, out):
    """out[rows[e]] += coeff[e] * source[cols[e]], accumulated in entry order."""
    return _active.scatter_rows(rows, cols, coeff, source, out)
