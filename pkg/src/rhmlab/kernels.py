"""Backend selection for the per-layer BP sums.

The compiled extension is used when it imports; otherwise (or when
``RHMLAB_PURE_PYTHON=1``) the numpy implementation is used.
"""

import os

from . import _bp_numpy

_BACKENDS = {"numpy": _bp_numpy}

try:
    from . import _bp_ext

    _BACKENDS["cython"] = _bp_ext
except ImportError:  # extension not built
    pass


def available_backends():
    return sorted(_BACKENDS)


def get_backend(name=None):
    if name is None:
        name = BACKEND
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {name!r}") from None


if os.environ.get("RHMLAB_PURE_PYTHON") == "1" or "cython" not in _BACKENDS:
    BACKEND = "numpy"
else:
    BACKEND = "cython"

upward_layer = get_backend().upward_layer
downward_layer = get_backend().downward_layer
