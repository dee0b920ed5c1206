"""Backend selection for the hot numerical kernels.

The compiled extension ``_ckernels`` is used when importable; otherwise (or
when the environment variable ``ANONLEARN_PURE_PYTHON`` is set to a non-empty
value other than ``0``) the numpy/scipy fallback in ``_pykernels`` is used.
Both expose ``gaussian_field``, ``sup_distance`` and ``transport``.

``gaussian_field`` always runs on numpy: its cost is dominated by ``exp``,
which numpy vectorizes and the compiled loop does not, so the fallback wins
(see ``benchmarks/bench_kernels.py``).
"""

import os

import numpy as np

from . import _pykernels

_force_python = os.environ.get("ANONLEARN_PURE_PYTHON", "") not in ("", "0")

if _force_python:
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"


def _c(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def gaussian_field(X, Y, w, sigma, amplitude=1.0):
    """Values and x-gradients of ``amplitude * sum_a w_a exp(-|x - y_a|^2 / 2 sigma^2)``."""
    return _pykernels.gaussian_field(_c(X), _c(Y), _c(w), float(sigma), float(amplitude))


def sup_distance(P1, P2):
    """Pairwise max-over-nodes distances between path stacks of shape (n, S, d)."""
    return _impl.sup_distance(_c(P1), _c(P2))


def transport(a, b, C):
    """Exact optimal transport cost; falls back to HiGHS if the simplex stalls."""
    a, b, C = _c(a), _c(b), _c(C)
    cost, status, _ = _impl.transport(a, b, C, -1)
    if status != 0:
        cost, _, _ = _pykernels.transport(a, b, C, -1)
    return cost
