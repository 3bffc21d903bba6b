"""Hot-loop kernels, compiled when available.

The Cython extension is used if it imports; otherwise the numpy fallback.
Set ``MICROPOLAR_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _ballsum_py

BACKEND = "python"
ball_sums = _ballsum_py.ball_sums

if os.environ.get("MICROPOLAR_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._ext import ballsum as _compiled
    except ImportError:  # extension not built
        pass
    else:
        ball_sums = _compiled.ball_sums
        BACKEND = "cython"

__all__ = ["BACKEND", "ball_sums"]
