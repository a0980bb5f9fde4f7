"""Hot-kernel dispatch.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``TEXTLESS_PURE_PYTHON=1`` to force the fallback.
"""
import os

from textless import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("TEXTLESS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from textless import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

dtw_accumulate = _impl.dtw_accumulate
levenshtein = _impl.levenshtein
ar_generate = _impl.ar_generate


def implementations():
    """Return ``{name: module}`` for every kernel backend importable here."""
    impls = {"python": _kernels_py}
    try:
        from textless import _kernels as compiled
    except ImportError:
        pass
    else:
        impls["cython"] = compiled
    return impls
