"""Backend selection for the numeric inner loops.

The compiled extension is used when it imports; set ``SHIFTDESIGN_PURE_PYTHON=1``
to force the fallback.
"""

import os

from . import _kernels_py

BACKENDS = {"python": _kernels_py}

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None
else:
    BACKENDS["compiled"] = _compiled

if _compiled is not None and os.environ.get("SHIFTDESIGN_PURE_PYTHON", "") in ("", "0"):
    BACKEND = "compiled"
else:
    BACKEND = "python"


def get_backend(name=None):
    """Return the kernel module called ``name`` (default: the active one)."""
    name = BACKEND if name is None else name
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available; have {sorted(BACKENDS)}") from None


def fill_block_columns(suffixes, prefix, weights, receivers, senders, out, backend=None):
    get_backend(backend).fill_block_columns(suffixes, prefix, weights, receivers, senders, out)


def propagate_round(indptr, indices, data, prev, out, backend=None):
    get_backend(backend).propagate_round(indptr, indices, data, prev, out)
