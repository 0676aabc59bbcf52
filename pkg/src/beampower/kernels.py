"""Hot-loop kernel dispatch.

The numba-compiled kernels are used when numba imports cleanly, unless the
environment variable ``BEAMPOWER_DISABLE_NUMBA`` is set to a truthy value,
in which case the vectorised numpy path is used instead. Both paths agree
bit for bit.
"""
import os

from . import _kernels_numpy

_FLAG = os.environ.get("BEAMPOWER_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG not in ("", "0", "false", "no")

if NUMBA_DISABLED:
    _impl = _kernels_numpy
else:
    try:
        from . import _kernels_numba as _impl
    except ImportError:  # pragma: no cover - numba missing
        _impl = _kernels_numpy

BACKEND = "numpy" if _impl is _kernels_numpy else "numba"

achieved_rate = _impl.achieved_rate
keepalive_power = _impl.keepalive_power
optimal_power = _impl.optimal_power
reward = _impl.reward
gae = _impl.gae


def backend_module(name):
    """Return the kernel module for ``name`` ("numba" or "numpy")."""
    if name == "numpy":
        return _kernels_numpy
    if name == "numba":
        from . import _kernels_numba

        return _kernels_numba
    raise ValueError(f"unknown kernel backend {name!r}")
