"""Hot-kernel backend selection.

The per-timestep LSTM gate math and the small 1D convolutions dominate
training time, so they exist twice: a Cython extension (``_fast``) and a
pure numpy reference. The compiled backend is used when the extension
imported successfully; set ``LIPTRAJ_KERNELS=reference`` (or ``compiled``)
to force a choice, e.g. for the benchmark or when debugging numerics.
"""

import os

from . import reference

_requested = os.environ.get("LIPTRAJ_KERNELS", "").strip().lower()

_impl = None
if _requested in ("", "compiled"):
    try:
        from . import _fast as _impl  # noqa: F401
    except ImportError:
        _impl = None
        if _requested == "compiled":
            raise ImportError(
                "LIPTRAJ_KERNELS=compiled but the liptraj.kernels._fast "
                "extension is not built"
            )
if _impl is None:
    _impl = reference

BACKEND = _impl.BACKEND_NAME

lstm_gates_forward = _impl.lstm_gates_forward
lstm_gates_backward = _impl.lstm_gates_backward
conv1d_forward = _impl.conv1d_forward
conv1d_backward = _impl.conv1d_backward


def available_backends():
    """Names of importable backends, reference first."""
    names = ["reference"]
    try:
        from . import _fast  # noqa: F401

        names.append("compiled")
    except ImportError:
        pass
    return names


def get_module(name):
    if name == "reference":
        return reference
    if name == "compiled":
        from . import _fast

        return _fast
    raise ValueError(f"unknown kernel backend {name!r}")
