"""Conv kernel backend selection.

The compiled direct-loop core is preferred when built; the numpy im2col
path is the pure-Python fallback.  MCDN_KERNELS=py|cy forces one side.
Both backends agree to 1e-6 relative error (see tests and the benchmark
under benchmarks/).
"""

import os

from . import _conv_np

try:
    from . import _conv_cy
except ImportError:
    _conv_cy = None

_forced = os.environ.get("MCDN_KERNELS", "").strip().lower()
if _forced in ("py", "numpy"):
    _impl = _conv_np
    BACKEND = "numpy"
elif _forced in ("cy", "compiled"):
    if _conv_cy is None:
        raise ImportError("MCDN_KERNELS=cy requested but the compiled kernels are not built")
    _impl = _conv_cy
    BACKEND = "compiled"
elif _forced:
    raise ValueError(f"unknown MCDN_KERNELS value: {_forced!r} (expected 'py' or 'cy')")
else:
    _impl = _conv_cy if _conv_cy is not None else _conv_np
    BACKEND = "compiled" if _conv_cy is not None else "numpy"


def available_backends():
    """Importable kernel backends by name."""
    out = {"numpy": _conv_np}
    if _conv_cy is not None:
        out["compiled"] = _conv_cy
    return out


def conv2d_forward(x, w, b, stride, pad):
    return _impl.conv2d_forward(x, w, b, stride, pad)


def conv2d_backward(gy, x, w, stride, pad):
    return _impl.conv2d_backward(gy, x, w, stride, pad)
