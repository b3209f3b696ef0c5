"""Kernel backend selection.

The compiled extension is preferred when present; setting the environment
variable ``SPECSENSE_BACKEND=python`` forces the numpy fallback (useful for
debugging and for benchmarking one backend against the other).
"""

import os

from . import _kernels_py

if os.environ.get("SPECSENSE_BACKEND", "").lower() == "python":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

vec_sum = _impl.vec_sum
vec_dot = _impl.vec_dot
l2_norm = _impl.l2_norm
masked_sums = _impl.masked_sums
mean_log = _impl.mean_log
max_window_sum = _impl.max_window_sum
kl_divergence = _impl.kl_divergence
abs_sum_complex = _impl.abs_sum_complex
shift_dots = _impl.shift_dots
eigvalsh_descending = _impl.eigvalsh_descending


def active_backend():
    """Name of the kernel backend in use: "compiled" or "python"."""
    return _impl.BACKEND_NAME
