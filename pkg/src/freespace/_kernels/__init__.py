"""Kernel backend selection.

The two hot loops (per-column stixel DP and the SAD disparity scan) exist
twice: a Cython extension compiled at install time and a pure NumPy
fallback. The compiled extension is used when importable; set
FREESPACE_KERNELS=python or =cython to force a backend. Both backends
implement the same contracts; `benchmarks/bench_kernels.py` compares them.
"""

import os

from freespace._kernels import _pykernels as python_impl

try:
    from freespace._kernels import _cykernels as cython_impl
except ImportError:  # extension not built
    cython_impl = None

_requested = os.environ.get("FREESPACE_KERNELS", "auto").lower()
if _requested in ("python", "py"):
    impl = python_impl
elif _requested in ("cython", "cy"):
    if cython_impl is None:
        raise ImportError("FREESPACE_KERNELS=cython but the compiled extension is unavailable")
    impl = cython_impl
elif _requested == "auto":
    impl = cython_impl if cython_impl is not None else python_impl
else:
    raise ValueError(f"unknown FREESPACE_KERNELS value: {_requested!r}")


def kernel_backend() -> str:
    """Name of the active kernel backend ("cython" or "python")."""
    return "python" if impl is python_impl else "cython"


def available_backends():
    """Mapping backend name -> module, for parity tests and benchmarks."""
    out = {"python": python_impl}
    if cython_impl is not None:
        out["cython"] = cython_impl
    return out
