"""Kernel backend selection.

The compiled extension is used when importable; set ``TUBECERT_PURE_PYTHON=1``
to force the numpy fallback (handy for debugging and for the benchmark).
"""

import os
from contextlib import contextmanager

from tubecert import _pykernels

pure = _pykernels

if os.environ.get("TUBECERT_PURE_PYTHON", "") not in ("", "0"):
    compiled = None
else:
    try:
        from tubecert import _ckernels as compiled
    except ImportError:  # extension not built
        compiled = None

kernels = compiled if compiled is not None else pure
NAME = "compiled" if compiled is not None else "python"


@contextmanager
def use(name: str):
    """Temporarily route all kernel calls to ``"compiled"`` or ``"python"``."""
    global kernels
    if name == "compiled" and compiled is None:
        raise RuntimeError("compiled kernels are not available")
    prev = kernels
    kernels = compiled if name == "compiled" else pure
    try:
        yield kernels
    finally:
        kernels = prev
