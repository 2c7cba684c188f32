"""Backend selection for the collision kernels.

The compiled extension is used when importable; ``MQPLAN_PURE_PYTHON=1``
forces the pure-Python twin. Both expose the same three functions.
"""

from __future__ import annotations

import os

from mqplan._kernels_py import PART_OS, PART_RO, PART_RS

if os.environ.get("MQPLAN_PURE_PYTHON", "") not in ("", "0"):
    from mqplan import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from mqplan import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        from mqplan import _kernels_py as _impl

        BACKEND = "python"

rounded_overlap = _impl.rounded_overlap
first_collision = _impl.first_collision
state_flags = _impl.state_flags

__all__ = [
    "BACKEND",
    "PART_OS",
    "PART_RO",
    "PART_RS",
    "first_collision",
    "rounded_overlap",
    "state_flags",
]
