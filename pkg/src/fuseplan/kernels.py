"""Backend selection for the schedule-derivation kernels.

The compiled extension is preferred when it was built; setting the
environment variable ``FUSEPLAN_PURE_PY=1`` before import forces the
pure-Python implementation (used by the backend-comparison benchmark and
the equivalence tests).
"""

import os

if os.environ.get("FUSEPLAN_PURE_PY") == "1":
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels_cy as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "python"

derive_dim = _impl.derive_dim
solve_update_counts = _impl.solve_update_counts


def get_backends():
    """Both kernel implementations, keyed by name (for benchmarks/tests)."""
    out = {}
    from . import _kernels_py

    out["python"] = _kernels_py
    try:
        from . import _kernels_cy  # type: ignore[attr-defined]

        out["compiled"] = _kernels_cy
    except ImportError:
        pass
    return out
