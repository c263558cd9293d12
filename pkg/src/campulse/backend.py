"""Kernel backend selection.

The recurrence kernels in :mod:`campulse.kernels` exist twice: a numba
``@njit`` build and a pure-numpy build. ``CAMPULSE_BACKEND`` picks one:

    CAMPULSE_BACKEND=numba   force numba (ImportError if unavailable)
    CAMPULSE_BACKEND=numpy   force the pure-numpy path
    unset / "auto"           numba when importable, else numpy

The flag is read once at import. `bench-scan --backends numba,numpy`
times both builds side by side regardless of the flag.
"""

import os

_FLAG = os.environ.get("CAMPULSE_BACKEND", "auto").strip().lower()

if _FLAG not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"CAMPULSE_BACKEND must be auto|numba|numpy, got {_FLAG!r}"
    )

if _FLAG == "numpy":
    HAVE_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        HAVE_NUMBA = True
    except ImportError:
        if _FLAG == "numba":
            raise
        HAVE_NUMBA = False

ACTIVE = "numba" if HAVE_NUMBA else "numpy"
