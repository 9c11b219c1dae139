"""Select the compiled kernel backend, falling back to pure Python.

Set ``BUCKETEER_PURE_PYTHON=1`` to force the fallback.
"""
import os

from bucketeer import _purepy

if os.environ.get("BUCKETEER_PURE_PYTHON"):
    backend = _purepy
else:
    try:
        from bucketeer import _core as backend
    except ImportError:  # extension not built
        backend = _purepy

BACKEND_NAME = "compiled" if backend is not _purepy else "python"
