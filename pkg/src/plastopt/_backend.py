"""Select the compiled return-map kernel when available.

Set ``PLASTOPT_BACKEND=python`` to force the numpy fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
return_map = _kernels_py.return_map

if os.environ.get("PLASTOPT_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        return_map = _compiled.return_map
        BACKEND = "cython"
