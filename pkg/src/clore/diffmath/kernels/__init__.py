"""Kernel backend selection.

The compiled Cython backend is preferred when its extension module built;
otherwise the pure numpy backend is used. CLORE_KERNELS=py or =c forces a
lane (=c raises if the extension is missing, so benchmarks cannot silently
compare a backend against itself).
"""

import os

from . import py_backend

_forced = os.environ.get("CLORE_KERNELS", "auto").lower()

if _forced == "py":
    backend = py_backend
elif _forced == "c":
    from . import _ckernels as backend  # noqa: F401
else:
    try:
        from . import _ckernels as backend  # type: ignore[no-redef]
    except ImportError:
        backend = py_backend

BACKEND_NAME = backend.BACKEND_NAME
