"""Kernel backend selection.

The compiled extension ``_ckernels`` is used when importable; setting the
environment variable ``DEGENSYS_PURE_PYTHON=1`` forces the NumPy fallback.
``BACKEND`` names the active one.
"""
from __future__ import annotations

import os

from . import _pykernels

python_backend = _pykernels

if os.environ.get("DEGENSYS_PURE_PYTHON", "").strip() not in ("", "0"):
    compiled_backend = None
else:
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "compiled" if compiled_backend is not None else "python"

assemble_csr = _active.assemble_csr
csr_matvec = _active.csr_matvec
pcg = _active.pcg
