"""Kernel backend selection.

The compiled Cython extension is preferred when present; the numpy reference
implementation is the fallback. ``MIMODET_BACKEND=py`` forces the fallback,
``MIMODET_BACKEND=c`` errors if the extension is unavailable (useful for
benchmarks and CI).
"""

import os

from . import pyref

_choice = os.environ.get("MIMODET_BACKEND", "auto").lower()

if _choice in ("py", "python"):
    _impl = pyref
    BACKEND = "python"
elif _choice in ("c", "cext"):
    from . import _cext as _impl  # noqa: F401  (ImportError is the contract)

    BACKEND = "cext"
else:
    try:
        from . import _cext as _impl

        BACKEND = "cext"
    except ImportError:
        _impl = pyref
        BACKEND = "python"

ml_search = _impl.ml_search
pam_posterior = _impl.pam_posterior
