"""Hot-loop kernels with a compiled implementation and a pure-Python fallback.

The compiled module is used when it was built and ``INTERDC_PURE_PYTHON`` is
not set to a true value.
"""

import os

from . import _waterfill_py

try:
    from . import _waterfill as _compiled
except ImportError:  # extension not built
    _compiled = None

_force_pure = os.environ.get("INTERDC_PURE_PYTHON", "").lower() in ("1", "true", "yes")

if _compiled is not None and not _force_pure:
    waterfill = _compiled.waterfill
    BACKEND = "compiled"
else:
    waterfill = _waterfill_py.waterfill
    BACKEND = "python"

waterfill_python = _waterfill_py.waterfill
waterfill_compiled = _compiled.waterfill if _compiled is not None else None
