"""Backend selection for the banded factorization kernels.

The compiled extension is used when it imports; set ``NILSPECTRA_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

from . import _kernels_py as python

compiled = None
if not os.environ.get("NILSPECTRA_PURE_PYTHON"):
    try:
        from . import _kernels as compiled
    except ImportError:  # extension not built
        compiled = None

backend = compiled if compiled is not None else python
BACKEND = "compiled" if compiled is not None else "python"

band_ldl_inertia_real = backend.band_ldl_inertia_real
band_ldl_inertia_complex = backend.band_ldl_inertia_complex
