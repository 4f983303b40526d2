"""Hot-loop backend selection.

The Cython extension is used when it was built; otherwise the pure-Python
twins take over. Set ``RYDFRET_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
numerov_inward = _kernels_py.numerov_inward
rk4_propagate = _kernels_py.rk4_propagate

if os.environ.get("RYDFRET_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        numerov_inward = _kernels.numerov_inward
        rk4_propagate = _kernels.rk4_propagate
