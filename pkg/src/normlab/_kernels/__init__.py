"""Kernel backend selection.

The compiled extension is preferred; the numpy implementation is the
fallback, selected at import time. Set NORMLAB_FORCE_NUMPY=1 to force the
fallback (used by the backend-comparison benchmark and tests).

Exposed functions (identical contracts in both backends):
    lp_gauge(pts, p)    -> (n,) p-norms of the rows of an (n, 2) array
    max_dot(pts, funcs) -> (n,) max_k <row, funcs[k]>
    comp_sum(x)         -> compensated sum
    comp_dot(x, w)      -> compensated sum of products
"""

import os

if os.environ.get("NORMLAB_FORCE_NUMPY"):
    from normlab._kernels._numpy_backend import (  # noqa: F401
        BACKEND,
        comp_dot,
        comp_sum,
        lp_gauge,
        max_dot,
    )
else:
    try:
        from normlab._kernels._cy_backend import (  # noqa: F401
            BACKEND,
            comp_dot,
            comp_sum,
            lp_gauge,
            max_dot,
        )
    except ImportError:
        from normlab._kernels._numpy_backend import (  # noqa: F401
            BACKEND,
            comp_dot,
            comp_sum,
            lp_gauge,
            max_dot,
        )
