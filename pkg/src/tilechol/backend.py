"""Backend selection for the hot numeric loops.

The numba implementation is used by default; set TILECHOL_NUMBA=0 to force
the pure-numpy fallback. The fallback is also chosen automatically when
numba is not importable. Both backends expose the same functions:

    potrf_tile, trsm_tile, syrk_tile, gemm_tile, geadd_tile,
    run_ops, replay_residual, etree_fill_count
"""

import os

_flag = os.environ.get("TILECHOL_NUMBA", "1").strip().lower()
if _flag in ("0", "false", "off", "no"):
    from . import _backend_numpy as impl

    BACKEND = "numpy"
else:
    try:
        from . import _backend_numba as impl

        BACKEND = "numba"
    except ImportError:
        from . import _backend_numpy as impl

        BACKEND = "numpy"
