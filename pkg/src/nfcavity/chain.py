"""Backend selection for the matrix-chain kernel.

The compiled extension is used when it imports; set ``NFCAVITY_BACKEND=python``
to force the numpy fallback.
"""

import os

from . import _chain_py

BACKENDS = {"python": _chain_py.chain_response}

try:
    from ._chain import chain_response as _compiled
except ImportError:  # extension not built
    _compiled = None
else:
    BACKENDS["compiled"] = _compiled

_requested = os.environ.get("NFCAVITY_BACKEND", "").strip().lower()
if _requested and _requested not in BACKENDS:
    raise ImportError(f"NFCAVITY_BACKEND={_requested!r} unavailable; have {sorted(BACKENDS)}")

BACKEND = _requested or ("compiled" if _compiled is not None else "python")
chain_response = BACKENDS[BACKEND]
