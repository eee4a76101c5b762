"""Backend selection for the hot kernels.

The compiled Cython module is used when it can be imported; otherwise the
numpy implementations in ``_pykernels`` are used.  Setting the environment
variable ``GRAPHINDEX_PURE_PYTHON=1`` forces the numpy backend.
"""

from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
banded_ldl_inertia = _pykernels.banded_ldl_inertia
chain_products = _pykernels.chain_products

if os.environ.get("GRAPHINDEX_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels  # type: ignore[attr-defined]
    except ImportError:  # pragma: no cover - depends on the build
        pass
    else:
        BACKEND = "cython"
        banded_ldl_inertia = _ckernels.banded_ldl_inertia
        chain_products = _ckernels.chain_products

__all__ = ["BACKEND", "banded_ldl_inertia", "chain_products"]
