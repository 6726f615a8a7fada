"""Kernel dispatch: the compiled Cython core when available, numpy otherwise.

Set ``GMFSIM_PURE_PYTHON=1`` to force the fallback (used by the parity tests
and the benchmark).
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if not os.environ.get("GMFSIM_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _pykernels

topk_indices = _impl.topk_indices
zero_at = _impl.zero_at
split_by_mask = _impl.split_by_mask
sparse_sum = _impl.sparse_sum
mean_pairwise_jaccard = _impl.mean_pairwise_jaccard

__all__ = [
    "BACKEND",
    "topk_indices",
    "zero_at",
    "split_by_mask",
    "sparse_sum",
    "mean_pairwise_jaccard",
]
