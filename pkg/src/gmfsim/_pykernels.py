"""Pure numpy implementations of the hot kernels.

Every function here has a twin in ``_ckernels.pyx`` and the two must agree
bit for bit; ``tests/test_kernels.py`` checks that.
"""

import numpy as np


def topk_indices(z, keep):
    """Sorted indices of the ``keep`` largest entries of ``z`` (lowest index wins ties)."""
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    if keep >= n:
        return np.arange(n, dtype=np.int64)
    if keep <= 0:
        return np.empty(0, dtype=np.int64)
    thresh = np.partition(z, n - keep)[n - keep]
    above = np.flatnonzero(z > thresh)
    ties = np.flatnonzero(z == thresh)[: keep - above.shape[0]]
    return np.sort(np.concatenate([above, ties])).astype(np.int64)


def zero_at(v, idx):
    out = np.array(v, dtype=np.float64, copy=True)
    out[idx] = 0.0
    return out


def split_by_mask(v, idx):
    """Return (indices, values) of the nonzero masked part and the zeroed remainder."""
    v = np.asarray(v, dtype=np.float64)
    idx = np.asarray(idx, dtype=np.int64)
    vals = v[idx]
    nz = vals != 0.0
    return idx[nz].copy(), vals[nz].copy(), zero_at(v, idx)


def sparse_sum(idx_list, val_list, dim, scale):
    acc = np.zeros(dim, dtype=np.float64)
    touched = np.zeros(dim, dtype=bool)
    for idx, vals in zip(idx_list, val_list):
        # indices are unique within one vector, so fancy-index += is a plain add
        acc[idx] += vals
        touched[idx] = True
    support = np.flatnonzero(touched).astype(np.int64)
    out = acc[support] * scale
    nz = out != 0.0
    return support[nz], out[nz]


def mean_pairwise_jaccard(idx_list):
    k = len(idx_list)
    if k < 2:
        return 1.0
    total = 0.0
    for i in range(k):
        a = idx_list[i]
        for j in range(i + 1, k):
            b = idx_list[j]
            inter = np.intersect1d(a, b, assume_unique=True).shape[0]
            union = a.shape[0] + b.shape[0] - inter
            total += 1.0 if union == 0 else float(inter) / float(union)
    return total / (k * (k - 1) // 2)
