"""Datasets, the label-skew EMD metric and EMD-targeted partitioning."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DatasetError, DimensionError, PartitionError, PreconditionError


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    label_names: tuple = ()

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2 or x.shape[0] < 1:
            raise DatasetError("features must be a non-empty 2-D matrix")
        if y.shape != (x.shape[0],):
            raise DatasetError("need exactly one label per sample")
        if y.min() < 0 or y.max() >= self.n_classes:
            raise DatasetError(f"labels must lie in [0, {self.n_classes})")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def n_samples(self) -> int:
        return int(self.labels.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, idx) -> Dataset:
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.n_classes, self.label_names)


@dataclass
class PartitionSpec:
    assignments: list
    client_class_props: np.ndarray
    achieved_emd: float
    client_emd: np.ndarray = field(default_factory=lambda: np.empty(0))
    mix: float = 0.0
    trace: list = field(default_factory=list)

    @property
    def n_clients(self) -> int:
        return len(self.assignments)


def make_synthetic(
    n_classes: int,
    n_features: int,
    n_samples: int,
    class_separation: float,
    seed,
    n_informative: int | None = None,
    spectrum_decay: float = 0.0,
) -> Dataset:
    """Unit-variance Gaussian blobs whose means form a randomly oriented regular simplex.

    Every pair of class means is ``class_separation`` apart. The simplex lives
    in the first ``n_informative`` features (all of them by default); the rest
    are pure noise. When the informative subspace has fewer dimensions than
    there are classes, the means are random directions of the same radius.
    Labels are balanced round-robin.

    ``spectrum_decay > 0`` scales the features past the informative block by
    ``((j + 1) / n_informative) ** -spectrum_decay``, a decaying spectrum like
    that of image-like inputs. Gradient mass then concentrates on the leading
    coordinates.
    """
    if n_classes < 2:
        raise PreconditionError("n_classes must be >= 2")
    if class_separation < 0:
        raise PreconditionError("class_separation must be >= 0")
    if n_samples < n_classes:
        raise PreconditionError("need at least one sample per class")
    n_inf = n_features if n_informative is None else int(n_informative)
    if not 1 <= n_inf <= n_features:
        raise PreconditionError(f"n_informative must be in [1, {n_features}]")
    rng = np.random.default_rng(seed)
    radius = class_separation / math.sqrt(2.0)
    if n_inf >= n_classes:
        basis, _ = np.linalg.qr(rng.standard_normal((n_inf, n_classes)))
        sub = radius * basis.T
        sub -= sub.mean(axis=0)
    else:
        dirs = rng.standard_normal((n_classes, n_inf))
        sub = radius * dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    means = np.zeros((n_classes, n_features))
    means[:, :n_inf] = sub
    labels = rng.permutation(np.arange(n_samples) % n_classes)
    features = means[labels] + rng.standard_normal((n_samples, n_features))
    if spectrum_decay > 0:
        rank = np.arange(1, n_features + 1, dtype=np.float64) / n_inf
        features *= np.minimum(1.0, rank**-spectrum_decay)
    return Dataset(features, labels, n_classes)


def load_csv(path) -> Dataset:
    """Read ``f0,...,fM,label`` rows. Labels are remapped to ``0..n_classes-1``
    in sorted order; the original labels are kept in ``label_names``."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    if len(header) < 2 or header[-1].strip() != "label":
        raise DatasetError(f"{path}: header must be f0,...,fM,label")
    if not body:
        raise DatasetError(f"{path}: no data rows")
    feats, raw = [], []
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DatasetError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
        values = []
        for col, cell in zip(header, row):
            try:
                values.append(float(cell))
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: column {col!r} is not numeric: {cell!r}") from None
        if not all(math.isfinite(v) for v in values):
            raise DatasetError(f"{path}:{lineno}: non-finite value")
        feats.append(values[:-1])
        raw.append(values[-1])
    raw = np.asarray(raw)
    if np.any(raw != np.round(raw)):
        raise DatasetError(f"{path}: label column must hold integers")
    names, labels = np.unique(raw.astype(np.int64), return_inverse=True)
    return Dataset(np.asarray(feats), labels, len(names), tuple(int(n) for n in names))


def stratified_split(ds: Dataset, test_fraction: float, seed) -> tuple[Dataset, Dataset]:
    """Hold out ``test_fraction`` of every class (at least one sample when the class has two)."""
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in range(ds.n_classes):
        idx = rng.permutation(np.flatnonzero(ds.labels == c))
        n_test = int(round(test_fraction * idx.size))
        if test_fraction > 0 and idx.size >= 2:
            n_test = max(1, n_test)
        test.append(idx[:n_test])
        train.append(idx[n_test:])
    train_idx = np.sort(np.concatenate(train))
    test_idx = np.sort(np.concatenate(test))
    if test_idx.size == 0:
        raise DatasetError("held-out split is empty")
    return ds.subset(train_idx), ds.subset(test_idx)


def emd(client_props, client_weights, global_props) -> float:
    """Weighted mean L1 distance between client and population label distributions."""
    p = np.asarray(client_props, dtype=np.float64)
    w = np.asarray(client_weights, dtype=np.float64)
    g = np.asarray(global_props, dtype=np.float64)
    if p.ndim != 2 or g.ndim != 1 or p.shape[1] != g.shape[0] or w.shape != (p.shape[0],):
        raise DimensionError("client_props must be (K, C), weights (K,), global_props (C,)")
    return float(w @ np.abs(p - g).sum(axis=1))


def _sinkhorn(a, row_sums, col_sums, iters=500):
    a = a.copy()
    for _ in range(iters):
        a *= (row_sums / a.sum(axis=1))[:, None]
        a *= col_sums / a.sum(axis=0)
    return a


def _skewed_props(n_clients, global_props, rng, alpha=0.1):
    """Dirichlet(alpha) client label mixes, balanced so every class keeps its share.

    Each client's largest Dirichlet component is assigned to a dominant class
    drawn round-robin; Sinkhorn scaling then fixes the row sums to 1 and the
    column sums to ``n_clients * global_props`` so the skewed allocation is
    feasible with equal-size shards.
    """
    c = global_props.shape[0]
    draws = rng.dirichlet(np.full(c, alpha), size=n_clients)
    draws = np.maximum(draws, 1e-12)
    dominant = rng.permutation(np.arange(n_clients) % c)
    props = np.empty_like(draws)
    for k in range(n_clients):
        order = np.argsort(-draws[k], kind="stable")
        others = [j for j in rng.permutation(c) if j != dominant[k]]
        props[k, [dominant[k], *others]] = draws[k][order]
    return _sinkhorn(props, np.ones(n_clients), n_clients * global_props)


def _round_counts(target, supply, shard):
    """Integer per-client class counts: rows sum to ``shard``, columns within ``supply``."""
    remaining = supply.astype(np.int64).copy()
    counts = np.zeros(target.shape, dtype=np.int64)
    for k in range(target.shape[0]):
        want = target[k] * shard
        row = np.floor(want).astype(np.int64)
        short = shard - row.sum()
        if short > 0:
            # equal remainders rotate with the client so column totals stay even
            rot = (np.arange(row.size) - k) % row.size
            frac_order = np.lexsort((rot, -np.round(want - row, 12)))
            row[frac_order[:short]] += 1
        row = np.minimum(row, remaining)
        short = shard - row.sum()
        while short > 0:
            room = remaining - row
            if room.sum() == 0:
                raise PartitionError("ran out of samples while filling shards")
            # top up the classes with the most unmet demand first
            need = np.where(room > 0, want - row, -np.inf)
            j = int(np.argmax(need))
            row[j] += 1
            short -= 1
        counts[k] = row
        remaining -= row
    return counts


def _realize(ds, counts, rng):
    pools = [list(rng.permutation(np.flatnonzero(ds.labels == c))) for c in range(ds.n_classes)]
    assignments = []
    for row in counts:
        idx = []
        for c, n in enumerate(row):
            idx.extend(pools[c][:n])
            del pools[c][:n]
        assignments.append(np.sort(np.asarray(idx, dtype=np.int64)))
    return assignments


def _counts_emd(counts):
    sizes = counts.sum(axis=1)
    props = counts / sizes[:, None]
    weights = sizes / sizes.sum()
    global_props = counts.sum(axis=0) / counts.sum()
    per_client = np.abs(props - global_props).sum(axis=1)
    return float(weights @ per_client), props, per_client


def partition_by_target_emd(
    ds: Dataset,
    n_clients: int,
    target_emd: float,
    seed,
    tolerance: float = 0.05,
    alpha: float = 0.1,
    max_iter: int = 50,
) -> PartitionSpec:
    """Equal-size label-skewed shards whose EMD is within ``tolerance`` of the target.

    The client class mix is ``(1 - lam) * global + lam * skewed`` where
    ``skewed`` comes from :func:`_skewed_props`; ``lam`` is bisected on the
    EMD achieved after integer rounding.
    """
    if n_clients < 1 or n_clients > ds.n_samples:
        raise PreconditionError(f"n_clients must be in [1, {ds.n_samples}]")
    emd_max = 2.0 * (1.0 - 1.0 / ds.n_classes)
    if not 0.0 <= target_emd < emd_max:
        raise PreconditionError(f"target_emd must be in [0, {emd_max:.4g})")
    rng = np.random.default_rng(seed)
    supply = ds.class_counts()
    global_props = supply / supply.sum()
    shard = ds.n_samples // n_clients
    if shard < 1:
        raise PartitionError("fewer samples than clients")
    uniform = np.tile(global_props, (n_clients, 1))
    skewed = _skewed_props(n_clients, global_props, rng, alpha)

    def achieved(lam):
        counts = _round_counts((1.0 - lam) * uniform + lam * skewed, supply, shard)
        return _counts_emd(counts), counts

    trace = []
    (lo_emd, *_), lo_counts = achieved(0.0)
    trace.append((0.0, lo_emd))
    best = (abs(lo_emd - target_emd), 0.0, lo_counts)
    (hi_emd, *_), hi_counts = achieved(1.0)
    trace.append((1.0, hi_emd))
    if abs(hi_emd - target_emd) < best[0]:
        best = (abs(hi_emd - target_emd), 1.0, hi_counts)
    if target_emd > hi_emd + tolerance:
        raise PartitionError(
            f"target EMD {target_emd} unreachable: most skewed feasible split reaches {hi_emd:.4f}"
        )
    lo, hi = 0.0, 1.0
    for _ in range(max_iter):
        if best[0] <= tolerance / 10:
            break
        mid = 0.5 * (lo + hi)
        (e, *_), counts = achieved(mid)
        trace.append((mid, e))
        if abs(e - target_emd) < best[0]:
            best = (abs(e - target_emd), mid, counts)
        if e < target_emd:
            lo = mid
        else:
            hi = mid
    err, lam, counts = best
    if err > tolerance:
        raise PartitionError(f"could not reach EMD {target_emd} within {tolerance} (best error {err:.4f})")
    total, props, per_client = _counts_emd(counts)
    assignments = _realize(ds, counts, rng)
    trace.sort()
    return PartitionSpec(assignments, props, total, per_client, lam, trace)
