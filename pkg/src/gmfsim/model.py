"""Small softmax classifiers with hand-written backprop over a flat parameter vector.

Flattening order is layer-major, row-major inside each layer:

* ``logreg``: ``W (n_features x n_classes)``, ``b (n_classes)``
* ``mlp1``:   ``W1 (n_features x hidden)``, ``b1 (hidden)``,
  ``W2 (hidden x n_classes)``, ``b2 (n_classes)``; hidden activation is tanh.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, GmfError, PreconditionError


class ModelKind(str, enum.Enum):
    LOGREG = "logreg"
    MLP1 = "mlp1"


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    n_features: int
    n_classes: int
    hidden_units: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(str(getattr(self.kind, "value", self.kind)).lower()))
        if self.n_features < 1 or self.n_classes < 2:
            raise PreconditionError("need n_features >= 1 and n_classes >= 2")
        if self.kind is ModelKind.MLP1 and self.hidden_units < 1:
            raise PreconditionError("mlp1 needs hidden_units >= 1")

    @property
    def shapes(self) -> list[tuple[int, ...]]:
        if self.kind is ModelKind.LOGREG:
            return [(self.n_features, self.n_classes), (self.n_classes,)]
        h = self.hidden_units
        return [(self.n_features, h), (h,), (h, self.n_classes), (self.n_classes,)]

    @property
    def dim(self) -> int:
        return int(sum(np.prod(s) for s in self.shapes))


@dataclass(frozen=True)
class Batch:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise PreconditionError("a batch needs at least one sample")
        if self.labels.shape != (self.features.shape[0],):
            raise DimensionError("labels must have one entry per sample")


def unflatten(spec: ModelSpec, w) -> list[np.ndarray]:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (spec.dim,):
        raise DimensionError(f"parameter vector has dim {w.shape}, model needs {spec.dim}")
    parts, pos = [], 0
    for shape in spec.shapes:
        n = int(np.prod(shape))
        parts.append(w[pos : pos + n].reshape(shape))
        pos += n
    return parts


def init_params(spec: ModelSpec, seed) -> np.ndarray:
    """Glorot-uniform weights and zero biases, flattened."""
    rng = np.random.default_rng(seed)
    parts = []
    for shape in spec.shapes:
        if len(shape) == 2:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            parts.append(rng.uniform(-limit, limit, size=shape).ravel())
        else:
            parts.append(np.zeros(shape))
    return np.concatenate(parts)


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _forward(spec, params, x):
    if spec.kind is ModelKind.LOGREG:
        w, b = params
        return x @ w + b, None
    w1, b1, w2, b2 = params
    hidden = np.tanh(x @ w1 + b1)
    return hidden @ w2 + b2, hidden


def loss_and_grad(spec: ModelSpec, w, batch: Batch) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its exact gradient."""
    params = unflatten(spec, w)
    x = np.asarray(batch.features, dtype=np.float64)
    y = np.asarray(batch.labels)
    if x.shape[1] != spec.n_features:
        raise DimensionError(f"batch has {x.shape[1]} features, model needs {spec.n_features}")
    n = x.shape[0]
    logits, hidden = _forward(spec, params, x)
    logp = _log_softmax(logits)
    loss = float(-logp[np.arange(n), y].mean())
    if not np.isfinite(loss):
        raise GmfError("non-finite loss")

    dlogits = np.exp(logp)
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    if spec.kind is ModelKind.LOGREG:
        grads = [x.T @ dlogits, dlogits.sum(axis=0)]
    else:
        w2 = params[2]
        dpre = (dlogits @ w2.T) * (1.0 - hidden**2)
        grads = [x.T @ dpre, dpre.sum(axis=0), hidden.T @ dlogits, dlogits.sum(axis=0)]
    return loss, np.concatenate([g.ravel() for g in grads])


def predict(spec: ModelSpec, w, features) -> np.ndarray:
    logits, _ = _forward(spec, unflatten(spec, w), np.asarray(features, dtype=np.float64))
    # argmax picks the first maximum, so exact ties go to the lowest class
    return np.argmax(logits, axis=1)


def evaluate(spec: ModelSpec, w, ds) -> tuple[float, float]:
    """Top-1 accuracy and mean cross-entropy over a whole dataset."""
    x = np.asarray(ds.features, dtype=np.float64)
    y = np.asarray(ds.labels)
    if x.shape[0] == 0:
        raise PreconditionError("cannot evaluate on an empty dataset")
    logits, _ = _forward(spec, unflatten(spec, w), x)
    logp = _log_softmax(logits)
    acc = float(np.mean(np.argmax(logits, axis=1) == y))
    loss = float(-logp[np.arange(x.shape[0]), y].mean())
    return acc, loss


class BatchSampler:
    """Cycles through a client's local indices, reshuffling at every epoch."""

    def __init__(self, indices, batch_size: int, rng: np.random.Generator):
        self.indices = np.asarray(indices, dtype=np.int64)
        if self.indices.size == 0:
            raise PreconditionError("cannot sample from an empty shard")
        self.batch_size = min(batch_size, self.indices.size)
        self.rng = rng
        self._order = self.rng.permutation(self.indices)
        self._pos = 0

    def next(self) -> np.ndarray:
        if self._pos + self.batch_size > self._order.size:
            self._order = self.rng.permutation(self.indices)
            self._pos = 0
        out = self._order[self._pos : self._pos + self.batch_size]
        self._pos += self.batch_size
        return out
