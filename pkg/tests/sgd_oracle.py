"""Plain synchronous SGD written without any gmfsim compression or protocol code.

With every coordinate sent and no momentum, each federated policy must reduce
to this loop.
"""

import numpy as np


def softmax_regression_grad(w_flat, x, y, n_classes):
    n_features = x.shape[1]
    weights = w_flat[: n_features * n_classes].reshape(n_features, n_classes)
    bias = w_flat[n_features * n_classes :]
    z = x @ weights + bias
    z = z - z.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    p[np.arange(len(y)), y] -= 1.0
    p /= len(y)
    return np.concatenate([(x.T @ p).ravel(), p.sum(axis=0)])


class EpochShuffler:
    def __init__(self, pool, size, seed):
        self.pool, self.size = np.asarray(pool), min(size, len(pool))
        self.rng = np.random.default_rng(seed)
        self.queue = []

    def draw(self):
        if len(self.queue) < self.size:
            self.queue = list(self.rng.permutation(self.pool))
        out, self.queue = self.queue[: self.size], self.queue[self.size :]
        return np.array(out)


def federated_sgd(features, labels, n_classes, shards, w0, eta, rounds, batch_size, seed):
    shufflers = [EpochShuffler(s, batch_size, (seed, 4, k)) for k, s in enumerate(shards)]
    w = np.array(w0, dtype=float)
    trajectory = []
    for _ in range(rounds):
        grads = []
        for sh in shufflers:
            idx = sh.draw()
            grads.append(softmax_regression_grad(w, features[idx], labels[idx], n_classes))
        w = w - eta * np.mean(grads, axis=0)
        trajectory.append(w)
    return trajectory
