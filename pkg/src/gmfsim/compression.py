"""Compression policies and their per-client residual memories."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionError, PreconditionError
from .vectors import Mask, SparseVector, as_dense, keep_count, normalize, split, topk_select


class PolicyKind(str, enum.Enum):
    TOPK = "topk"
    DGC = "dgc"
    GMC = "gmc"
    DGCWGM = "dgcwgm"
    DGCWGMF = "dgcwgmf"

    @classmethod
    def parse(cls, name) -> PolicyKind:
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise PreconditionError(f"unknown policy {name!r}; expected one of {choices}") from None


@dataclass(frozen=True)
class CompressionPolicy:
    kind: PolicyKind
    rate: float = 0.1
    alpha: float = 0.9
    beta: float = 0.9
    tau: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind.parse(self.kind))
        if not 0.0 < self.rate <= 1.0:
            raise PreconditionError(f"rate must be in (0, 1], got {self.rate}")
        if not 0.0 <= self.alpha < 1.0:
            raise PreconditionError(f"alpha must be in [0, 1), got {self.alpha}")
        if not 0.0 <= self.beta < 1.0:
            raise PreconditionError(f"beta must be in [0, 1), got {self.beta}")
        if not 0.0 <= self.tau <= 1.0:
            raise PreconditionError(f"tau must be in [0, 1], got {self.tau}")

    def with_tau(self, tau: float) -> CompressionPolicy:
        return replace(self, tau=float(tau))


@dataclass(frozen=True, eq=False)
class ClientMemory:
    """Momentum ``u``, residual ``v`` and accumulated global momentum ``m``."""

    u: np.ndarray
    v: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        if not (self.u.shape == self.v.shape == self.m.shape):
            raise DimensionError("u, v and m must share one dimension")

    @classmethod
    def zeros(cls, dim: int) -> ClientMemory:
        return cls(np.zeros(dim), np.zeros(dim), np.zeros(dim))

    @property
    def dim(self) -> int:
        return int(self.v.shape[0])

    def __eq__(self, other):
        if not isinstance(other, ClientMemory):
            return NotImplemented
        return all(
            getattr(self, f).tobytes() == getattr(other, f).tobytes() for f in ("u", "v", "m")
        )


def _grad_for(mem: ClientMemory, grad) -> np.ndarray:
    grad = as_dense(grad)
    if grad.shape[0] != mem.dim:
        raise DimensionError(f"gradient dim {grad.shape[0]} != memory dim {mem.dim}")
    return grad


def _dense_from(mem: ClientMemory, g_hat: SparseVector) -> np.ndarray:
    if g_hat.dim != mem.dim:
        raise DimensionError(f"aggregate dim {g_hat.dim} != memory dim {mem.dim}")
    return g_hat.to_dense()


def momentum_correction(mem: ClientMemory, grad, alpha: float) -> ClientMemory:
    grad = _grad_for(mem, grad)
    u = alpha * mem.u + grad
    return ClientMemory(u, mem.v + u, mem.m)


def residual_accumulate(mem: ClientMemory, grad) -> ClientMemory:
    """Plain error feedback (vanilla top-K): ``v += grad``."""
    grad = _grad_for(mem, grad)
    return ClientMemory(mem.u, mem.v + grad, mem.m)


def accumulate_global_momentum(mem: ClientMemory, g_hat_prev: SparseVector, beta: float) -> ClientMemory:
    return ClientMemory(mem.u, mem.v, beta * mem.m + _dense_from(mem, g_hat_prev))


def gmc_compensate(mem: ClientMemory, grad, g_hat_prev: SparseVector, beta: float) -> ClientMemory:
    """Global momentum takes the place of local momentum inside the residual."""
    grad = _grad_for(mem, grad)
    m = beta * mem.m + _dense_from(mem, g_hat_prev)
    return ClientMemory(mem.u, mem.v + grad + m, m)


def gmf_reference(v, m, tau: float) -> np.ndarray:
    """Mask reference ``|(1 - tau) N(v) + tau N(m)|`` with L2 normalisation ``N``."""
    v = as_dense(v)
    m = as_dense(m)
    if v.shape != m.shape:
        raise DimensionError(f"v dim {v.shape[0]} != m dim {m.shape[0]}")
    if not 0.0 <= tau <= 1.0:
        raise PreconditionError(f"tau must be in [0, 1], got {tau}")
    return np.abs((1.0 - tau) * normalize(v) + tau * normalize(m))


def mask_reference(mem: ClientMemory, policy: CompressionPolicy) -> np.ndarray:
    if policy.kind is PolicyKind.DGCWGMF and policy.tau > 0.0:
        return gmf_reference(mem.v, mem.m, policy.tau)
    # tau == 0 ranks by |N(v)|, which orders like |v|; dividing by the norm can
    # merge neighbouring floats into ties, so rank |v| directly to stay exact.
    return np.abs(mem.v)


def compress(mem: ClientMemory, policy: CompressionPolicy) -> tuple[SparseVector, ClientMemory, Mask]:
    """Select coordinates of the residual, transmit them and clear them from memory."""
    keep = keep_count(policy.rate, mem.dim)
    mask = topk_select(mask_reference(mem, policy), keep)
    g, v_rest = split(mem.v, mask)
    _, u_rest = split(mem.u, mask)
    return g, ClientMemory(u_rest, v_rest, mem.m), mask
