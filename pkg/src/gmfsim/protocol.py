"""Client and server round logic plus the communication ledger."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import codec
from .compression import (
    ClientMemory,
    CompressionPolicy,
    PolicyKind,
    accumulate_global_momentum,
    compress,
    gmc_compensate,
    momentum_correction,
    residual_accumulate,
)
from .errors import DimensionError, GmfError, PreconditionError, RunError
from .model import Batch, ModelSpec, loss_and_grad
from .vectors import Mask, SparseVector, as_dense, mean_mask_jaccard, sparse_sum_scaled


@dataclass(frozen=True, eq=False)
class ClientState:
    client_id: int
    w: np.ndarray
    memory: ClientMemory
    policy: CompressionPolicy

    @classmethod
    def fresh(cls, client_id: int, w_init, policy: CompressionPolicy) -> ClientState:
        w = np.array(w_init, dtype=np.float64, copy=True)
        return cls(client_id, w, ClientMemory.zeros(w.shape[0]), policy)


@dataclass(frozen=True, eq=False)
class ServerState:
    global_momentum: np.ndarray
    beta: float = 0.0
    round: int = 0

    @classmethod
    def fresh(cls, dim: int, beta: float = 0.0) -> ServerState:
        return cls(np.zeros(dim), beta, 0)


@dataclass(frozen=True)
class ClientUpdate:
    """What one client produced in a round."""

    g: SparseVector
    mask: Mask
    loss: float
    state: ClientState


def client_round(
    state: ClientState,
    batch: Batch,
    g_hat_prev: SparseVector,
    tau: float,
    model: ModelSpec,
) -> ClientUpdate:
    """Local gradient, policy-specific compensation, then compression.

    The local model is left untouched; it moves in :func:`apply_global_update`
    once the aggregate is broadcast.
    """
    policy = state.policy.with_tau(tau)
    loss, grad = loss_and_grad(model, state.w, batch)
    if not np.all(np.isfinite(grad)):
        raise RunError("non-finite gradient", client_id=state.client_id)

    mem = state.memory
    kind = policy.kind
    if kind is PolicyKind.TOPK:
        mem = residual_accumulate(mem, grad)
    elif kind is PolicyKind.GMC:
        mem = gmc_compensate(mem, grad, g_hat_prev, policy.beta)
    else:
        mem = momentum_correction(mem, grad, policy.alpha)
        if kind is PolicyKind.DGCWGMF:
            mem = accumulate_global_momentum(mem, g_hat_prev, policy.beta)

    g, mem, mask = compress(mem, policy)
    return ClientUpdate(g, mask, loss, replace(state, memory=mem))


def server_aggregate(
    gs: Sequence[SparseVector], server: ServerState, policy_kind
) -> tuple[SparseVector, ServerState]:
    """Average the client messages (in the given order); DGCwGM broadcasts its momentum."""
    if not gs:
        raise PreconditionError("server_aggregate needs at least one client message")
    base = sparse_sum_scaled(gs, 1.0 / len(gs))
    if base.dim != server.global_momentum.shape[0]:
        raise DimensionError(f"message dim {base.dim} != server dim {server.global_momentum.shape[0]}")
    if PolicyKind.parse(policy_kind) is PolicyKind.DGCWGM:
        momentum = server.beta * server.global_momentum + base.to_dense()
        return SparseVector.from_dense(momentum), ServerState(momentum, server.beta, server.round + 1)
    return base, replace(server, round=server.round + 1)


def apply_global_update(w, g_hat: SparseVector, eta: float) -> np.ndarray:
    w = as_dense(w)
    if w.shape[0] != g_hat.dim:
        raise DimensionError(f"model dim {w.shape[0]} != update dim {g_hat.dim}")
    if not eta > 0:
        raise PreconditionError(f"eta must be positive, got {eta}")
    out = w.copy()
    out[g_hat.indices] -= eta * g_hat.values
    return out


@dataclass(frozen=True)
class RoundLedger:
    round: int
    upload_bytes: tuple
    download_bytes: tuple
    upload_nnz: tuple
    download_nnz: int
    mean_mask_jaccard: float

    @property
    def total_upload(self) -> int:
        return int(sum(self.upload_bytes))

    @property
    def total_download(self) -> int:
        return int(sum(self.download_bytes))


def record_round(
    round_index: int,
    messages: Sequence[bytes],
    broadcast: bytes,
    masks: Sequence[Mask],
    n_clients: int,
    multicast: bool = False,
) -> RoundLedger:
    """Meter one round from the encoded bytes that were actually produced.

    By default the broadcast is charged once per client; ``multicast=True``
    charges it once in total.
    """
    upload = tuple(len(m) for m in messages)
    nnz = tuple((n - codec.HEADER_BYTES) // codec.ENTRY_BYTES for n in upload)
    if multicast:
        download = (len(broadcast),)
    else:
        download = (len(broadcast),) * n_clients
    return RoundLedger(
        round=round_index,
        upload_bytes=upload,
        download_bytes=download,
        upload_nnz=nnz,
        download_nnz=(len(broadcast) - codec.HEADER_BYTES) // codec.ENTRY_BYTES,
        mean_mask_jaccard=mean_mask_jaccard(masks),
    )


@dataclass
class LedgerTotals:
    upload_bytes: int = 0
    download_bytes: int = 0
    rounds: list = field(default_factory=list)

    def add(self, entry: RoundLedger) -> None:
        self.upload_bytes += entry.total_upload
        self.download_bytes += entry.total_download
        self.rounds.append(entry)

    @property
    def total_bytes(self) -> int:
        return self.upload_bytes + self.download_bytes


def run_round(
    clients: Sequence[ClientState],
    server: ServerState,
    batches: Sequence[Batch],
    g_hat_prev: SparseVector,
    tau: float,
    eta: float,
    model: ModelSpec,
    round_index: int = 0,
    multicast: bool = False,
):
    """One synchronous round: every client compresses, the server aggregates in
    client-id order, and every model takes the same step.

    Returns ``(clients', server', g_hat, ledger, updates)``.
    """
    order = sorted(range(len(clients)), key=lambda i: clients[i].client_id)
    updates = [None] * len(clients)
    for i in order:
        try:
            updates[i] = client_round(clients[i], batches[i], g_hat_prev, tau, model)
        except RunError as exc:
            raise RunError(str(exc).split("] ", 1)[-1], round_index, clients[i].client_id) from exc
        except GmfError as exc:
            raise RunError(str(exc), round_index, clients[i].client_id) from exc

    messages = [codec.encode(updates[i].g) for i in order]
    received = [codec.decode(m, model.dim) for m in messages]
    kind = clients[0].policy.kind
    g_hat, server = server_aggregate(received, server, kind)
    broadcast = codec.encode(g_hat)
    g_hat = codec.decode(broadcast, model.dim)

    new_clients = []
    for u in updates:
        st = u.state
        new_clients.append(replace(st, w=apply_global_update(st.w, g_hat, eta)))
    entry = record_round(
        round_index, messages, broadcast, [updates[i].mask for i in order], len(clients), multicast
    )
    return new_clients, server, g_hat, entry, updates
