"""Round-loop orchestration, fusion-ratio schedule, metrics and policy comparisons."""

from __future__ import annotations

import csv
import hashlib
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .compression import PolicyKind
from .config import ExperimentConfig, TauSchedule
from .data import Dataset, PartitionSpec, load_csv, make_synthetic, partition_by_target_emd, stratified_split
from .errors import GmfError, RunError
from .model import Batch, BatchSampler, ModelSpec, evaluate, init_params
from .protocol import ClientState, LedgerTotals, RoundLedger, ServerState, run_round
from .vectors import SparseVector

log = logging.getLogger(__name__)

CSV_HEADER = [
    "round",
    "policy",
    "tau",
    "train_loss",
    "test_accuracy",
    "upload_bytes_cum",
    "download_bytes_cum",
    "broadcast_nnz",
    "mean_mask_jaccard",
]


def tau_at(schedule: TauSchedule, round_index: int, n_rounds: int) -> float:
    """Staircase from ``start`` to ``end`` in ``n_steps`` evenly spaced steps."""
    if not 0 <= round_index < n_rounds:
        raise ValueError(f"round {round_index} outside [0, {n_rounds})")
    if schedule.n_steps <= 1 or schedule.start == schedule.end:
        return float(schedule.start)
    step = min(schedule.n_steps - 1, round_index * schedule.n_steps // n_rounds)
    if step == schedule.n_steps - 1:
        return float(schedule.end)
    return schedule.start + step * (schedule.end - schedule.start) / (schedule.n_steps - 1)


def eta_at(config: ExperimentConfig, round_index: int) -> float:
    if config.eta_decay is None:
        return config.eta
    return config.eta * config.eta_decay.factor ** (round_index // config.eta_decay.every)


@dataclass(frozen=True)
class MetricsRow:
    round: int
    policy: str
    tau: float
    train_loss: float
    test_accuracy: float
    upload_bytes_cum: int
    download_bytes_cum: int
    broadcast_nnz: int
    mean_mask_jaccard: float


@dataclass
class Environment:
    """Everything that must be shared across policies for a fair comparison."""

    train: Dataset
    test: Dataset
    partition: PartitionSpec
    model: ModelSpec
    w_init: np.ndarray


@dataclass
class RunResult:
    config: ExperimentConfig
    rows: list
    ledgers: list
    final_w: np.ndarray
    message_digests: list = field(default_factory=list)

    @property
    def final_accuracy(self) -> float:
        return self.rows[-1].test_accuracy

    @property
    def upload_bytes(self) -> int:
        return self.rows[-1].upload_bytes_cum

    @property
    def download_bytes(self) -> int:
        return self.rows[-1].download_bytes_cum

    @property
    def total_bytes(self) -> int:
        return self.upload_bytes + self.download_bytes


def load_dataset(config: ExperimentConfig) -> Dataset:
    ds = config.task.dataset
    if ds.source == "csv":
        return load_csv(ds.path)
    return make_synthetic(
        ds.n_classes, ds.n_features, ds.n_samples, ds.class_separation, config.seed, ds.n_informative, ds.spectrum_decay
    )


def prepare(config: ExperimentConfig) -> Environment:
    full = load_dataset(config)
    train, test = stratified_split(full, config.task.dataset.test_fraction, (config.seed, 1))
    partition = partition_by_target_emd(train, config.n_clients, config.target_emd, (config.seed, 2))
    model = config.task.model_spec(full.n_features, full.n_classes)
    w_init = init_params(model, (config.seed, 3))
    log.info(
        "prepared %d train / %d test samples, %d clients, EMD %.4f, d=%d",
        train.n_samples, test.n_samples, config.n_clients, partition.achieved_emd, model.dim,
    )
    return Environment(train, test, partition, model, w_init)


def run_experiment(config: ExperimentConfig, env: Environment | None = None) -> RunResult:
    """Run the synchronous federated loop for ``config.n_rounds`` rounds."""
    if env is None:
        env = prepare(config)
    model = env.model
    d = model.dim
    policy = config.policy.build(tau_at(config.tau_schedule, 0, config.n_rounds))
    clients = [ClientState.fresh(k, env.w_init, policy) for k in range(config.n_clients)]
    samplers = [
        BatchSampler(idx, config.batch_size, np.random.default_rng((config.seed, 4, k)))
        for k, idx in enumerate(env.partition.assignments)
    ]
    server = ServerState.fresh(d, config.policy.beta if policy.kind is PolicyKind.DGCWGM else 0.0)
    g_hat = SparseVector.empty(d)
    totals = LedgerTotals()
    rows, digests = [], []

    for t in range(config.n_rounds):
        tau = tau_at(config.tau_schedule, t, config.n_rounds)
        batches = []
        for s in samplers:
            idx = s.next()
            batches.append(Batch(env.train.features[idx], env.train.labels[idx]))
        try:
            clients, server, g_hat, entry, updates = run_round(
                clients, server, batches, g_hat, tau, eta_at(config, t), model, t,
                config.multicast_download,
            )
        except RunError:
            raise
        except GmfError as exc:
            raise RunError(str(exc), t) from exc
        totals.add(entry)
        w = clients[0].w
        if not np.all(np.isfinite(w)):
            raise RunError("model parameters became non-finite", t)
        acc, _ = evaluate(model, w, env.test)
        h = hashlib.sha256()
        for u in updates:
            h.update(u.g.indices.tobytes())
            h.update(u.g.values.tobytes())
        h.update(g_hat.indices.tobytes())
        h.update(g_hat.values.tobytes())
        digests.append(h.hexdigest())
        rows.append(
            MetricsRow(
                round=t,
                policy=policy.kind.value,
                tau=tau,
                train_loss=float(np.mean([u.loss for u in updates])),
                test_accuracy=acc,
                upload_bytes_cum=totals.upload_bytes,
                download_bytes_cum=totals.download_bytes,
                broadcast_nnz=entry.download_nnz,
                mean_mask_jaccard=entry.mean_mask_jaccard,
            )
        )
        if t % 20 == 0 or t == config.n_rounds - 1:
            log.debug("round %d tau=%.3f acc=%.4f bytes=%d", t, tau, acc, totals.total_bytes)

    if config.output_path:
        emit_csv(rows, config.output_path)
    return RunResult(config, rows, totals.rounds, clients[0].w.copy(), digests)


def _policy_config(base: ExperimentConfig, policy) -> ExperimentConfig:
    if isinstance(policy, dict):
        return base.with_policy(**policy)
    return base.with_policy(kind=PolicyKind.parse(policy).value)


@dataclass(frozen=True)
class ComparisonRow:
    policy: str
    final_accuracy: float
    delta_accuracy: float
    upload_bytes: int
    download_bytes: int
    total_bytes: int
    delta_bytes: int
    delta_bytes_ratio: float


def compare_policies(base_config: ExperimentConfig, policies: Sequence, env: Environment | None = None):
    """Run every policy on one shared partition and ``W_init``; the first is the baseline.

    Returns ``(table, results)``.
    """
    if not policies:
        raise ValueError("compare_policies needs at least one policy")
    if env is None:
        env = prepare(base_config)
    results = [run_experiment(_policy_config(base_config, p).with_overrides(output_path=None), env) for p in policies]
    base = results[0]
    table = [
        ComparisonRow(
            policy=r.config.policy.kind,
            final_accuracy=r.final_accuracy,
            delta_accuracy=r.final_accuracy - base.final_accuracy,
            upload_bytes=r.upload_bytes,
            download_bytes=r.download_bytes,
            total_bytes=r.total_bytes,
            delta_bytes=r.total_bytes - base.total_bytes,
            delta_bytes_ratio=(r.total_bytes - base.total_bytes) / base.total_bytes,
        )
        for r in results
    ]
    return table, results


def sweep_rates(base_config: ExperimentConfig, policies: Sequence, rates: Sequence[float], env=None) -> dict:
    """``{(policy, rate): RunResult}`` over one shared environment."""
    if env is None:
        env = prepare(base_config)
    out = {}
    for p in policies:
        for rate in rates:
            cfg = _policy_config(base_config, p).with_overrides(**{"policy.rate": rate, "output_path": None})
            out[(cfg.policy.kind, rate)] = run_experiment(cfg, env)
    return out


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def emit_csv(rows: Sequence[MetricsRow], path) -> None:
    if not rows:
        raise ValueError("no rows to write")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow([_fmt(getattr(r, name)) for name in CSV_HEADER])


PLOT_HEADER = [
    "policy",
    "compression_rate",
    "final_test_accuracy",
    "upload_bytes",
    "download_bytes",
    "total_bytes",
]


def emit_plot_data(sweep: dict, path) -> None:
    """One line per (policy, rate): the accuracy/overhead-vs-rate series."""
    if not sweep:
        raise ValueError("no runs to write")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PLOT_HEADER)
        for (policy, rate), res in sorted(sweep.items()):
            writer.writerow(
                [policy, _fmt(float(rate)), _fmt(res.final_accuracy), res.upload_bytes, res.download_bytes, res.total_bytes]
            )


def format_table(table: Sequence[ComparisonRow]) -> str:
    head = f"{'policy':<10} {'top1_acc':>9} {'d_acc':>9} {'total_bytes':>13} {'d_bytes':>12} {'d_bytes%':>9}"
    lines = [head, "-" * len(head)]
    for r in table:
        lines.append(
            f"{r.policy:<10} {r.final_accuracy:>9.4f} {r.delta_accuracy:>+9.4f} "
            f"{r.total_bytes:>13d} {r.delta_bytes:>+12d} {100 * r.delta_bytes_ratio:>+8.1f}%"
        )
    return "\n".join(lines)


def write_comparison_csv(table: Sequence[ComparisonRow], path) -> None:
    names = [f.name for f in fields(ComparisonRow)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for r in table:
            writer.writerow([_fmt(getattr(r, n)) for n in names])
