"""Federated learning simulator for sparse gradient compression with Global Momentum Fusion."""

from .codec import decode, encode
from .compression import (
    ClientMemory,
    CompressionPolicy,
    PolicyKind,
    accumulate_global_momentum,
    compress,
    gmc_compensate,
    gmf_reference,
    momentum_correction,
)
from .config import ExperimentConfig, load_config
from .data import Dataset, PartitionSpec, emd, load_csv, make_synthetic, partition_by_target_emd
from .harness import compare_policies, emit_csv, emit_plot_data, run_experiment, sweep_rates, tau_at
from .kernels import BACKEND
from .model import ModelKind, ModelSpec, evaluate, init_params, loss_and_grad
from .protocol import (
    ClientState,
    RoundLedger,
    ServerState,
    apply_global_update,
    client_round,
    record_round,
    server_aggregate,
)
from .vectors import (
    Mask,
    SparseVector,
    apply_mask,
    complement_mask_zero,
    keep_count,
    normalize,
    sparse_sum_scaled,
    topk_select,
)

__version__ = "0.1.0"
