"""Round-based federated training over graph-classification clients.

One process plays every role: per round the coordinator broadcasts each
cluster's model, clients train locally and return parameter deltas, clusters
aggregate size-weighted, and (for the clustered algorithms) split when the
criteria fire. Everything is deterministic given the run seed: client RNGs
derive from (run seed, client seed) and no other randomness exists.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .clustering import (
    ClusterConfig,
    ClusterState,
    SplitEvent,
    bipartition_cluster,
    cluster_aggregate,
    cosine_matrix,
    delta_stats,
    split_check,
    to_cut_weights,
)
from .dtwseries import NormWindow, dtw_matrix, dtw_to_cut_weights, push_norms
from .errors import ArgumentError, ClientSkip
from .gnn import (
    AdamState,
    GinModel,
    adam_step,
    cross_entropy,
    gin_forward,
    gin_loss_and_grad,
    init_adam,
    init_gin,
)
from .graphs import Graph

logger = logging.getLogger(__name__)

ALGORITHMS = ("selftrain", "fedavg", "fedprox", "gcfl", "gcflplus")

_INIT_SEED_TAG = 1009
_CLIENT_SEED_TAG = 2003


@dataclass
class ClientState:
    """A client's local split plus its training-time state."""

    id: int
    train_graphs: list[Graph]
    test_graphs: list[Graph]
    seed: int = 0
    params: Optional[GinModel] = None
    optimizer: Optional[AdamState] = None
    last_delta: Optional[np.ndarray] = None
    rng: Optional[np.random.Generator] = None
    last_train_loss: float = float("nan")

    @property
    def data_size(self) -> int:
        return len(self.train_graphs)


@dataclass
class RunConfig:
    seed: int = 0
    epochs: int = 1
    batch_size: int = 128
    lr: float = 1e-3
    weight_decay: float = 5e-4
    hidden: int = 64
    num_layers: int = 3
    prox_mu: float = 0.01
    cluster: Optional[ClusterConfig] = None
    window_length: int = 10
    standardize: bool = False


@dataclass
class ClientRound:
    client_id: int
    cluster_id: int
    train_loss: float
    test_loss: float
    test_acc: float
    grad_norm: float


@dataclass
class RoundReport:
    round_index: int
    entries: list[ClientRound]


@dataclass
class WindowDump:
    round_index: int
    parent: int
    rows: dict[int, list[float]]


@dataclass
class RunResult:
    algorithm: str
    reports: list[RoundReport]
    split_events: list[SplitEvent]
    assignments: list[tuple[int, int, tuple[int, ...]]]  # (round, cluster, members)
    final_clusters: list[ClusterState]
    final_accuracy: dict[int, float]
    window_dumps: list[WindowDump] = field(default_factory=list)


def local_train(
    client: ClientState,
    start_params: np.ndarray,
    epochs: int,
    batch_size: int = 128,
    prox: Optional[tuple[float, np.ndarray]] = None,
) -> np.ndarray:
    """Train locally from ``start_params`` and return the parameter delta.

    Runs ``epochs`` passes of mini-batch Adam with a seeded shuffle. When
    ``prox=(mu, anchor)`` is given, each batch objective gains
    (mu/2)*||theta - anchor||^2. Returns final minus start parameters.
    """
    if not client.train_graphs:
        raise ClientSkip(f"client {client.id} has no training graphs")
    if epochs < 0:
        raise ArgumentError("epochs must be >= 0")
    model = client.params
    opt = client.optimizer
    params = np.asarray(start_params, dtype=np.float64).copy()
    model.load_flat(params)
    labels_all = [g.label for g in client.train_graphs]
    losses = []
    for _ in range(epochs):
        order = client.rng.permutation(len(client.train_graphs))
        for lo in range(0, len(order), batch_size):
            idx = order[lo:lo + batch_size]
            batch = [client.train_graphs[i] for i in idx]
            batch_labels = [labels_all[i] for i in idx]
            loss, grad = gin_loss_and_grad(model, batch, batch_labels)
            if prox is not None and prox[0] != 0.0:
                mu, anchor = prox
                diff = params - anchor
                loss += 0.5 * mu * float(diff @ diff)
                grad = grad + mu * diff
            losses.append(loss)
            params = adam_step(opt, params, grad)
            model.load_flat(params)
    client.last_delta = params - np.asarray(start_params, dtype=np.float64)
    client.last_train_loss = float(np.mean(losses)) if losses else float("nan")
    return client.last_delta


def fedavg_aggregate(deltas: list[np.ndarray], sizes: list[int], base: np.ndarray) -> np.ndarray:
    """base + size-weighted mean of the deltas."""
    if not deltas or len(deltas) != len(sizes):
        raise ArgumentError("need one size per delta and at least one delta")
    weights = np.asarray(sizes, dtype=np.float64)
    total = weights.sum()
    if total <= 0:
        raise ArgumentError("total size must be positive")
    weights = weights / total
    assert abs(weights.sum() - 1.0) < 1e-9
    return base + sum(w * d for w, d in zip(weights, deltas))


def evaluate_client(client: ClientState, params: np.ndarray) -> tuple[float, float]:
    """Mean test cross-entropy and accuracy under the given parameters."""
    if not client.test_graphs:
        return float("nan"), float("nan")
    client.params.load_flat(params)
    losses = []
    correct = 0
    for g in client.test_graphs:
        logits = gin_forward(client.params, g)
        losses.append(cross_entropy(logits, g.label))
        correct += int(np.argmax(logits) == g.label)
    return float(np.mean(losses)), correct / len(client.test_graphs)


def infer_dims(clients: list[ClientState]) -> tuple[int, int]:
    """Shared (input_dim, output_dim) over all client graphs."""
    dims = set()
    max_label = 0
    for c in clients:
        for g in c.train_graphs + c.test_graphs:
            dims.add(g.feat_dim)
            max_label = max(max_label, g.label)
    if len(dims) != 1:
        raise ArgumentError(f"clients disagree on feature dim: {sorted(dims)}; unify first")
    return dims.pop(), max(2, max_label + 1)


def run_federation(
    clients: list[ClientState],
    algorithm: str,
    rounds: int,
    config: RunConfig,
) -> RunResult:
    """Run one federated experiment and record per-round client metrics.

    Per round: broadcast each cluster's model, train all members locally,
    record the update norms, aggregate per cluster, evaluate every client on
    its held-out split, then (gcfl/gcflplus) check the split criteria and
    bipartition clusters whose criteria fire; both children inherit the
    freshly aggregated parent model and start the next round from it.
    """
    if algorithm not in ALGORITHMS:
        raise ArgumentError(f"unknown algorithm {algorithm!r}")
    if not clients:
        raise ArgumentError("need at least one client")
    if algorithm in ("gcfl", "gcflplus") and config.cluster is None:
        raise ArgumentError(f"{algorithm} requires a ClusterConfig")

    clients = sorted(clients, key=lambda c: c.id)
    by_id = {c.id: c for c in clients}
    if len(by_id) != len(clients):
        raise ArgumentError("client ids must be unique")
    input_dim, output_dim = infer_dims(clients)

    init_rng = np.random.default_rng(np.random.SeedSequence([config.seed, _INIT_SEED_TAG]))
    init_model = init_gin(input_dim, output_dim, config.hidden, config.num_layers, init_rng)
    init_flat = init_model.flatten()
    num_params = len(init_flat)

    for c in clients:
        c.params = GinModel(input_dim, output_dim, config.hidden, config.num_layers)
        c.params.load_flat(init_flat)
        c.optimizer = init_adam(num_params, config.lr, config.weight_decay)
        c.rng = np.random.default_rng(
            np.random.SeedSequence([config.seed, _CLIENT_SEED_TAG, c.seed])
        )
        c.last_delta = np.zeros(num_params)
        c.last_train_loss = float("nan")

    if algorithm == "selftrain":
        clusters = [ClusterState(i, [c.id], init_flat.copy()) for i, c in enumerate(clients)]
    else:
        clusters = [ClusterState(0, [c.id for c in clients], init_flat.copy())]
    next_cluster_id = len(clusters)

    window = NormWindow(config.window_length)
    reports: list[RoundReport] = []
    split_events: list[SplitEvent] = []
    assignments: list[tuple[int, int, tuple[int, ...]]] = []
    window_dumps: list[WindowDump] = []
    final_accuracy: dict[int, float] = {}

    for t in range(rounds):
        clusters.sort(key=lambda k: k.id)
        for cluster in clusters:
            assignments.append((t, cluster.id, tuple(cluster.members)))

        deltas: dict[int, np.ndarray] = {}
        for cluster in clusters:
            anchor = cluster.model.copy()
            prox = (config.prox_mu, anchor) if algorithm == "fedprox" else None
            for cid in cluster.members:
                try:
                    deltas[cid] = local_train(
                        by_id[cid], cluster.model, config.epochs, config.batch_size, prox
                    )
                except ClientSkip:
                    logger.warning("round %d: skipping client %d (no training data)", t, cid)

        push_norms(window, {cid: float(np.linalg.norm(d)) for cid, d in deltas.items()})

        for cluster in clusters:
            active = [cid for cid in cluster.members if cid in deltas]
            if active:
                active_deltas = [deltas[cid] for cid in active]
                active_sizes = [by_id[cid].data_size for cid in active]
                cluster_aggregate(cluster, active_deltas, active_sizes)
                cluster.delta_mean, cluster.delta_max = delta_stats(active_deltas, active_sizes)

        entries = []
        for cluster in clusters:
            for cid in cluster.members:
                test_loss, test_acc = evaluate_client(by_id[cid], cluster.model)
                grad_norm = float(np.linalg.norm(deltas[cid])) if cid in deltas else 0.0
                entries.append(ClientRound(cid, cluster.id, by_id[cid].last_train_loss,
                                           test_loss, test_acc, grad_norm))
                final_accuracy[cid] = test_acc
        entries.sort(key=lambda e: e.client_id)
        reports.append(RoundReport(t, entries))

        if algorithm in ("gcfl", "gcflplus"):
            survivors: list[ClusterState] = []
            for cluster in clusters:
                full = all(cid in deltas for cid in cluster.members)
                if not full:
                    survivors.append(cluster)
                    continue
                member_deltas = [deltas[cid] for cid in cluster.members]
                member_sizes = [by_id[cid].data_size for cid in cluster.members]
                should, d_mean, d_max = split_check(member_deltas, member_sizes, config.cluster, t)
                cluster.delta_mean, cluster.delta_max = d_mean, d_max
                if should and len(cluster.members) >= 2:
                    if algorithm == "gcfl":
                        weights = to_cut_weights(cosine_matrix(member_deltas))
                    else:
                        weights = dtw_to_cut_weights(
                            dtw_matrix(window, cluster.members, config.standardize)
                        )
                        window_dumps.append(WindowDump(
                            t, cluster.id,
                            {cid: list(window.row(cid)) for cid in cluster.members},
                        ))
                    child_a, child_b, cut_value = bipartition_cluster(
                        cluster, weights, (next_cluster_id, next_cluster_id + 1)
                    )
                    next_cluster_id += 2
                    split_events.append(SplitEvent(
                        t, cluster.id, (child_a.id, child_b.id),
                        (tuple(child_a.members), tuple(child_b.members)),
                        d_mean, d_max, cut_value,
                    ))
                    logger.info("round %d: cluster %d split into %s | %s (cut %.3g)",
                                t, cluster.id, child_a.members, child_b.members, cut_value)
                    survivors.extend([child_a, child_b])
                else:
                    survivors.append(cluster)
            clusters = survivors

    clusters.sort(key=lambda k: k.id)
    return RunResult(algorithm, reports, split_events, assignments, clusters,
                     final_accuracy, window_dumps)
