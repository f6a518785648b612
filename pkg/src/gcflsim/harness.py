"""Experiment driver: data partitioning, feature-space unification, metric
summaries, cluster heterogeneity reports and CSV emission.

All outputs are plain CSV so external tools can plot convergence curves and
per-cluster heterogeneity. Runs are deterministic: a repeated invocation with
the same configuration and seed produces byte-identical files.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .clustering import ClusterConfig
from .errors import ArgumentError, ConfigurationError, IngestionError
from .fed import ClientState, RunConfig, RunResult, run_federation
from .gnn import one_hot_degree_features
from .graphs import Dataset, Graph, binomial_gnp, load_tu_dataset
from .hetero import pairwise_heterogeneity

logger = logging.getLogger(__name__)

_PARTITION_TAG = 3001
_SPLIT_TAG = 3003
_SYNTH_TAG = 3007

MOLECULE_DATASETS = ["MUTAG", "BZR", "COX2", "DHFR", "PTC_MR", "AIDS", "NCI1"]
PROTEIN_DATASETS = ["ENZYMES", "DD", "PROTEINS"]
SOCIAL_DATASETS = ["COLLAB", "IMDB-BINARY", "IMDB-MULTI"]

DATASET_GROUPS = {
    "molecules": MOLECULE_DATASETS,
    "biochem": MOLECULE_DATASETS + PROTEIN_DATASETS,
    "mix": MOLECULE_DATASETS + PROTEIN_DATASETS + SOCIAL_DATASETS,
}

DEGREE_FEATURE_DATASETS = set(SOCIAL_DATASETS)


# ---------------------------------------------------------------------------
# Client construction
# ---------------------------------------------------------------------------


def _split_train_test(graphs: list[Graph], test_fraction: float) -> tuple[list[Graph], list[Graph]]:
    n_test = math.ceil(test_fraction * len(graphs))
    if n_test >= len(graphs):
        raise ConfigurationError("test fraction leaves no training graphs")
    return graphs[:-n_test], graphs[-n_test:]


def partition_one_dataset(
    dataset: Dataset,
    num_clients: int,
    per_client: int,
    test_fraction: float = 0.1,
    overlap: bool = False,
    seed: int = 0,
    label_skew: bool = False,
) -> list[ClientState]:
    """Distribute one dataset over clients, holding out a per-client test set.

    Non-overlap mode shuffles once and hands out contiguous disjoint slices
    (leftover graphs are dropped and logged); overlap mode samples each
    client's graphs independently, distinct within a client but shared across
    clients. ``label_skew`` orders graphs by label before slicing so clients
    receive label-concentrated shards (non-overlap only).
    """
    if not 0.0 < test_fraction < 1.0:
        raise ConfigurationError("test_fraction must be in (0, 1)")
    if num_clients < 1 or per_client < 2:
        raise ConfigurationError("need num_clients >= 1 and per_client >= 2")
    rng = np.random.default_rng(np.random.SeedSequence([_PARTITION_TAG, seed]))
    clients = []
    if overlap:
        if label_skew:
            raise ConfigurationError("label_skew is only supported without overlap")
        if per_client > len(dataset):
            raise ConfigurationError("per_client exceeds dataset size")
        for i in range(num_clients):
            idx = rng.choice(len(dataset), size=per_client, replace=False)
            graphs = [dataset.graphs[int(k)] for k in idx]
            train, test = _split_train_test(graphs, test_fraction)
            clients.append(ClientState(i, train, test, seed=i))
        return clients

    need = num_clients * per_client
    if need > len(dataset):
        raise ConfigurationError(
            f"{dataset.name}: {need} graphs requested but only {len(dataset)} available"
        )
    perm = rng.permutation(len(dataset))
    if label_skew:
        labels = np.array([dataset.graphs[int(k)].label for k in perm])
        perm = perm[np.argsort(labels, kind="stable")]
    dropped = len(dataset) - need
    if dropped:
        logger.info("%s: dropping %d leftover graphs", dataset.name, dropped)
    for i in range(num_clients):
        chunk = perm[i * per_client:(i + 1) * per_client]
        graphs = [dataset.graphs[int(k)] for k in chunk]
        train, test = _split_train_test(graphs, test_fraction)
        clients.append(ClientState(i, train, test, seed=i))
    return clients


def client_from_dataset(
    dataset: Dataset, client_id: int, test_fraction: float = 0.1, seed: int = 0
) -> ClientState:
    """One client owning a whole dataset with a seeded held-out test split."""
    rng = np.random.default_rng(np.random.SeedSequence([_SPLIT_TAG, seed, client_id]))
    perm = rng.permutation(len(dataset))
    graphs = [dataset.graphs[int(k)] for k in perm]
    train, test = _split_train_test(graphs, test_fraction)
    return ClientState(client_id, train, test, seed=client_id)


def apply_degree_features(dataset: Dataset) -> Dataset:
    """Replace node features with one-hot degrees (width = max degree + 1)."""
    max_degree = max(int(g.degrees.max()) if g.num_edges else 0 for g in dataset.graphs)
    max_degree = max(1, max_degree)
    return Dataset(dataset.name, [one_hot_degree_features(g, max_degree) for g in dataset.graphs])


def load_dataset_for_federation(data_root: str | Path, name: str) -> Dataset:
    """TU loader plus the degree-feature convention for the social datasets."""
    try:
        ds = load_tu_dataset(data_root, name)
    except IngestionError as exc:
        raise ConfigurationError(f"dataset {name} not available: {exc}") from exc
    if name in DEGREE_FEATURE_DATASETS:
        ds = apply_degree_features(ds)
    return ds


def build_multi_dataset_group(
    group: str, data_root: str | Path, test_fraction: float = 0.1, seed: int = 0
) -> list[ClientState]:
    """One client per dataset of a named group, in the group's fixed order."""
    if group not in DATASET_GROUPS:
        raise ConfigurationError(f"unknown group {group!r}; pick from {sorted(DATASET_GROUPS)}")
    clients = []
    for i, name in enumerate(DATASET_GROUPS[group]):
        ds = load_dataset_for_federation(data_root, name)
        clients.append(client_from_dataset(ds, i, test_fraction, seed))
    return clients


def unify_feature_space(clients: list[ClientState]) -> tuple[list[ClientState], int, int]:
    """Zero-pad features to a shared width and widen the label head.

    Returns (clients, input_dim, output_dim): features are right-padded to
    the federation-wide maximum dimension and the output dimension is the
    maximum class count; labels are already 0-based per dataset.
    """
    if not clients:
        raise ArgumentError("need at least one client")
    dims = set()
    max_label = 0
    for c in clients:
        for g in c.train_graphs + c.test_graphs:
            dims.add(g.feat_dim)
            max_label = max(max_label, g.label)
    target = max(dims)
    if len(dims) > 1:
        for c in clients:
            c.train_graphs = [_pad_features(g, target) for g in c.train_graphs]
            c.test_graphs = [_pad_features(g, target) for g in c.test_graphs]
    return clients, target, max(2, max_label + 1)


def _pad_features(graph: Graph, target: int) -> Graph:
    if graph.feat_dim == target:
        return graph
    padded = np.zeros((graph.num_nodes, target))
    padded[:, :graph.feat_dim] = graph.features
    return graph.with_features(padded)


def synthetic_two_group_clients(
    clients_per_group: int = 4,
    graphs_per_client: int = 40,
    nodes: int = 30,
    p_a: float = 0.1,
    p_b: float = 0.5,
    test_fraction: float = 0.25,
    noise: float = 0.05,
    seed: int = 0,
) -> tuple[list[ClientState], tuple[set[int], set[int]]]:
    """Two planted client groups with divergent structure and features.

    Group A holds sparse binomial random graphs, group B dense ones. Each
    graph's class (balanced 0/1) is planted into group-disjoint one-hot node
    feature columns plus noise, so the classification rule lives in different
    feature subspaces per group. Returns the clients and the ground-truth
    client-id partition.
    """
    clients = []
    cid = 0
    groups: tuple[set[int], set[int]] = (set(), set())
    for group_index, p in enumerate((p_a, p_b)):
        for _ in range(clients_per_group):
            ss = np.random.SeedSequence([_SYNTH_TAG, seed, cid])
            rng = np.random.default_rng(ss)
            graphs = []
            for j in range(graphs_per_client):
                label = j % 2
                g = binomial_gnp(nodes, p, int(rng.integers(2**32)))
                feats = noise * rng.standard_normal((nodes, 4))
                feats[:, 2 * group_index + label] += 1.0
                graphs.append(Graph(g.num_nodes, g.edges, feats, label))
            train, test = _split_train_test(graphs, test_fraction)
            clients.append(ClientState(cid, train, test, seed=cid))
            groups[group_index].add(cid)
            cid += 1
    return clients, groups


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


@dataclass
class MetricsSummary:
    per_client: dict[int, float]
    average: float
    min_gain: float
    improved: int
    total: int

    @property
    def improved_ratio(self) -> float:
        return self.improved / self.total


def compute_metrics(
    accuracies: dict[int, float], selftrain_accuracies: dict[int, float]
) -> MetricsSummary:
    """Average accuracy, minimum gain over self-train, strict-improvement ratio."""
    if set(accuracies) != set(selftrain_accuracies):
        raise ArgumentError("client sets differ between algorithm and self-train results")
    if not accuracies:
        raise ArgumentError("no clients")
    gains = {cid: accuracies[cid] - selftrain_accuracies[cid] for cid in accuracies}
    improved = sum(1 for g in gains.values() if g > 0)
    return MetricsSummary(
        per_client=dict(sorted(accuracies.items())),
        average=float(np.mean(list(accuracies.values()))),
        min_gain=float(min(gains.values())),
        improved=improved,
        total=len(accuracies),
    )


@dataclass
class ClusterHeteroRow:
    cluster_id: str
    n_clients: int
    structure_mean: float
    structure_std: float
    feature_mean: float
    feature_std: float


def cluster_heterogeneity_report(
    clusters,
    clients: list[ClientState],
    awe_length: int = 4,
    bins: int = 20,
    pair_budget: int = 2000,
    seed: int = 0,
) -> list[ClusterHeteroRow]:
    """Average pairwise heterogeneity among member graphs, per cluster.

    The first row ("all") pools every client's graphs and serves as the
    pre-clustering baseline the per-cluster values are compared against.
    """
    if not clusters:
        raise ArgumentError("no clusters to report on")
    by_id = {c.id: c for c in clients}

    def pooled(name, ids):
        graphs = []
        for cid in sorted(ids):
            graphs.extend(by_id[cid].train_graphs + by_id[cid].test_graphs)
        return Dataset(name, graphs)

    rows = []
    everyone = pooled("all", list(by_id))
    rep = pairwise_heterogeneity(everyone, everyone, awe_length, bins, pair_budget, seed)
    rows.append(ClusterHeteroRow("all", len(by_id), rep.structure_mean, rep.structure_std,
                                 rep.feature_mean, rep.feature_std))
    for cluster in sorted(clusters, key=lambda k: k.id):
        pool = pooled(f"cluster_{cluster.id}", cluster.members)
        rep = pairwise_heterogeneity(pool, pool, awe_length, bins, pair_budget, seed)
        rows.append(ClusterHeteroRow(str(cluster.id), len(cluster.members), rep.structure_mean,
                                     rep.structure_std, rep.feature_mean, rep.feature_std))
    return rows


# ---------------------------------------------------------------------------
# Experiment configuration
# ---------------------------------------------------------------------------

_TRUE = {"true", "yes", "1", "on"}
_FALSE = {"false", "no", "0", "off"}


@dataclass
class ExperimentConfig:
    setting: str = "oneDS"  # oneDS | multiDS | synthetic
    data_root: str = "data"
    dataset: str = "MUTAG"
    group: str = "molecules"
    num_clients: int = 4
    per_client_graphs: int = 100
    test_fraction: float = 0.1
    overlap: bool = False
    label_skew: bool = False
    feature_mode: str = "original"  # original | onehot_degree
    algorithms: list[str] = field(default_factory=lambda: ["selftrain", "fedavg"])
    rounds: int = 50
    seeds: list[int] = field(default_factory=lambda: [0])
    eps1: Optional[float] = None
    eps2: Optional[float] = None
    min_split_size: int = 3
    warmup_rounds: int = 0
    window: int = 10
    standardize: bool = False
    epochs: int = 1
    batch_size: int = 128
    lr: float = 1e-3
    weight_decay: float = 5e-4
    hidden: int = 64
    num_layers: int = 3
    prox_mu: float = 0.01
    hetero_report: bool = True
    awe_length: int = 4
    bins: int = 20
    pair_budget: int = 2000
    out_dir: str = "results"

    def __post_init__(self):
        if self.setting not in ("oneDS", "multiDS", "synthetic"):
            raise ConfigurationError(f"unknown setting {self.setting!r}")
        if self.feature_mode not in ("original", "onehot_degree"):
            raise ConfigurationError(f"unknown feature_mode {self.feature_mode!r}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigurationError("test_fraction must be in (0, 1)")
        if self.num_clients < 1:
            raise ConfigurationError("num_clients must be >= 1")

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        return cls(**_parse_config_text(Path(path).read_text(), cls))

    def with_overrides(self, pairs: list[str]) -> "ExperimentConfig":
        text = "\n".join(pairs)
        return replace(self, **_parse_config_text(text, type(self)))


def _parse_config_text(text: str, cls) -> dict:
    spec = {f.name: f for f in fields(cls)}
    out = {}
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"config line {line_no}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in spec:
            raise ConfigurationError(f"config line {line_no}: unknown key {key!r}")
        out[key] = _parse_value(key, value, spec[key].type)
    return out


def _parse_value(key: str, value: str, annotation: str):
    if key in ("algorithms",):
        return [v.strip() for v in value.split(",") if v.strip()]
    if key in ("seeds",):
        return [int(v) for v in value.split(",") if v.strip()]
    if key in ("eps1", "eps2"):
        return None if value.lower() in ("", "none") else float(value)
    if "bool" in annotation:
        low = value.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ConfigurationError(f"{key}: expected a boolean, got {value!r}")
    if "int" in annotation:
        return int(value)
    if "float" in annotation:
        return float(value)
    return value


# ---------------------------------------------------------------------------
# Experiment execution and CSV emission
# ---------------------------------------------------------------------------


def build_clients(config: ExperimentConfig, seed: int) -> list[ClientState]:
    """Fresh clients for one seed according to the configured setting."""
    if config.setting == "synthetic":
        clients, _ = synthetic_two_group_clients(
            clients_per_group=max(1, config.num_clients // 2), seed=seed
        )
    elif config.setting == "oneDS":
        ds = load_dataset_for_federation(config.data_root, config.dataset)
        if config.feature_mode == "onehot_degree":
            ds = apply_degree_features(ds)
        clients = partition_one_dataset(
            ds, config.num_clients, config.per_client_graphs, config.test_fraction,
            config.overlap, seed, config.label_skew,
        )
    else:
        clients = build_multi_dataset_group(
            config.group, config.data_root, config.test_fraction, seed
        )
        if config.feature_mode == "onehot_degree":
            for c in clients:
                c.train_graphs = [_degree_graph(g) for g in c.train_graphs]
                c.test_graphs = [_degree_graph(g) for g in c.test_graphs]
    clients, _, _ = unify_feature_space(clients)
    return clients


def _degree_graph(graph: Graph) -> Graph:
    max_degree = max(1, int(graph.degrees.max()) if graph.num_edges else 1)
    return one_hot_degree_features(graph, max_degree)


def make_run_config(config: ExperimentConfig, seed: int, algorithm: str) -> RunConfig:
    cluster = None
    if algorithm in ("gcfl", "gcflplus"):
        if config.eps1 is None or config.eps2 is None:
            raise ConfigurationError(f"{algorithm} requires eps1 and eps2 (try `calibrate`)")
        cluster = ClusterConfig(config.eps1, config.eps2, config.min_split_size,
                                config.warmup_rounds)
    return RunConfig(
        seed=seed, epochs=config.epochs, batch_size=config.batch_size, lr=config.lr,
        weight_decay=config.weight_decay, hidden=config.hidden, num_layers=config.num_layers,
        prox_mu=config.prox_mu, cluster=cluster, window_length=config.window,
        standardize=config.standardize,
    )


def run_experiment(config: ExperimentConfig) -> list[dict]:
    """Run every configured (algorithm, seed) pair and emit the CSV outputs.

    The self-train baseline is always run (and run first) because gain and
    improvement metrics are defined against it. Returns summary rows.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    algorithms = list(config.algorithms)
    if "selftrain" not in algorithms:
        algorithms.insert(0, "selftrain")
    else:
        algorithms.insert(0, algorithms.pop(algorithms.index("selftrain")))

    rounds_rows, cluster_rows, split_rows, summary_rows, hetero_rows, window_rows = \
        [], [], [], [], [], []
    summaries = []

    for seed in config.seeds:
        clients = build_clients(config, seed)
        selftrain_acc: dict[int, float] = {}
        for algorithm in algorithms:
            result = run_federation(clients, algorithm, config.rounds,
                                    make_run_config(config, seed, algorithm))
            _collect_rows(result, seed, rounds_rows, cluster_rows, split_rows, window_rows)
            if algorithm == "selftrain":
                selftrain_acc = dict(result.final_accuracy)
            metrics = compute_metrics(result.final_accuracy, selftrain_acc)
            summary_rows.append([
                algorithm, seed, repr(metrics.average), repr(metrics.min_gain),
                metrics.improved, metrics.total, repr(metrics.improved_ratio),
            ])
            summaries.append({
                "algorithm": algorithm, "seed": seed, "average": metrics.average,
                "min_gain": metrics.min_gain, "improved": metrics.improved,
                "total": metrics.total,
            })
            if config.hetero_report and algorithm in ("gcfl", "gcflplus"):
                for row in cluster_heterogeneity_report(
                    result.final_clusters, clients, config.awe_length, config.bins,
                    config.pair_budget, seed,
                ):
                    hetero_rows.append([
                        algorithm, seed, row.cluster_id, row.n_clients,
                        repr(row.structure_mean), repr(row.structure_std),
                        repr(row.feature_mean), repr(row.feature_std),
                    ])

    _write_csv(out / "rounds.csv",
               ["algorithm", "seed", "round", "client_id", "cluster_id",
                "train_loss", "test_loss", "test_acc", "grad_norm"], rounds_rows)
    _write_csv(out / "clusters.csv",
               ["algorithm", "seed", "round", "cluster_id", "client_ids"], cluster_rows)
    _write_csv(out / "splits.csv",
               ["algorithm", "seed", "round", "parent", "child_a", "child_b",
                "members_a", "members_b", "delta_mean", "delta_max", "cut_value"], split_rows)
    _write_csv(out / "summary.csv",
               ["algorithm", "seed", "average_accuracy", "min_gain",
                "improved", "total", "improved_ratio"], summary_rows)
    _write_csv(out / "hetero.csv",
               ["algorithm", "seed", "cluster_id", "n_clients", "structure_mean",
                "structure_std", "feature_mean", "feature_std"], hetero_rows)
    _write_csv(out / "windows.csv",
               ["algorithm", "seed", "round", "parent", "client_id", "norms"], window_rows)
    logger.info("wrote results to %s", out)
    return summaries


def _collect_rows(result: RunResult, seed: int, rounds_rows, cluster_rows, split_rows,
                  window_rows) -> None:
    algo = result.algorithm
    for report in result.reports:
        for e in report.entries:
            rounds_rows.append([
                algo, seed, report.round_index, e.client_id, e.cluster_id,
                repr(e.train_loss), repr(e.test_loss), repr(e.test_acc), repr(e.grad_norm),
            ])
    for round_index, cluster_id, members in result.assignments:
        cluster_rows.append([algo, seed, round_index, cluster_id,
                             ";".join(str(m) for m in members)])
    for ev in result.split_events:
        split_rows.append([
            algo, seed, ev.round_index, ev.parent, ev.children[0], ev.children[1],
            ";".join(str(m) for m in ev.members[0]), ";".join(str(m) for m in ev.members[1]),
            repr(ev.delta_mean), repr(ev.delta_max), repr(ev.cut_value),
        ])
    for dump in result.window_dumps:
        for cid in sorted(dump.rows):
            window_rows.append([
                algo, seed, dump.round_index, dump.parent, cid,
                ";".join(repr(x) for x in dump.rows[cid]),
            ])


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# Epsilon selection
# ---------------------------------------------------------------------------


def probe_delta_stats(
    clients: list[ClientState], run_config: RunConfig, probe_rounds: int
) -> tuple[float, float]:
    """Norm statistics of a short FedAvg probe: final (delta_mean, delta_max)."""
    result = run_federation(clients, "fedavg", probe_rounds, run_config)
    cluster = result.final_clusters[0]
    return float(cluster.delta_mean), float(cluster.delta_max)


def auto_epsilons(
    clients: list[ClientState],
    run_config: RunConfig,
    probe_rounds: int = 20,
    mean_margin: float = 1.5,
    max_margin: float = 0.6,
) -> tuple[float, float]:
    """Offline calibration of (eps1, eps2) from a short FedAvg probe.

    eps1 is set above the observed end-of-probe mean-update norm so the
    stop criterion can fire; eps2 below the observed per-client maximum so
    heterogeneous members keep the split criterion alive.
    """
    probe = replace(run_config, cluster=None)
    delta_mean, delta_max = probe_delta_stats(clients, probe, probe_rounds)
    eps1 = mean_margin * max(delta_mean, 1e-12)
    eps2 = max_margin * max(delta_max, 1e-12)
    logger.info("auto epsilons: probe delta_mean=%.4g delta_max=%.4g -> eps1=%.4g eps2=%.4g",
                delta_mean, delta_max, eps1, eps2)
    return eps1, eps2


def calibrate_epsilons(
    config: ExperimentConfig,
    eps1_grid: list[float],
    eps2_grid: list[float],
    rounds: int,
    algorithm: str = "gcfl",
    out_path: str | Path | None = None,
) -> tuple[float, float, list[dict]]:
    """Grid-search (eps1, eps2) by mean final held-out accuracy."""
    if algorithm not in ("gcfl", "gcflplus"):
        raise ConfigurationError("calibration targets gcfl or gcflplus")
    rows = []
    best = None
    seed = config.seeds[0]
    clients = build_clients(config, seed)
    for eps1 in eps1_grid:
        for eps2 in eps2_grid:
            trial = replace(config, eps1=eps1, eps2=eps2, rounds=rounds)
            result = run_federation(clients, algorithm, rounds,
                                    make_run_config(trial, seed, algorithm))
            accuracy = float(np.mean(list(result.final_accuracy.values())))
            row = {"eps1": eps1, "eps2": eps2, "accuracy": accuracy,
                   "clusters": len(result.final_clusters)}
            rows.append(row)
            if best is None or accuracy > best[2]:
                best = (eps1, eps2, accuracy)
    if out_path is not None:
        _write_csv(Path(out_path), ["eps1", "eps2", "accuracy", "clusters"],
                   [[repr(r["eps1"]), repr(r["eps2"]), repr(r["accuracy"]), r["clusters"]]
                    for r in rows])
    return best[0], best[1], rows
