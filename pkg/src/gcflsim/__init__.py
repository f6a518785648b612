"""Deterministic simulator for gradient-clustered federated graph classification."""

from .clustering import (
    ClusterConfig,
    ClusterState,
    SplitEvent,
    bipartition_cluster,
    cluster_aggregate,
    cosine_matrix,
    delta_stats,
    split_check,
    stoer_wagner_mincut,
    to_cut_weights,
)
from .dtwseries import (
    NormWindow,
    dtw_distance,
    dtw_matrix,
    dtw_to_cut_weights,
    push_norms,
    standardize_row,
)
from .errors import (
    ArgumentError,
    ClientSkip,
    ConfigurationError,
    CorruptDatasetError,
    GcflSimError,
    IngestionError,
    UndefinedEmbeddingError,
    UndefinedStatisticError,
)
from .fed import (
    ALGORITHMS,
    ClientState,
    RoundReport,
    RunConfig,
    RunResult,
    evaluate_client,
    fedavg_aggregate,
    local_train,
    run_federation,
)
from .gnn import (
    AdamState,
    GinModel,
    adam_step,
    cross_entropy,
    gin_backward,
    gin_forward,
    gin_loss_and_grad,
    init_adam,
    init_gin,
    load_checkpoint,
    one_hot_degree_features,
    save_checkpoint,
)
from .graphs import Dataset, Graph, binomial_gnp, erdos_renyi_gnm, load_tu_dataset
from .harness import (
    ExperimentConfig,
    MetricsSummary,
    auto_epsilons,
    build_multi_dataset_group,
    calibrate_epsilons,
    cluster_heterogeneity_report,
    compute_metrics,
    partition_one_dataset,
    run_experiment,
    synthetic_two_group_clients,
    unify_feature_space,
)
from .hetero import (
    AweDistribution,
    FeatureSimHistogram,
    HeterogeneityReport,
    awe_distribution,
    enumerate_anonymous_walks,
    feature_sim_histogram,
    js_distance,
    js_divergence,
    pairwise_heterogeneity,
)
from .properties import (
    PropertyReport,
    avg_clustering_coefficient,
    avg_shortest_path,
    degree_kurtosis,
    largest_component_fraction,
    property_significance,
)
from .sgc import SgcModel, normalized_adjacency, propagated_features, sgc_train

__version__ = "0.1.0"
