"""Hybrid quantum-classical network laboratory.

A dense statevector simulator with exact shift-rule gradients, a
from-scratch CNN front end, nine data-encoding circuit families, a
Nesterov SGD training loop, accuracy diagnostics, PCA/silhouette
separability analysis, and a reproducible experiment CLI.
"""

from .circuits import (
    FEATURE_MAP_NAMES,
    FeatureMapSpec,
    build_feature_map,
    build_two_local,
    feature_map_spec,
    named_feature_map,
)
from .data import (
    LABELS,
    HeatmapSample,
    PairSample,
    build_heatmap,
    load_pairs,
    split,
    synth_dataset,
    synth_generate,
    write_pairs,
)
from .diagnostics import (
    MetricReport,
    compute_metrics,
    early_slope,
    epoch_at_threshold,
    fluctuation,
    generalization_gap,
    overfitting_drop,
    stability_ratio,
)
from .experiments import (
    ExperimentConfig,
    emit_plot_data,
    run_depth_study,
    run_feature_map_study,
    run_single,
)
from .layers import (
    Conv2d,
    Dropout,
    Flatten,
    LayerStack,
    Linear,
    MaxPool2x2,
    ReLU,
    cnn_stack,
    load_checkpoint,
    save_checkpoint,
)
from .qnn import QuantumLayer, forward_and_grads, forward_batch
from .qsim import (
    GateOp,
    ParamCircuit,
    PauliObservable,
    Statevector,
    parity_observable,
    run_circuit,
    run_circuit_batch,
)
from .separability import PCAResult, pca_fit, silhouette_scores
from .training import (
    AccuracySeries,
    DivergenceError,
    HybridModel,
    TrainConfig,
    TrainResult,
    build_hybrid_model,
    capture_stage,
    cross_entropy,
    evaluate,
    sgd_nesterov_step,
    train,
)

__all__ = [
    "FEATURE_MAP_NAMES",
    "FeatureMapSpec",
    "build_feature_map",
    "build_two_local",
    "feature_map_spec",
    "named_feature_map",
    "LABELS",
    "HeatmapSample",
    "PairSample",
    "build_heatmap",
    "load_pairs",
    "split",
    "synth_dataset",
    "synth_generate",
    "write_pairs",
    "MetricReport",
    "compute_metrics",
    "early_slope",
    "epoch_at_threshold",
    "fluctuation",
    "generalization_gap",
    "overfitting_drop",
    "stability_ratio",
    "ExperimentConfig",
    "emit_plot_data",
    "run_depth_study",
    "run_feature_map_study",
    "run_single",
    "Conv2d",
    "Dropout",
    "Flatten",
    "LayerStack",
    "Linear",
    "MaxPool2x2",
    "ReLU",
    "cnn_stack",
    "load_checkpoint",
    "save_checkpoint",
    "QuantumLayer",
    "forward_and_grads",
    "forward_batch",
    "GateOp",
    "ParamCircuit",
    "PauliObservable",
    "Statevector",
    "parity_observable",
    "run_circuit",
    "run_circuit_batch",
    "PCAResult",
    "pca_fit",
    "silhouette_scores",
    "AccuracySeries",
    "DivergenceError",
    "HybridModel",
    "TrainConfig",
    "TrainResult",
    "build_hybrid_model",
    "capture_stage",
    "cross_entropy",
    "evaluate",
    "sgd_nesterov_step",
    "train",
]
