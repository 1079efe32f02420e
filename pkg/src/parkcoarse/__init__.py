"""parkcoarse: capacity-aware parking graphs, spectral coarsening, forecasting.

Submodules:
    tensor    - float64 tensors with tape-based reverse-mode autodiff
    parking   - lots, occupancy series, ParkingRank, distance graphs, CSV ingestion
    synth     - deterministic synthetic datasets with planted tidal structure
    prgat     - attention + transfer-matrix combined adjacency (pretrained)
    coarsen   - spectral coarsening into hypernodes
    tcnae     - per-hypernode temporal-convolutional autoencoders
    tgcn      - GRU-over-GCN predictor on the coarse graph
    pipeline  - end-to-end orchestration, metrics, sweeps, ablations
    verify    - independent brute-force oracles for the acceptance suite
    cli       - command-line stage runner
"""

from .errors import (
    ConfigError,
    DataValidationError,
    NumericError,
    ParkcoarseError,
    ShapeError,
)
from .parking import (
    DistanceGraph,
    LowFeatures,
    OccupancySeries,
    ParkingDataset,
    ParkingLot,
    build_distance_graph,
    extract_low_features,
    load_dataset,
    occupancy_rate,
    parking_rank,
    split_dataset,
)
from .pipeline import (
    ExperimentReport,
    Metrics,
    PipelineConfig,
    ablate,
    evaluate_metrics,
    run_pipeline,
    sweep_ratio,
)
from .synth import SynthConfig, generate, planted_structure_report
from .tensor import AdamState, Tape, Tensor, adam_step, backward, grad_check

__version__ = "0.1.0"

__all__ = [
    "AdamState", "Tape", "Tensor", "adam_step", "backward", "grad_check",
    "ConfigError", "DataValidationError", "NumericError", "ParkcoarseError", "ShapeError",
    "DistanceGraph", "LowFeatures", "OccupancySeries", "ParkingDataset", "ParkingLot",
    "build_distance_graph", "extract_low_features", "load_dataset", "occupancy_rate",
    "parking_rank", "split_dataset",
    "ExperimentReport", "Metrics", "PipelineConfig", "ablate", "evaluate_metrics",
    "run_pipeline", "sweep_ratio",
    "SynthConfig", "generate", "planted_structure_report",
]
