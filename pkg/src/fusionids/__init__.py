"""Hybrid flow/host-feature intrusion detection pipeline.

Fuses per-sample network flow vectors with flattened host-derived feature
matrices, reduces dimensionality by seeded row/column selection and PCA, and
classifies traffic either with a flat multiclass boosted-tree model or with a
two-stage cascade (binary benign filter, then attack-only multiclass).
"""

from .cascade import CascadeModel, evaluate_cascade, predict_cascade, train_cascade
from .dataset import (
    AlignedDataset,
    FlowTable,
    HostTensorSet,
    LabelMap,
    align,
    class_distribution,
    filter_attacks,
    load_flow_csv,
    load_host_tensors,
    relabel_binary,
    save_host_tensors,
    split_stratified,
)
from .fusion import FusionMode, HybridMatrix, flatten, fuse, hybrid_width
from .gbdt import ClassifierContract, GbdtClassifier, GbdtModel, GbdtParams
from .metrics import ConfusionMatrix, EvaluationReport, aggregate, build_report, class_scores, confusion
from .reduction import PcaModel, SelectionPlan, apply_pca, apply_selection, fit_pca, make_selection_plan
from .synth import SynthSpec, generate_synthetic, imbalanced_benchmark

__version__ = "0.1.0"
