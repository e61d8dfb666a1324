"""Two-stage collaborative classifier.

Stage one (ml1) is a binary benign/attack filter trained on binary-relabeled
data; stage two (ml2) is a multiclass model trained only on attack samples
with their classes remapped to contiguous ids. At prediction time ml1's
benign verdict is final; only rows ml1 flags as attack are handed to ml2,
whose verdicts map back to the original label ids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _binio as bio
from .errors import DimMismatchError, FewerThanTwoAttackClassesError
from .fusion import HybridMatrix
from .gbdt import ClassifierContract, GbdtClassifier, GbdtModel, read_gbdt, write_gbdt
from .metrics import EvaluationReport, build_report

CAS1_MAGIC = b"CAS1"


@dataclass
class CascadeModel:
    ml1: object                       # binary model (class 0 = benign)
    ml2: object                       # multiclass model over contiguous attack ids
    benign_id: int
    attack_ids: np.ndarray            # contiguous ml2 id -> original label id
    classifier: ClassifierContract

    def __post_init__(self):
        attack_ids = np.asarray(self.attack_ids, dtype=np.int64)
        if attack_ids.ndim != 1 or np.unique(attack_ids).size != attack_ids.size:
            raise ValueError("attack_ids must be distinct")
        if self.benign_id in attack_ids:
            raise ValueError("attack_ids must exclude the benign id")
        attack_ids.setflags(write=False)
        object.__setattr__(self, "attack_ids", attack_ids)


def train_cascade(
    train: HybridMatrix,
    p1,
    p2,
    classifier: ClassifierContract | None = None,
) -> CascadeModel:
    """Train both stages on one fused training matrix.

    ml1 sees all rows with labels collapsed to benign=0 / attack=1; ml2 sees
    only the attack rows with labels remapped to 0..K-2 preserving original
    id order. Training needs at least two distinct attack classes.
    """
    classifier = classifier or GbdtClassifier()
    benign_id = train.label_map.benign_id
    attack_ids = np.array(
        [cid for cid in range(train.label_map.k) if cid != benign_id], dtype=np.int64
    )
    present = np.unique(train.labels[train.labels != benign_id])
    if present.size < 2:
        raise FewerThanTwoAttackClassesError(
            f"cascade needs >= 2 attack classes with samples, found {present.size}"
        )

    binary_labels = (train.labels != benign_id).astype(np.int64)
    ml1 = classifier.train(train.values, binary_labels, 2, p1)

    attack_rows = np.flatnonzero(train.labels != benign_id)
    remap = np.full(train.label_map.k, -1, dtype=np.int64)
    remap[attack_ids] = np.arange(attack_ids.size)
    ml2_labels = remap[train.labels[attack_rows]]
    ml2 = classifier.train(train.values[attack_rows], ml2_labels, attack_ids.size, p2)

    return CascadeModel(ml1, ml2, benign_id, attack_ids, classifier)


def predict_cascade(model: CascadeModel, features) -> np.ndarray:
    """Original-label-id predictions for M x t rows.

    Rows ml1 calls benign get benign_id unconditionally; the remaining rows
    are classified by ml2 in a single batch and mapped back through the
    attack id table.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise DimMismatchError("features must be M x t")
    ml1_labels, _ = model.classifier.predict(model.ml1, features)
    out = np.full(features.shape[0], model.benign_id, dtype=np.int64)
    flagged = np.flatnonzero(ml1_labels != 0)
    if flagged.size:
        ml2_labels, _ = model.classifier.predict(model.ml2, features[flagged])
        out[flagged] = model.attack_ids[ml2_labels]
    return out


def evaluate_cascade(model: CascadeModel, test: HybridMatrix) -> EvaluationReport:
    """Metrics over predict_cascade outputs against the test ground truth."""
    pred = predict_cascade(model, test.values)
    return build_report(test.labels, pred, test.label_map.k, test.label_map.class_names)


def save_cascade(model: CascadeModel, path) -> None:
    """Serialize a cascade whose stages are the built-in boosted-tree models."""
    if not isinstance(model.ml1, GbdtModel) or not isinstance(model.ml2, GbdtModel):
        raise ValueError("only cascades of built-in GBDT stage models serialize")
    with open(path, "wb") as fh:
        fh.write(CAS1_MAGIC)
        bio.write_u16(fh, 1)
        bio.write_u32(fh, model.benign_id)
        bio.write_u32(fh, model.attack_ids.size)
        bio.write_array(fh, model.attack_ids, "int64")
        write_gbdt(model.ml1, fh)
        write_gbdt(model.ml2, fh)


def load_cascade(path) -> CascadeModel:
    with open(path, "rb") as fh:
        bio.expect_magic(fh, CAS1_MAGIC)
        version = bio.read_u16(fh)
        if version != 1:
            raise bio.BadMagicError(f"unsupported CAS1 version {version}")
        benign_id = bio.read_u32(fh)
        n_attacks = bio.read_u32(fh)
        attack_ids = bio.read_array(fh, n_attacks, "int64")
        ml1 = read_gbdt(fh)
        ml2 = read_gbdt(fh)
        bio.expect_eof(fh)
    return CascadeModel(ml1, ml2, benign_id, attack_ids, GbdtClassifier())
