"""Flattening of host matrices and flow/event/message feature fusion.

The hybrid vector layout is fixed: [flow | event | message] for whichever
components the mode includes, with each host matrix flattened row-major after
any row/column selection. Host 32-bit values are widened to 64-bit so the
fused matrix has one uniform dtype.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _binio as bio
from .dataset import AlignedDataset, LabelMap
from .errors import SelectionOutOfRangeError
from .reduction import SelectionPlan, apply_selection_batch

HFM1_MAGIC = b"HFM1"


class FusionMode(enum.Enum):
    FLOW_ONLY = "flow"
    FLOW_EVENT = "h1"
    FLOW_MESSAGE = "h2"
    FLOW_EVENT_MESSAGE = "h3"

    @property
    def uses_event(self) -> bool:
        return self in (FusionMode.FLOW_EVENT, FusionMode.FLOW_EVENT_MESSAGE)

    @property
    def uses_message(self) -> bool:
        return self in (FusionMode.FLOW_MESSAGE, FusionMode.FLOW_EVENT_MESSAGE)

    @classmethod
    def parse(cls, text: str) -> "FusionMode":
        aliases = {
            "flow": cls.FLOW_ONLY, "a": cls.FLOW_ONLY,
            "h1": cls.FLOW_EVENT, "flow+event": cls.FLOW_EVENT,
            "h2": cls.FLOW_MESSAGE, "flow+message": cls.FLOW_MESSAGE,
            "h3": cls.FLOW_EVENT_MESSAGE, "flow+event+message": cls.FLOW_EVENT_MESSAGE,
        }
        key = text.strip().lower()
        if key not in aliases:
            raise ValueError(f"unknown fusion mode {text!r}")
        return aliases[key]


def flatten(matrix: np.ndarray) -> np.ndarray:
    """Row-major flatten: output[i*n + j] == matrix[i][j]."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
        raise ValueError("flatten expects a non-empty 2-D matrix")
    return matrix.reshape(-1, order="C").copy()


def hybrid_width(f: int, m: int, n: int, p: int, q: int, mode: FusionMode) -> int:
    """Fused vector width for the given component dims and mode."""
    width = f
    if mode.uses_event:
        width += m * n
    if mode.uses_message:
        width += p * q
    return width


@dataclass(frozen=True)
class HybridMatrix:
    """Fused per-sample feature rows plus the labels they carry.

    provenance holds the post-selection dims (f, m', n', p', q') with zeros
    for components the mode excludes; unless the rows have been projected by
    PCA (pca_applied), the width always satisfies hybrid_width on those dims.
    """

    values: np.ndarray            # N x t, float64
    labels: np.ndarray            # N, int64
    mode: FusionMode
    provenance: tuple[int, int, int, int, int]
    label_map: LabelMap
    pca_applied: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if values.ndim != 2 or labels.ndim != 1 or values.shape[0] != labels.shape[0]:
            raise ValueError("values must be N x t with one label per row")
        if not self.pca_applied and values.shape[1] != hybrid_width(*self.provenance, self.mode):
            raise ValueError("width disagrees with provenance dims for this mode")
        values.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def fuse(
    ds: AlignedDataset,
    mode: FusionMode,
    event_plan: SelectionPlan | None = None,
    message_plan: SelectionPlan | None = None,
) -> HybridMatrix:
    """Reduce (optionally), flatten, and concatenate the views of a dataset.

    Per sample the event/message matrices are first reduced by the selection
    plans when given, then flattened row-major, then appended after the flow
    vector. Plans must be built for exactly this dataset's host dims.
    """
    f, m, n, p, q = ds.dims
    parts = [ds.flow]
    ev_dims = (0, 0)
    ms_dims = (0, 0)
    if mode.uses_event:
        block = ds.event
        if event_plan is not None:
            if event_plan.source_dims != (m, n):
                raise SelectionOutOfRangeError(
                    f"event plan built for {event_plan.source_dims}, dataset has {(m, n)}"
                )
            block = apply_selection_batch(event_plan, block)
        ev_dims = block.shape[1:]
        parts.append(block.reshape(ds.n, -1).astype(np.float64))
    if mode.uses_message:
        block = ds.message
        if message_plan is not None:
            if message_plan.source_dims != (p, q):
                raise SelectionOutOfRangeError(
                    f"message plan built for {message_plan.source_dims}, dataset has {(p, q)}"
                )
            block = apply_selection_batch(message_plan, block)
        ms_dims = block.shape[1:]
        parts.append(block.reshape(ds.n, -1).astype(np.float64))
    values = np.hstack(parts) if len(parts) > 1 else np.array(ds.flow, dtype=np.float64)
    return HybridMatrix(values, ds.labels, mode, (f, *ev_dims, *ms_dims), ds.label_map)


# --------------------------------------------------------------------------
# HFM1 container: caches fused matrices between CLI stages


def save_hybrid(hm: HybridMatrix, path) -> None:
    with open(path, "wb") as fh:
        fh.write(HFM1_MAGIC)
        bio.write_u16(fh, 1)
        bio.write_u64(fh, hm.n)
        bio.write_u32(fh, hm.width)
        bio.write_str(fh, hm.mode.value)
        bio.write_u8(fh, 1 if hm.pca_applied else 0)
        for d in hm.provenance:
            bio.write_u32(fh, d)
        bio.write_u32(fh, hm.label_map.k)
        for name in hm.label_map.class_names:
            bio.write_str(fh, name)
        bio.write_u32(fh, hm.label_map.benign_id)
        bio.write_array(fh, hm.labels, "int64")
        bio.write_array(fh, hm.values, "float64")


def load_hybrid(path) -> HybridMatrix:
    """Read an HFM1 container written by save_hybrid."""
    with open(path, "rb") as fh:
        bio.expect_magic(fh, HFM1_MAGIC)
        version = bio.read_u16(fh)
        if version != 1:
            raise bio.BadMagicError(f"unsupported HFM1 version {version}")
        count = bio.read_u64(fh)
        width = bio.read_u32(fh)
        mode = FusionMode.parse(bio.read_str(fh))
        pca_applied = bio.read_u8(fh) != 0
        provenance = tuple(bio.read_u32(fh) for _ in range(5))
        k = bio.read_u32(fh)
        names = tuple(bio.read_str(fh) for _ in range(k))
        benign_id = bio.read_u32(fh)
        labels = bio.read_array(fh, count, "int64")
        values = bio.read_array(fh, count * width, "float64").reshape(count, width)
        bio.expect_eof(fh)
    label_map = LabelMap(names, benign_id)
    return HybridMatrix(values, labels, mode, provenance, label_map, pca_applied)
