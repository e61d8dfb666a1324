"""Loading, validation, alignment, relabeling, and splitting of datasets.

A sample joins two views keyed by sample id: a flow feature vector (length f,
64-bit) from the network side and two host-derived matrices (event m x n,
message p x q, 32-bit) produced by a text embedder. Flow tables arrive as CSV;
host tensors arrive in the HFT1 binary container documented in the README.
All dataset types are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _binio as bio
from .errors import (
    ClassTooSmallError,
    DataError,
    DimMismatchError,
    EmptyIntersectionError,
    EmptyTableError,
    MissingLabelColumnError,
    NoAttackSamplesError,
    NonFiniteFeatureError,
    NonNumericCellError,
    UnknownLabelError,
)
from .rng import SplitMix64

HFT1_MAGIC = b"HFT1"
ALD1_MAGIC = b"ALD1"

# Class names treated as benign when no explicit override is configured;
# matched case-insensitively (the two target dataset families disagree).
DEFAULT_BENIGN_NAMES = ("benign", "normal")


class SanitizePolicy(enum.Enum):
    """How to repair non-finite flow values after parsing.

    CLAMP (default): +inf -> column finite max, -inf -> column finite min,
    NaN -> column median over finite entries; a column with no finite entry
    becomes all zeros. ZERO: every non-finite value -> 0. REJECT: raise.
    """

    CLAMP = "clamp"
    ZERO = "zero"
    REJECT = "reject"


# --------------------------------------------------------------------------
# label map


@dataclass(frozen=True)
class LabelMap:
    """Bijection between class names and contiguous integer ids from 0."""

    class_names: tuple[str, ...]
    benign_id: int

    def __post_init__(self):
        if len(set(self.class_names)) != len(self.class_names):
            raise ValueError("class names must be unique")
        if not self.class_names:
            raise ValueError("label map needs at least one class")
        if not 0 <= self.benign_id < len(self.class_names):
            raise ValueError("benign_id out of range")

    @classmethod
    def from_names(cls, names, benign_name: str | None = None) -> "LabelMap":
        """Build a map over the given class names, sorted lexicographically.

        Ids are assigned by sorted order so they are deterministic and
        independent of any particular train/test split. The benign class is
        matched case-insensitively against DEFAULT_BENIGN_NAMES unless an
        explicit name is supplied.
        """
        ordered = tuple(sorted(set(names)))
        if benign_name is not None:
            if benign_name not in ordered:
                raise UnknownLabelError(benign_name)
            benign_id = ordered.index(benign_name)
        else:
            hits = [i for i, n in enumerate(ordered) if n.lower() in DEFAULT_BENIGN_NAMES]
            if len(hits) != 1:
                raise DataError(
                    f"could not identify a unique benign class among {ordered}; "
                    "pass an explicit benign name"
                )
            benign_id = hits[0]
        return cls(ordered, benign_id)

    @property
    def k(self) -> int:
        return len(self.class_names)

    @property
    def benign_name(self) -> str:
        return self.class_names[self.benign_id]

    def id_of(self, name: str) -> int:
        try:
            return self.class_names.index(name)
        except ValueError:
            raise UnknownLabelError(name) from None

    def name_of(self, label_id: int) -> str:
        return self.class_names[label_id]

    def save(self, path) -> None:
        Path(path).write_text(
            json.dumps({"classes": list(self.class_names), "benign": self.benign_name}, indent=2)
            + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path) -> "LabelMap":
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        classes = tuple(d["classes"])
        if d["benign"] not in classes:
            raise DataError(f"benign class {d['benign']!r} missing from sidecar class list")
        return cls(classes, classes.index(d["benign"]))


# --------------------------------------------------------------------------
# flow table


@dataclass(frozen=True)
class FlowTable:
    sample_ids: tuple[str, ...]
    feature_names: tuple[str, ...]
    values: np.ndarray            # N x f, float64, finite
    labels: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        n, f = values.shape
        if n != len(self.sample_ids) or n != len(self.labels):
            raise ValueError("row count must match sample_ids and labels")
        if f != len(self.feature_names):
            raise ValueError("column count must match feature_names")
        if len(set(self.sample_ids)) != n:
            raise ValueError("sample ids must be unique")
        if not np.isfinite(values).all():
            raise ValueError("flow values must be finite; sanitize before construction")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return len(self.sample_ids)

    @property
    def f(self) -> int:
        return len(self.feature_names)


def sanitize_values(values: np.ndarray, policy: SanitizePolicy = SanitizePolicy.CLAMP) -> np.ndarray:
    """Replace non-finite entries column by column according to policy."""
    out = np.array(values, dtype=np.float64)
    if np.isfinite(out).all():
        return out
    if policy is SanitizePolicy.REJECT:
        raise NonFiniteFeatureError("non-finite value with sanitize policy 'reject'")
    if policy is SanitizePolicy.ZERO:
        out[~np.isfinite(out)] = 0.0
        return out
    for j in range(out.shape[1]):
        col = out[:, j]
        finite = col[np.isfinite(col)]
        if finite.size == 0:
            col[:] = 0.0
            continue
        col[np.isposinf(col)] = finite.max()
        col[np.isneginf(col)] = finite.min()
        col[np.isnan(col)] = np.median(finite)
    return out


def load_flow_csv(
    path,
    label_column: str,
    id_column: str | None = None,
    policy: SanitizePolicy = SanitizePolicy.CLAMP,
) -> FlowTable:
    """Parse a UTF-8 comma-separated flow export with a header row.

    Non-label, non-id columns are parsed as 64-bit reals; numeric sentinels
    ("Infinity", "-Infinity", "NaN", any float literal) are accepted and the
    empty cell is read as NaN, all then repaired per the sanitize policy.
    Sample ids come from id_column when given, else are synthesized as
    "row-<index>".
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyTableError(f"{path}: no header row") from None
        if label_column not in header:
            raise MissingLabelColumnError(label_column)
        if id_column is not None and id_column not in header:
            raise DataError(f"id column {id_column!r} not found in header")
        label_idx = header.index(label_column)
        id_idx = header.index(id_column) if id_column is not None else None
        feat_cols = [
            (i, name)
            for i, name in enumerate(header)
            if i != label_idx and i != id_idx
        ]

        ids: list[str] = []
        labels: list[str] = []
        rows: list[list[float]] = []
        for r, cells in enumerate(reader):
            if len(cells) != len(header):
                raise DataError(f"{path}: data row {r} has {len(cells)} cells, header has {len(header)}")
            labels.append(cells[label_idx])
            ids.append(cells[id_idx] if id_idx is not None else f"row-{r}")
            parsed = []
            for i, name in feat_cols:
                cell = cells[i].strip()
                if cell == "":
                    parsed.append(math.nan)
                    continue
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise NonNumericCellError(r, name) from None
            rows.append(parsed)

    if not rows:
        raise EmptyTableError(f"{path}: no data rows")
    values = sanitize_values(np.array(rows, dtype=np.float64), policy)
    return FlowTable(tuple(ids), tuple(name for _, name in feat_cols), values, tuple(labels))


def save_flow_csv(table: FlowTable, path, label_column: str = "Label", id_column: str = "id") -> None:
    """Write a FlowTable back to CSV (id column first, label column last)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([id_column, *table.feature_names, label_column])
        for i in range(table.n):
            writer.writerow([table.sample_ids[i], *[repr(float(v)) for v in table.values[i]], table.labels[i]])


# --------------------------------------------------------------------------
# host tensors (HFT1)


@dataclass(frozen=True)
class HostTensorSet:
    sample_ids: tuple[str, ...]
    event: np.ndarray     # N x m x n, float32
    message: np.ndarray   # N x p x q, float32

    def __post_init__(self):
        event = np.asarray(self.event, dtype=np.float32)
        message = np.asarray(self.message, dtype=np.float32)
        if event.ndim != 3 or message.ndim != 3:
            raise ValueError("event and message tensors must be N x rows x cols")
        if event.shape[0] != len(self.sample_ids) or message.shape[0] != len(self.sample_ids):
            raise ValueError("tensor sample counts must match sample_ids")
        if len(set(self.sample_ids)) != len(self.sample_ids):
            raise ValueError("sample ids must be unique")
        event.setflags(write=False)
        message.setflags(write=False)
        object.__setattr__(self, "event", event)
        object.__setattr__(self, "message", message)

    @property
    def n(self) -> int:
        return len(self.sample_ids)

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return (*self.event.shape[1:], *self.message.shape[1:])


def save_host_tensors(tensors: HostTensorSet, path) -> None:
    """Write the HFT1 container; byte-lossless round trip with the reader."""
    m, n, p, q = tensors.dims
    with open(path, "wb") as fh:
        fh.write(HFT1_MAGIC)
        bio.write_u16(fh, 1)
        bio.write_u64(fh, tensors.n)
        for d in (m, n, p, q):
            bio.write_u32(fh, d)
        for sid in tensors.sample_ids:
            bio.write_str(fh, sid)
        bio.write_array(fh, tensors.event, "float32")
        bio.write_array(fh, tensors.message, "float32")


def load_host_tensors(path) -> HostTensorSet:
    """Read an HFT1 container.

    Raises BadMagicError on a wrong magic or version, TruncatedFileError when
    the payload ends early, and DimMismatchError when bytes remain after the
    declared payload.
    """
    with open(path, "rb") as fh:
        bio.expect_magic(fh, HFT1_MAGIC)
        version = bio.read_u16(fh)
        if version != 1:
            raise bio.BadMagicError(f"unsupported HFT1 version {version}")
        count = bio.read_u64(fh)
        m, n, p, q = (bio.read_u32(fh) for _ in range(4))
        ids = tuple(bio.read_str(fh) for _ in range(count))
        event = bio.read_array(fh, count * m * n, "float32").reshape(count, m, n)
        message = bio.read_array(fh, count * p * q, "float32").reshape(count, p, q)
        bio.expect_eof(fh)
    return HostTensorSet(ids, event, message)


# --------------------------------------------------------------------------
# aligned dataset


@dataclass(frozen=True)
class AlignedDataset:
    """The join of the flow and host views, with integer labels.

    Immutable: every array is read-only and all operations below return new
    datasets.
    """

    sample_ids: tuple[str, ...]
    flow: np.ndarray       # N x f, float64
    event: np.ndarray      # N x m x n, float32
    message: np.ndarray    # N x p x q, float32
    labels: np.ndarray     # N, int64
    label_map: LabelMap

    def __post_init__(self):
        flow = np.asarray(self.flow, dtype=np.float64)
        event = np.asarray(self.event, dtype=np.float32)
        message = np.asarray(self.message, dtype=np.float32)
        labels = np.asarray(self.labels, dtype=np.int64)
        n = len(self.sample_ids)
        if flow.ndim != 2 or event.ndim != 3 or message.ndim != 3 or labels.ndim != 1:
            raise ValueError("bad array ranks for aligned dataset")
        if not (flow.shape[0] == event.shape[0] == message.shape[0] == labels.shape[0] == n):
            raise ValueError("all views must share the sample count")
        if labels.size and (labels.min() < 0 or labels.max() >= self.label_map.k):
            raise ValueError("labels outside the label map range")
        for arr, name in ((flow, "flow"), (event, "event"), (message, "message"), (labels, "labels")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return len(self.sample_ids)

    @property
    def dims(self) -> tuple[int, int, int, int, int]:
        return (self.flow.shape[1], *self.event.shape[1:], *self.message.shape[1:])

    def take(self, indices) -> "AlignedDataset":
        """New dataset with the given rows, in the given order."""
        indices = np.asarray(indices, dtype=np.int64)
        return AlignedDataset(
            tuple(self.sample_ids[i] for i in indices),
            self.flow[indices],
            self.event[indices],
            self.message[indices],
            self.labels[indices],
            self.label_map,
        )


def align(flow: FlowTable, host: HostTensorSet, label_map: LabelMap) -> AlignedDataset:
    """Join the two views on sample id, keeping flow-table order.

    The result contains exactly the ids present in both inputs. Raises
    EmptyIntersectionError when the id sets are disjoint and UnknownLabelError
    when a flow label is absent from the label map.
    """
    host_index = {sid: i for i, sid in enumerate(host.sample_ids)}
    flow_rows = []
    host_rows = []
    ids = []
    labels = []
    for i, sid in enumerate(flow.sample_ids):
        j = host_index.get(sid)
        if j is None:
            continue
        flow_rows.append(i)
        host_rows.append(j)
        ids.append(sid)
        labels.append(label_map.id_of(flow.labels[i]))
    if not ids:
        raise EmptyIntersectionError("no sample id occurs in both the flow table and the host tensors")
    return AlignedDataset(
        tuple(ids),
        flow.values[flow_rows],
        host.event[host_rows],
        host.message[host_rows],
        np.array(labels, dtype=np.int64),
        label_map,
    )


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_stratified(
    ds: AlignedDataset, test_fraction: float, seed: int
) -> tuple[AlignedDataset, AlignedDataset]:
    """Deterministic per-class split into (train, test).

    Each class contributes round(count * test_fraction) test samples, clamped
    so both sides keep at least one sample. Membership is drawn from the
    pinned SplitMix64 stream, so identical inputs and seed reproduce the
    partition exactly. Classes with fewer than two samples are rejected.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0,1)")
    counts = np.bincount(ds.labels, minlength=ds.label_map.k)
    for cid in range(ds.label_map.k):
        if 0 < counts[cid] < 2:
            raise ClassTooSmallError(ds.label_map.name_of(cid), int(counts[cid]))

    gen = SplitMix64(seed)
    test_mask = np.zeros(ds.n, dtype=bool)
    for cid in range(ds.label_map.k):
        members = np.flatnonzero(ds.labels == cid)
        if members.size == 0:
            continue
        n_test = _round_half_up(members.size * test_fraction)
        n_test = min(max(n_test, 1), members.size - 1)
        picks = gen.sample_without_replacement(members.size, n_test)
        test_mask[members[picks]] = True

    test_idx = np.flatnonzero(test_mask)
    train_idx = np.flatnonzero(~test_mask)
    return ds.take(train_idx), ds.take(test_idx)


def relabel_binary(ds: AlignedDataset) -> AlignedDataset:
    """Benign samples become class 0 ("benign"), everything else class 1 ("attack")."""
    labels = (ds.labels != ds.label_map.benign_id).astype(np.int64)
    return AlignedDataset(
        ds.sample_ids, ds.flow, ds.event, ds.message, labels,
        LabelMap(("benign", "attack"), benign_id=0),
    )


def filter_attacks(ds: AlignedDataset) -> AlignedDataset:
    """Keep only non-benign samples, order preserved, original labels retained."""
    keep = np.flatnonzero(ds.labels != ds.label_map.benign_id)
    if keep.size == 0:
        raise NoAttackSamplesError("dataset contains only benign samples")
    return ds.take(keep)


def class_distribution(ds: AlignedDataset) -> dict[str, int]:
    """Per-class sample counts; every mapped class appears, possibly with 0."""
    counts = np.bincount(ds.labels, minlength=ds.label_map.k)
    return {ds.label_map.name_of(i): int(counts[i]) for i in range(ds.label_map.k)}


def drop_small_classes(ds: AlignedDataset, min_count: int) -> AlignedDataset:
    """Remove classes with fewer than min_count samples and rebuild the label map.

    The benign class must survive the cut. Remaining classes keep their
    relative id order.
    """
    counts = np.bincount(ds.labels, minlength=ds.label_map.k)
    kept = [cid for cid in range(ds.label_map.k) if counts[cid] >= min_count]
    if ds.label_map.benign_id not in kept:
        raise DataError(f"benign class {ds.label_map.benign_name!r} falls below min size {min_count}")
    if len(kept) == ds.label_map.k:
        return ds
    new_names = tuple(ds.label_map.name_of(cid) for cid in kept)
    new_map = LabelMap(new_names, kept.index(ds.label_map.benign_id))
    remap = {old: new for new, old in enumerate(kept)}
    keep_rows = np.flatnonzero(np.isin(ds.labels, kept))
    sub = ds.take(keep_rows)
    labels = np.array([remap[v] for v in sub.labels], dtype=np.int64)
    return AlignedDataset(sub.sample_ids, sub.flow, sub.event, sub.message, labels, new_map)


# --------------------------------------------------------------------------
# ALD1 container (CLI staging format for aligned datasets)


def save_aligned(ds: AlignedDataset, path) -> None:
    f, m, n, p, q = ds.dims
    with open(path, "wb") as fh:
        fh.write(ALD1_MAGIC)
        bio.write_u16(fh, 1)
        bio.write_u64(fh, ds.n)
        for d in (f, m, n, p, q):
            bio.write_u32(fh, d)
        bio.write_u32(fh, ds.label_map.k)
        for name in ds.label_map.class_names:
            bio.write_str(fh, name)
        bio.write_u32(fh, ds.label_map.benign_id)
        for sid in ds.sample_ids:
            bio.write_str(fh, sid)
        bio.write_array(fh, ds.flow, "float64")
        bio.write_array(fh, ds.event, "float32")
        bio.write_array(fh, ds.message, "float32")
        bio.write_array(fh, ds.labels, "int64")


def load_aligned(path) -> AlignedDataset:
    with open(path, "rb") as fh:
        bio.expect_magic(fh, ALD1_MAGIC)
        version = bio.read_u16(fh)
        if version != 1:
            raise bio.BadMagicError(f"unsupported ALD1 version {version}")
        count = bio.read_u64(fh)
        f, m, n, p, q = (bio.read_u32(fh) for _ in range(5))
        k = bio.read_u32(fh)
        names = tuple(bio.read_str(fh) for _ in range(k))
        benign_id = bio.read_u32(fh)
        ids = tuple(bio.read_str(fh) for _ in range(count))
        flow = bio.read_array(fh, count * f, "float64").reshape(count, f)
        event = bio.read_array(fh, count * m * n, "float32").reshape(count, m, n)
        message = bio.read_array(fh, count * p * q, "float32").reshape(count, p, q)
        labels = bio.read_array(fh, count, "int64")
        bio.expect_eof(fh)
    return AlignedDataset(ids, flow, event, message, labels, LabelMap(names, benign_id))
