"""Dimensionality reduction: seeded row/column selection and PCA.

Selection plans shrink a host matrix to a target (r, c) by sampling row and
column indices without replacement from the pinned SplitMix64 stream (rows
first, then columns, one stream per plan), so a plan is a pure function of
(source dims, target, seed). PCA is fit by thin SVD of the centered data:
the fused width can be far larger than the sample count, which makes the
d x d covariance route intractable while SVD on N x d stays cheap.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _binio as bio
from .errors import (
    DegenerateDataError,
    DimMismatchError,
    KTooLargeError,
    TargetExceedsSourceError,
)
from .rng import SplitMix64

PCA1_MAGIC = b"PCA1"


@dataclass(frozen=True)
class SelectionPlan:
    source_dims: tuple[int, int]
    row_indices: np.ndarray    # sorted ascending, distinct, int64
    col_indices: np.ndarray
    seed: int

    def __post_init__(self):
        rows = np.asarray(self.row_indices, dtype=np.int64)
        cols = np.asarray(self.col_indices, dtype=np.int64)
        for idx, bound, what in ((rows, self.source_dims[0], "row"), (cols, self.source_dims[1], "col")):
            if idx.ndim != 1 or idx.size == 0:
                raise ValueError(f"{what} indices must be a non-empty vector")
            if (np.diff(idx) <= 0).any():
                raise ValueError(f"{what} indices must be sorted and distinct")
            if idx[0] < 0 or idx[-1] >= bound:
                raise ValueError(f"{what} indices outside source dims")
        rows.setflags(write=False)
        cols.setflags(write=False)
        object.__setattr__(self, "row_indices", rows)
        object.__setattr__(self, "col_indices", cols)

    @property
    def target(self) -> tuple[int, int]:
        return (self.row_indices.size, self.col_indices.size)

    def to_json(self) -> str:
        """Canonical byte representation, for comparing plans across runs."""
        return json.dumps(
            {
                "source_dims": list(self.source_dims),
                "rows": [int(i) for i in self.row_indices],
                "cols": [int(i) for i in self.col_indices],
                "seed": self.seed,
            },
            sort_keys=True,
        )


def make_selection_plan(source_dims: tuple[int, int], target: tuple[int, int], seed: int) -> SelectionPlan:
    """Draw r distinct rows then c distinct columns from one seeded stream.

    Deterministic: (source_dims, target, seed) always yields the same plan.
    """
    rows, cols = source_dims
    r, c = target
    if r < 1 or c < 1:
        raise ValueError("target counts must be at least 1")
    if r > rows or c > cols:
        raise TargetExceedsSourceError(f"target {target} exceeds source {source_dims}")
    gen = SplitMix64(seed)
    row_idx = sorted(gen.sample_without_replacement(rows, r))
    col_idx = sorted(gen.sample_without_replacement(cols, c))
    return SelectionPlan(
        (rows, cols),
        np.array(row_idx, dtype=np.int64),
        np.array(col_idx, dtype=np.int64),
        seed,
    )


def apply_selection(plan: SelectionPlan, matrix: np.ndarray) -> np.ndarray:
    """Extract the planned submatrix: out[i][j] = matrix[rows[i]][cols[j]]."""
    matrix = np.asarray(matrix)
    if matrix.shape != plan.source_dims:
        raise DimMismatchError(f"matrix is {matrix.shape}, plan expects {plan.source_dims}")
    return matrix[np.ix_(plan.row_indices, plan.col_indices)]


def apply_selection_batch(plan: SelectionPlan, stack: np.ndarray) -> np.ndarray:
    """Apply one plan to a stack of matrices (N x rows x cols)."""
    stack = np.asarray(stack)
    if stack.ndim != 3 or stack.shape[1:] != plan.source_dims:
        raise DimMismatchError(f"stack is {stack.shape}, plan expects (N, *{plan.source_dims})")
    return stack[:, plan.row_indices][:, :, plan.col_indices]


# --------------------------------------------------------------------------
# PCA


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray                  # d
    components: np.ndarray            # k x d, orthonormal rows
    explained_variance: np.ndarray    # k, nonincreasing

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        comp = np.asarray(self.components, dtype=np.float64)
        ev = np.asarray(self.explained_variance, dtype=np.float64)
        if comp.ndim != 2 or mean.ndim != 1 or comp.shape[1] != mean.shape[0]:
            raise ValueError("components must be k x d with a length-d mean")
        if ev.shape != (comp.shape[0],):
            raise ValueError("explained_variance must have one entry per component")
        if (np.diff(ev) > 1e-9).any() or (ev < -1e-12).any():
            raise ValueError("explained_variance must be nonnegative and nonincreasing")
        for arr, name in ((mean, "mean"), (comp, "components"), (ev, "explained_variance")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def input_dim(self) -> int:
        return self.mean.shape[0]

    @property
    def k(self) -> int:
        return self.components.shape[0]


def fit_pca(data: np.ndarray, k: int) -> PcaModel:
    """Fit a k-component PCA on an N x d matrix.

    mean is the column mean; components are the top-k right singular
    directions of the centered data with the sign convention that each
    component's largest-magnitude entry is positive; explained_variance is
    squared singular values over (N - 1).
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError("PCA needs an N x d matrix with N >= 2")
    n, d = data.shape
    if not 1 <= k <= min(n - 1, d):
        raise KTooLargeError(f"k={k} outside [1, min(N-1={n - 1}, d={d})]")
    mean = data.mean(axis=0)
    centered = data - mean
    if np.all(data == data[0]):
        raise DegenerateDataError("all rows identical; no variance to decompose")
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:k].copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(mean, components, (singular[:k] ** 2) / (n - 1))


def apply_pca(model: PcaModel, data: np.ndarray) -> np.ndarray:
    """Project M x d rows: (data - mean) @ components^T."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != model.input_dim:
        raise DimMismatchError(f"data width {data.shape} does not match model d={model.input_dim}")
    return (data - model.mean) @ model.components.T


def reconstruct_pca(model: PcaModel, projected: np.ndarray) -> np.ndarray:
    """Map projections back to the input space: projected @ components + mean."""
    projected = np.asarray(projected, dtype=np.float64)
    if projected.ndim != 2 or projected.shape[1] != model.k:
        raise DimMismatchError(f"projected width {projected.shape} does not match k={model.k}")
    return projected @ model.components + model.mean


def save_pca(model: PcaModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(PCA1_MAGIC)
        bio.write_u32(fh, model.input_dim)
        bio.write_u32(fh, model.k)
        bio.write_array(fh, model.mean, "float64")
        bio.write_array(fh, model.components, "float64")
        bio.write_array(fh, model.explained_variance, "float64")


def load_pca(path) -> PcaModel:
    with open(path, "rb") as fh:
        bio.expect_magic(fh, PCA1_MAGIC)
        d = bio.read_u32(fh)
        k = bio.read_u32(fh)
        mean = bio.read_array(fh, d, "float64")
        components = bio.read_array(fh, k * d, "float64").reshape(k, d)
        ev = bio.read_array(fh, k, "float64")
        bio.expect_eof(fh)
    return PcaModel(mean, components, ev)
