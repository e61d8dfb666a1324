"""Gradient-boosted decision trees with second-order leaf weights.

Binary problems use the logistic objective (one tree per round); K > 2 uses a
one-tree-per-class softmax objective with a synchronous probability update
per round. Split search is exact greedy over sorted feature values; ties at
equal gain resolve to the lowest feature index, then the lowest threshold, so
training is deterministic for any worker count (workers only parallelize
fixed feature blocks, and the block reduction is ordered).

The hessian for the softmax objective is the conservative 2*p*(1-p) diagonal
bound; binary uses the exact p*(1-p). Leaf weights are -G/(H + l2_lambda)
shrunk by the learning rate. The base margin is the log-odds of (lightly
smoothed) class priors, which speeds convergence on benign-heavy data.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from . import _binio as bio
from .errors import DimMismatchError, NonFiniteFeatureError, SingleClassInputError
from .rng import SplitMix64, derive_seed

GBT1_MAGIC = b"GBT1"

_BLOCK = 256          # features per split-search block; fixed so worker count cannot affect results
_OBJECTIVES = ("binary", "softmax")


@dataclass(frozen=True)
class GbdtParams:
    rounds: int = 100
    max_depth: int = 6
    learning_rate: float = 0.3
    min_child_weight: float = 1.0
    l2_lambda: float = 1.0
    subsample: float = 1.0
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0,1]")
        if self.l2_lambda < 0.0:
            raise ValueError("l2_lambda must be >= 0")
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError("subsample must be in (0,1]")
        if self.min_child_weight < 0.0:
            raise ValueError("min_child_weight must be >= 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class Tree:
    """Flat node arrays; feature -1 marks a leaf, children are node indices."""

    feature: np.ndarray     # int32
    threshold: np.ndarray   # float64 (nan on leaves)
    left: np.ndarray        # int32 (-1 on leaves)
    right: np.ndarray       # int32
    value: np.ndarray       # float64 leaf weight (learning rate applied)

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Route rows to leaves: feature < threshold goes left."""
        idx = np.zeros(features.shape[0], dtype=np.int32)
        active = np.flatnonzero(self.feature[idx] >= 0)
        while active.size:
            cur = idx[active]
            go_left = features[active, self.feature[cur]] < self.threshold[cur]
            idx[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[idx[active]] >= 0]
        return self.value[idx]


@dataclass
class GbdtModel:
    objective: str                 # "binary" | "softmax"
    class_count: int
    feature_count: int
    base_margin: np.ndarray        # length 1 (binary) or K (softmax)
    trees: list[Tree]              # round-major; softmax interleaves classes
    params: GbdtParams
    train_loss: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if self.objective not in _OBJECTIVES:
            raise ValueError(f"objective must be one of {_OBJECTIVES}")


# --------------------------------------------------------------------------
# training


def _stable_sigmoid(m: np.ndarray) -> np.ndarray:
    out = np.empty_like(m)
    pos = m >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-m[pos]))
    em = np.exp(m[~pos])
    out[~pos] = em / (1.0 + em)
    return out


def _softmax(margins: np.ndarray) -> np.ndarray:
    shifted = margins - margins.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _leaf_weight(g_sum: float, h_sum: float, params: GbdtParams) -> float:
    denom = h_sum + params.l2_lambda
    if denom <= 0.0:
        return 0.0
    return -(g_sum / denom) * params.learning_rate


@njit(cache=True, nogil=True)
def _scan_block(values_t, sorted_idx, g, h, g_total, h_total, lam, mcw):
    """Exact greedy split scan over one feature block of a node.

    Candidate i splits between sorted positions i and i+1; only positions
    where the value strictly increases are valid. Accepts strictly positive
    gain only, keeping the first best seen, so ties resolve to the lowest
    feature then the lowest threshold. Returns
    (gain, local_feature, split_pos, left_value, right_value, g_left, h_left)
    with local_feature == -1 when no split qualifies.
    """
    n_feats, n = sorted_idx.shape
    denom_parent = h_total + lam
    parent = g_total * g_total / denom_parent if denom_parent > 0.0 else 0.0
    best_gain = 0.0
    best_feat = -1
    best_pos = -1
    best_a = 0.0
    best_b = 0.0
    best_gl = 0.0
    best_hl = 0.0
    for fi in range(n_feats):
        gl = 0.0
        hl = 0.0
        for i in range(n - 1):
            idx = sorted_idx[fi, i]
            gl += g[idx]
            hl += h[idx]
            a = values_t[fi, idx]
            b = values_t[fi, sorted_idx[fi, i + 1]]
            if b <= a:
                continue
            hr = h_total - hl
            if hl < mcw or hr < mcw:
                continue
            gr = g_total - gl
            gain = gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent
            if gain > best_gain:
                best_gain = gain
                best_feat = fi
                best_pos = i
                best_a = a
                best_b = b
                best_gl = gl
                best_hl = hl
    return best_gain, best_feat, best_pos, best_a, best_b, best_gl, best_hl


@njit(cache=True, nogil=True)
def _partition_sorted(sorted_idx, member, n_left):
    """Split per-feature sorted index lists by row membership, keeping order."""
    n_feats, n = sorted_idx.shape
    left = np.empty((n_feats, n_left), dtype=np.int32)
    right = np.empty((n_feats, n - n_left), dtype=np.int32)
    for fi in range(n_feats):
        li = 0
        ri = 0
        for i in range(n):
            idx = sorted_idx[fi, i]
            if member[idx]:
                left[fi, li] = idx
                li += 1
            else:
                right[fi, ri] = idx
                ri += 1
    return left, right


def _block_best(values_t, sorted_idx, g, h, g_total, h_total, params, feat_offset):
    gain, feat, pos, a, b, gl, hl = _scan_block(
        values_t, sorted_idx, g, h, g_total, h_total,
        params.l2_lambda, params.min_child_weight,
    )
    if feat < 0:
        return None
    return (gain, feat_offset + feat, a, b, pos + 1, gl, hl)


class _TreeBuilder:
    """Level-order exact-greedy tree growth over pre-sorted feature indices."""

    def __init__(self, values: np.ndarray, values_t: np.ndarray, params: GbdtParams, pool):
        self.values = values
        self.values_t = values_t          # t x N, C-contiguous
        self.params = params
        self.pool = pool
        self.n_features = values.shape[1]

    def build(self, sorted_idx: np.ndarray, g: np.ndarray, h: np.ndarray):
        """Returns (Tree, leaf_rows) where leaf_rows pairs row ids with leaf node ids."""
        feature: list[int] = []
        threshold: list[float] = []
        left: list[int] = []
        right: list[int] = []
        value: list[float] = []
        leaf_assignments: list[tuple[np.ndarray, float]] = []

        def new_node() -> int:
            feature.append(-1)
            threshold.append(np.nan)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            return len(feature) - 1

        root = new_node()
        g_root = float(g[sorted_idx[0]].sum())
        h_root = float(h[sorted_idx[0]].sum())
        queue = [(root, sorted_idx, g_root, h_root, 0)]
        while queue:
            node, idx, g_sum, h_sum, depth = queue.pop(0)
            rows = idx[0]
            split = None
            if depth < self.params.max_depth and rows.size >= 2:
                split = self._find_split(idx, g, h, g_sum, h_sum)
            if split is None:
                w = _leaf_weight(g_sum, h_sum, self.params)
                value[node] = w
                leaf_assignments.append((rows, w))
                continue
            _, feat, a, b, left_count, g_left, h_left = split
            thr = 0.5 * (a + b)
            if thr <= a:   # midpoint collapsed onto the left value; b still routes right
                thr = b
            member = np.zeros(self.values.shape[0], dtype=bool)
            member[idx[feat, :left_count]] = True
            left_idx, right_idx = _partition_sorted(idx, member, left_count)
            feature[node] = feat
            threshold[node] = thr
            lchild = new_node()
            rchild = new_node()
            left[node] = lchild
            right[node] = rchild
            queue.append((lchild, left_idx, g_left, h_left, depth + 1))
            queue.append((rchild, right_idx, g_sum - g_left, h_sum - h_left, depth + 1))

        tree = Tree(
            np.array(feature, dtype=np.int32),
            np.array(threshold, dtype=np.float64),
            np.array(left, dtype=np.int32),
            np.array(right, dtype=np.int32),
            np.array(value, dtype=np.float64),
        )
        return tree, leaf_assignments

    def _find_split(self, idx, g, h, g_sum, h_sum):
        blocks = range(0, self.n_features, _BLOCK)
        tasks = [
            (self.values_t[b:b + _BLOCK], idx[b:b + _BLOCK], g, h, g_sum, h_sum, self.params, b)
            for b in blocks
        ]
        if self.pool is None:
            results = [_block_best(*t) for t in tasks]
        else:
            results = list(self.pool.map(lambda t: _block_best(*t), tasks))
        best = None
        for cand in results:    # block order == ascending feature ranges
            if cand is None:
                continue
            if best is None or cand[0] > best[0]:
                best = cand
        return best


def _filtered_order(order_t: np.ndarray, member: np.ndarray, count: int) -> np.ndarray:
    left, _ = _partition_sorted(order_t, member, count)
    return left


def train(features, labels, class_count: int, params: GbdtParams = GbdtParams()) -> GbdtModel:
    """Fit a boosted-tree model on N x t features with labels in [0, class_count).

    Deterministic given (data, params): the subsample stream is seeded from
    params.seed and split search is order-fixed. Raises SingleClassInputError
    unless at least two labels occur, NonFiniteFeatureError on bad values.
    """
    values = np.ascontiguousarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if values.ndim != 2 or values.shape[0] != y.shape[0]:
        raise ValueError("features must be N x t with one label per row")
    n, t = values.shape
    if n < 2:
        raise ValueError("need at least 2 training rows")
    if not np.isfinite(values).all():
        raise NonFiniteFeatureError("training features contain non-finite values")
    if class_count < 2:
        raise ValueError("class_count must be >= 2")
    if y.min() < 0 or y.max() >= class_count:
        raise ValueError(f"labels outside [0,{class_count})")
    if np.unique(y).size < 2:
        raise SingleClassInputError("training labels contain a single class")

    binary = class_count == 2
    counts = np.bincount(y, minlength=class_count).astype(np.float64)
    if binary:
        p1 = (counts[1] + 0.5) / (n + 1.0)
        base = np.array([np.log(p1 / (1.0 - p1))])
        margins = np.full(n, base[0])
    else:
        prior = (counts + 0.5) / (n + 0.5 * class_count)
        base = np.log(prior)
        margins = np.tile(base, (n, 1))

    values_t = np.ascontiguousarray(values.T)
    order_t = np.ascontiguousarray(np.argsort(values, axis=0, kind="stable").T.astype(np.int32))
    sub_rng = SplitMix64(derive_seed(params.seed, 1))
    pool = ThreadPoolExecutor(max_workers=params.workers) if params.workers > 1 else None
    builder = _TreeBuilder(values, values_t, params, pool)

    trees: list[Tree] = []
    losses: list[float] = []
    eps = 1e-15
    try:
        for _ in range(params.rounds):
            if params.subsample < 1.0:
                n_sub = max(1, _round_count(params.subsample * n))
                member = np.zeros(n, dtype=bool)
                member[sub_rng.sample_without_replacement(n, n_sub)] = True
                round_idx = _filtered_order(order_t, member, n_sub)
            else:
                round_idx = order_t
            if binary:
                p = _stable_sigmoid(margins)
                g = p - (y == 1)
                h = p * (1.0 - p)
                tree, leaves = builder.build(round_idx, g, h)
                if params.subsample < 1.0:
                    # out-of-sample rows also receive the tree's contribution
                    margins += tree.predict(values)
                else:
                    for rows, w in leaves:
                        margins[rows] += w
                trees.append(tree)
                p = np.clip(_stable_sigmoid(margins), eps, 1.0 - eps)
                losses.append(float(-np.mean(np.where(y == 1, np.log(p), np.log(1.0 - p)))))
            else:
                p = _softmax(margins)
                round_trees = []
                for c in range(class_count):
                    g = p[:, c] - (y == c)
                    h = 2.0 * p[:, c] * (1.0 - p[:, c])
                    tree, leaves = builder.build(round_idx, g, h)
                    round_trees.append((tree, leaves))
                for c, (tree, leaves) in enumerate(round_trees):
                    if params.subsample < 1.0:
                        margins[:, c] += tree.predict(values)
                    else:
                        for rows, w in leaves:
                            margins[rows, c] += w
                    trees.append(tree)
                probs = np.clip(_softmax(margins)[np.arange(n), y], eps, None)
                losses.append(float(-np.mean(np.log(probs))))
    finally:
        if pool is not None:
            pool.shutdown()

    return GbdtModel(
        objective="binary" if binary else "softmax",
        class_count=class_count,
        feature_count=t,
        base_margin=base,
        trees=trees,
        params=params,
        train_loss=np.array(losses),
    )


def _round_count(x: float) -> int:
    return int(np.floor(x + 0.5))


def _accumulate(trees: Sequence[Tree], features: np.ndarray, class_count: int) -> np.ndarray:
    """Sum tree outputs into per-class margin columns (round-major tree order)."""
    out = np.zeros((features.shape[0], class_count))
    for i, tree in enumerate(trees):
        out[:, i % class_count] += tree.predict(features)
    return out


# --------------------------------------------------------------------------
# prediction


def predict(model: GbdtModel, features) -> tuple[np.ndarray, np.ndarray]:
    """(labels, scores) for M x t features; scores rows are probabilities.

    Labels are per-row score argmaxes with ties resolved to the lowest class
    id. Raises DimMismatchError when the width differs from the model.
    """
    values = np.ascontiguousarray(features, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != model.feature_count:
        raise DimMismatchError(
            f"features are {values.shape}, model expects (M, {model.feature_count})"
        )
    if model.objective == "binary":
        margin = np.full(values.shape[0], model.base_margin[0])
        for tree in model.trees:
            margin += tree.predict(values)
        p = _stable_sigmoid(margin)
        scores = np.column_stack([1.0 - p, p])
    else:
        margins = np.tile(model.base_margin, (values.shape[0], 1))
        margins += _accumulate(model.trees, values, model.class_count)
        scores = _softmax(margins)
    labels = np.argmax(scores, axis=1).astype(np.int64)
    return labels, scores


# --------------------------------------------------------------------------
# pluggable classifier contract


class ClassifierContract(ABC):
    """Train/predict pair the cascade composes; models are opaque to callers.

    predict must return (labels, scores) where labels are the per-row argmax
    of scores with lowest-id tie-breaking and each finite score row sums to 1
    for probabilistic models.
    """

    @abstractmethod
    def train(self, features, labels, class_count: int, params):
        ...

    @abstractmethod
    def predict(self, model, features) -> tuple[np.ndarray, np.ndarray]:
        ...


class GbdtClassifier(ClassifierContract):
    """The built-in boosted-tree implementation of the contract."""

    def train(self, features, labels, class_count: int, params: GbdtParams) -> GbdtModel:
        return train(features, labels, class_count, params)

    def predict(self, model: GbdtModel, features) -> tuple[np.ndarray, np.ndarray]:
        return predict(model, features)


# --------------------------------------------------------------------------
# serialization and audit dump


# workers is an execution knob with no effect on the learned model, so it is
# deliberately absent from the container: models trained with different worker
# counts serialize to identical bytes.


def _write_params(fh, params: GbdtParams) -> None:
    bio.write_u32(fh, params.rounds)
    bio.write_u32(fh, params.max_depth)
    bio.write_f64(fh, params.learning_rate)
    bio.write_f64(fh, params.min_child_weight)
    bio.write_f64(fh, params.l2_lambda)
    bio.write_f64(fh, params.subsample)
    bio.write_i64(fh, params.seed)


def _read_params(fh) -> GbdtParams:
    return GbdtParams(
        rounds=bio.read_u32(fh),
        max_depth=bio.read_u32(fh),
        learning_rate=bio.read_f64(fh),
        min_child_weight=bio.read_f64(fh),
        l2_lambda=bio.read_f64(fh),
        subsample=bio.read_f64(fh),
        seed=bio.read_i64(fh),
    )


def write_gbdt(model: GbdtModel, fh) -> None:
    fh.write(GBT1_MAGIC)
    bio.write_u16(fh, 1)
    bio.write_u8(fh, _OBJECTIVES.index(model.objective))
    bio.write_u32(fh, model.class_count)
    bio.write_u32(fh, model.feature_count)
    _write_params(fh, model.params)
    bio.write_u32(fh, model.base_margin.shape[0])
    bio.write_array(fh, model.base_margin, "float64")
    bio.write_u32(fh, len(model.trees))
    for tree in model.trees:
        bio.write_u32(fh, tree.n_nodes)
        bio.write_array(fh, tree.feature, "int32")
        bio.write_array(fh, tree.threshold, "float64")
        bio.write_array(fh, tree.left, "int32")
        bio.write_array(fh, tree.right, "int32")
        bio.write_array(fh, tree.value, "float64")
    bio.write_u32(fh, model.train_loss.shape[0])
    bio.write_array(fh, model.train_loss, "float64")


def read_gbdt(fh) -> GbdtModel:
    bio.expect_magic(fh, GBT1_MAGIC)
    version = bio.read_u16(fh)
    if version != 1:
        raise bio.BadMagicError(f"unsupported GBT1 version {version}")
    objective = _OBJECTIVES[bio.read_u8(fh)]
    class_count = bio.read_u32(fh)
    feature_count = bio.read_u32(fh)
    params = _read_params(fh)
    base = bio.read_array(fh, bio.read_u32(fh), "float64")
    trees = []
    for _ in range(bio.read_u32(fh)):
        n_nodes = bio.read_u32(fh)
        trees.append(Tree(
            bio.read_array(fh, n_nodes, "int32"),
            bio.read_array(fh, n_nodes, "float64"),
            bio.read_array(fh, n_nodes, "int32"),
            bio.read_array(fh, n_nodes, "int32"),
            bio.read_array(fh, n_nodes, "float64"),
        ))
    loss = bio.read_array(fh, bio.read_u32(fh), "float64")
    return GbdtModel(objective, class_count, feature_count, base, trees, params, loss)


def save_gbdt(model: GbdtModel, path) -> None:
    with open(path, "wb") as fh:
        write_gbdt(model, fh)


def load_gbdt(path) -> GbdtModel:
    with open(path, "rb") as fh:
        model = read_gbdt(fh)
        bio.expect_eof(fh)
    return model


def dump_text(model: GbdtModel) -> str:
    """Human-readable model dump for audit."""
    lines = [
        f"objective={model.objective} classes={model.class_count} "
        f"features={model.feature_count} trees={len(model.trees)}",
        "base_margin=" + " ".join(f"{v:.6g}" for v in model.base_margin),
    ]
    per_round = model.class_count if model.objective == "softmax" else 1
    for i, tree in enumerate(model.trees):
        lines.append(f"tree {i} (round {i // per_round}, class {i % per_round}):")
        def walk(node: int, indent: int):
            pad = "  " * (indent + 1)
            if tree.feature[node] < 0:
                lines.append(f"{pad}leaf value={tree.value[node]:.6g}")
                return
            lines.append(f"{pad}[f{tree.feature[node]} < {tree.threshold[node]:.6g}]")
            walk(tree.left[node], indent + 1)
            walk(tree.right[node], indent + 1)
        walk(0, 0)
    return "\n".join(lines) + "\n"
