import numpy as np

from fusionids.dataset import AlignedDataset, FlowTable, HostTensorSet, LabelMap


def make_aligned(labels, label_map=None, f=3, m=2, n=2, p=1, q=3, seed=0):
    """Random aligned dataset with the given label names (one per sample)."""
    rng = np.random.default_rng(seed)
    n_samples = len(labels)
    if label_map is None:
        label_map = LabelMap.from_names(set(labels) | {"benign"})
    return AlignedDataset(
        tuple(f"s{i}" for i in range(n_samples)),
        rng.normal(size=(n_samples, f)),
        rng.normal(size=(n_samples, m, n)).astype(np.float32),
        rng.normal(size=(n_samples, p, q)).astype(np.float32),
        np.array([label_map.id_of(name) for name in labels], dtype=np.int64),
        label_map,
    )


def make_flow_and_host(ids, labels, f=2, m=2, n=2, p=1, q=3, seed=0):
    rng = np.random.default_rng(seed)
    count = len(ids)
    table = FlowTable(
        tuple(ids),
        tuple(f"ft{j}" for j in range(f)),
        rng.normal(size=(count, f)),
        tuple(labels),
    )
    tensors = HostTensorSet(
        tuple(ids),
        rng.normal(size=(count, m, n)).astype(np.float32),
        rng.normal(size=(count, p, q)).astype(np.float32),
    )
    return table, tensors
