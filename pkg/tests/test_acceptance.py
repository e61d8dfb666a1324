"""Acceptance suite: one test per exit criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s`. The directional benchmark
(criterion 8) generates a 20000-sample dataset and trains three pipelines
over five rounds; expect a few minutes of runtime for the whole module.
"""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from fusionids.cascade import CascadeModel, evaluate_cascade, predict_cascade
from fusionids.dataset import LabelMap
from fusionids.experiment import ExperimentConfig, run_experiment
from fusionids.fusion import FusionMode, flatten, hybrid_width
from fusionids.gbdt import GbdtParams, predict, train, write_gbdt
from fusionids.metrics import ConfusionMatrix, aggregate, class_scores, confusion
from fusionids.reduction import fit_pca, apply_pca, make_selection_plan, reconstruct_pca
from fusionids.rng import SplitMix64
from fusionids.synth import imbalanced_benchmark, write_synthetic

FIXTURES = Path(__file__).parent / "fixtures"


def _pass(name: str) -> None:
    print(f"\n[PASS] {name}")


# --------------------------------------------------------------------------
# 1. width arithmetic


def test_width_arithmetic():
    h3 = FusionMode.FLOW_EVENT_MESSAGE
    assert hybrid_width(132, 28, 8, 100, 768, h3) == 77156
    assert hybrid_width(63, 2182, 8, 512, 768, h3) == 410735
    _pass("width arithmetic: 77,156 and 410,735 exact")


# --------------------------------------------------------------------------
# 2. flatten round trip


def test_flatten_round_trip_bitwise():
    rng = np.random.default_rng(0)
    for _ in range(200):
        m = int(rng.integers(1, 65))
        n = int(rng.integers(1, 65))
        mat = rng.normal(size=(m, n))
        assert np.array_equal(flatten(mat).reshape(m, n), mat)
    _pass("flatten/reshape round trip bitwise on 200 random matrices up to 64x64")


# --------------------------------------------------------------------------
# 3. selection determinism


def test_selection_determinism_across_processes():
    script = (
        "from fusionids.reduction import make_selection_plan;"
        "print(make_selection_plan((100,768),(15,50),0).to_json())"
    )
    outputs = [
        subprocess.run([sys.executable, "-c", script], capture_output=True, text=True, check=True).stdout
        for _ in range(2)
    ]
    assert outputs[0] == outputs[1]
    assert json.loads(outputs[0])["rows"] == make_selection_plan((100, 768), (15, 50), 0).row_indices.tolist()

    fixture = FIXTURES / "splitmix64_seed0.txt"
    expected = [int(line) for line in fixture.read_text().splitlines() if not line.startswith("#")]
    gen = SplitMix64(0)
    assert [gen.next_u64() for _ in range(16)] == expected
    _pass("selection plans identical across process runs; seed-0 stream matches the pinned fixture")


# --------------------------------------------------------------------------
# 4. PCA correctness


def test_pca_against_eigendecomposition_oracle():
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = int(rng.integers(6, 24))
        d = int(rng.integers(2, 7))
        k = int(rng.integers(1, min(n - 1, d) + 1))
        data = rng.normal(size=(n, d))
        model = fit_pca(data, k)
        centered = data - data.mean(axis=0)
        eigval, eigvec = np.linalg.eigh(centered.T @ centered / (n - 1))
        order = np.argsort(eigval)[::-1][:k]
        oracle = eigvec[:, order].T.copy()
        for row in oracle:
            if row[np.argmax(np.abs(row))] < 0:
                row *= -1.0
        assert np.allclose(model.components, oracle, atol=1e-8)
        assert np.allclose(model.explained_variance, eigval[order], atol=1e-8)
    _pass("PCA components match the covariance-eigendecomposition oracle to 1e-8 (50 matrices)")


def test_pca_explained_variance_of_known_gaussian():
    eigs = np.array([9.0, 6.0, 4.0, 2.5, 1.5, 0.8])
    d = len(eigs)
    rng = np.random.default_rng(86)
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    data = rng.normal(size=(5000, d)) @ np.diag(np.sqrt(eigs)) @ q.T + rng.normal(size=d)
    model = fit_pca(data, d)
    rel = np.abs(model.explained_variance - eigs) / eigs
    assert rel.max() <= 0.02
    _pass("explained variance within 2% of analytic eigenvalues at N=5000")


def test_pca_reconstruction_error_monotone_in_k():
    data = np.random.default_rng(2).normal(size=(200, 16)) @ np.diag(np.linspace(4, 0.25, 16))
    prev = np.inf
    for k in range(1, 16):
        model = fit_pca(data, k)
        err = float(((reconstruct_pca(model, apply_pca(model, data)) - data) ** 2).sum())
        assert err <= prev + 1e-9
        prev = err
    _pass("PCA reconstruction error nonincreasing in k")


# --------------------------------------------------------------------------
# 5. GBDT


def _separable_toy(n, seed):
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(-1, 1, n)
    x0[np.abs(x0) < 0.05] += np.sign(x0[np.abs(x0) < 0.05] + 0.5) * 0.05
    data = np.column_stack([x0, rng.normal(size=n)])
    return data, (x0 >= 0).astype(np.int64)


def test_gbdt_toy_sets_and_loss():
    data, labels = _separable_toy(2000, seed=3)
    train_x, test_x = data[:1400], data[1400:]
    train_y, test_y = labels[:1400], labels[1400:]
    model = train(train_x, train_y, 2, GbdtParams(rounds=20, max_depth=3, seed=4))
    pred, _ = predict(model, test_x)
    acc = float(np.mean(pred == test_y))
    assert acc >= 0.98
    assert np.all(np.diff(model.train_loss) <= 1e-12)

    rng = np.random.default_rng(5)
    centers = rng.normal(size=(4, 3)) * 8
    blob_x = np.vstack([centers[c] + rng.normal(size=(500, 3)) for c in range(4)])
    blob_y = np.repeat(np.arange(4), 500)
    shuffle = rng.permutation(2000)
    blob_x, blob_y = blob_x[shuffle], blob_y[shuffle]
    blob_model = train(blob_x[:1400], blob_y[:1400], 4, GbdtParams(rounds=15, max_depth=4, seed=6))
    blob_pred, _ = predict(blob_model, blob_x[1400:])
    cm = confusion(blob_y[1400:], blob_pred, 4)
    macro, _, _ = aggregate(*class_scores(cm))
    assert macro >= 0.95
    assert np.all(np.diff(blob_model.train_loss) <= 1e-12)
    _pass(f"GBDT toy accuracy {acc:.3f} >= 0.98, blob macro F1 {macro:.3f} >= 0.95, loss monotone")


def test_gbdt_worker_determinism(monkeypatch):
    import io

    import fusionids.gbdt as gbdt_mod

    monkeypatch.setattr(gbdt_mod, "_BLOCK", 2)
    data, labels = _separable_toy(600, seed=7)
    data = np.hstack([data, np.random.default_rng(8).normal(size=(600, 6))])
    blobs = []
    for workers in (1, 2, 4):
        buf = io.BytesIO()
        write_gbdt(train(data, labels, 2, GbdtParams(rounds=5, max_depth=3, seed=9, workers=workers)), buf)
        blobs.append(buf.getvalue())
    assert blobs[0] == blobs[1] == blobs[2]
    _pass("GBDT serialization identical for worker counts 1, 2, 4")


# --------------------------------------------------------------------------
# 6. metrics oracle


def test_metrics_brute_force_oracle():
    rng = np.random.default_rng(10)
    for _ in range(10):
        k = int(rng.integers(2, 8))
        counts = rng.integers(0, 40, (k, k))
        cm = ConfusionMatrix(counts, tuple(f"c{i}" for i in range(k)))
        precision, recall, f1, support = class_scores(cm)
        macro, weighted, accuracy = aggregate(precision, recall, f1, support)
        exp_p, exp_r, exp_f = [], [], []
        for c in range(k):
            tp = counts[c][c]
            col = counts[:, c].sum()
            row = counts[c].sum()
            pp = tp / col if col else 0.0
            rr = tp / row if row else 0.0
            exp_p.append(pp)
            exp_r.append(rr)
            exp_f.append(2 * pp * rr / (pp + rr) if pp + rr else 0.0)
        total = counts.sum()
        assert np.all(np.abs(precision - exp_p) <= 1e-12)
        assert np.all(np.abs(recall - exp_r) <= 1e-12)
        assert np.all(np.abs(f1 - exp_f) <= 1e-12)
        assert abs(macro - np.mean(exp_f)) <= 1e-12
        assert abs(weighted - np.dot(counts.sum(axis=1), exp_f) / total) <= 1e-12
        assert abs(accuracy - counts.trace() / total) <= 1e-12

    cm = ConfusionMatrix(np.array([[2, 0], [1, 1]]), ("a", "b"))
    macro, _, _ = aggregate(*class_scores(cm))
    assert abs(macro - 0.7333333333333334) <= 1e-12
    _pass("metrics match brute force to 1e-12 on 10 random matrices; fixture macro F1 = 0.7333...")


# --------------------------------------------------------------------------
# 7. cascade composition


class _StubModel:
    def __init__(self, table, class_count):
        self.table = dict(table)
        self.class_count = class_count


class _StubClassifier:
    def train(self, *a, **k):
        raise NotImplementedError

    def predict(self, model, features):
        keys = np.asarray(features)[:, 0].astype(int)
        labels = np.array([model.table[k] for k in keys], dtype=np.int64)
        scores = np.zeros((len(keys), model.class_count))
        scores[np.arange(len(keys)), labels] = 1.0
        return labels, scores


def _stub_cascade(lm, ml1_table, ml2_table):
    attack_ids = np.array([c for c in range(lm.k) if c != lm.benign_id], dtype=np.int64)
    return CascadeModel(
        _StubModel(ml1_table, 2), _StubModel(ml2_table, attack_ids.size),
        lm.benign_id, attack_ids, _StubClassifier(),
    )


def test_cascade_random_stub_configurations():
    rng = np.random.default_rng(11)
    lm = LabelMap.from_names(["benign", "a", "b", "c"])
    attack_ids = [c for c in range(lm.k) if c != lm.benign_id]
    for _ in range(1000):
        n = int(rng.integers(1, 20))
        ml1 = {i: int(rng.integers(0, 2)) for i in range(n)}
        ml2 = {i: int(rng.integers(0, 3)) for i in range(n)}
        model = _stub_cascade(lm, ml1, ml2)
        rows = np.zeros((n, 2))
        rows[:, 0] = np.arange(n)
        got = predict_cascade(model, rows)
        expected = [lm.benign_id if ml1[i] == 0 else attack_ids[ml2[i]] for i in range(n)]
        assert got.tolist() == expected
    _pass("cascade equals the per-row composition oracle on 1000 random stub configurations")


def test_cascade_benign_passthrough_and_ml2_restriction():
    from fusionids.fusion import HybridMatrix

    rng = np.random.default_rng(12)
    lm = LabelMap.from_names(["benign", "u", "v", "w"])
    attack_ids = [c for c in range(lm.k) if c != lm.benign_id]
    n = 400
    truth = rng.integers(0, lm.k, n)
    # adversarial ml2 answers garbage everywhere; oracle ml1 is exact
    ml1 = {i: int(t != lm.benign_id) for i, t in enumerate(truth)}
    ml2 = {i: int(rng.integers(0, 3)) for i in range(n)}
    model = _stub_cascade(lm, ml1, ml2)
    rows = np.zeros((n, 2))
    rows[:, 0] = np.arange(n)
    pred = predict_cascade(model, rows)
    benign_rows = truth == lm.benign_id
    assert np.all(pred[benign_rows] == lm.benign_id)
    assert np.all(pred[~benign_rows] != lm.benign_id)

    hm = HybridMatrix(rows, truth, FusionMode.FLOW_ONLY, (2, 0, 0, 0, 0), lm)
    report = evaluate_cascade(model, hm)
    remap = {cid: i for i, cid in enumerate(attack_ids)}
    ml2_truth = [remap[t] for t in truth if t != lm.benign_id]
    ml2_pred = [ml2[i] for i in range(n) if truth[i] != lm.benign_id]
    ml2_cm = confusion(ml2_truth, ml2_pred, len(attack_ids))
    restricted = report.confusion.counts[np.ix_(attack_ids, attack_ids)]
    assert np.array_equal(restricted, ml2_cm.counts)
    _pass("benign passthrough holds under adversarial ml2; perfect-ml1 confusion restricts to ml2's")


# --------------------------------------------------------------------------
# 8. directional benchmark + 9. end-to-end determinism


BENCH_CLASSIFIER = {"rounds": 15, "max_depth": 4, "learning_rate": 0.3}


def _write_bench_config(path, data_dir, out_dir, mode, pipeline, rounds=5, cache=True):
    cfg = {
        "flow_csv": str(data_dir / "flow.csv"),
        "host_tensors": str(data_dir / "host.hft1"),
        "label_map": str(data_dir / "labels.json"),
        "out_dir": str(out_dir),
        "mode": mode,
        "pipeline": pipeline,
        "event_target": [6, 4],
        "message_target": [12, 16],
        "classifier": BENCH_CLASSIFIER,
        "rounds": rounds,
        "seed": 101,
        "test_fraction": 0.33,
        "cache": cache,
    }
    path.write_text(json.dumps(cfg, indent=2), encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def benchmark_results(tmp_path_factory):
    root = tmp_path_factory.mktemp("benchmark")
    data_dir = root / "data"
    write_synthetic(imbalanced_benchmark(seed=77), data_dir)
    results = {}
    for name, mode, pipeline in (
        ("flat_flow", "flow", "flat"),
        ("flat_h3", "h3", "flat"),
        ("cascade_h3", "h3", "cascade"),
    ):
        out = root / name
        cfg_path = _write_bench_config(root / f"{name}.json", data_dir, out, mode, pipeline)
        results[name] = run_experiment(ExperimentConfig.from_json(cfg_path))
    return results


def test_benchmark_hybrid_beats_flow_only(benchmark_results):
    flow = benchmark_results["flat_flow"].mean_scalars
    h3 = benchmark_results["flat_h3"].mean_scalars
    gain = h3["macro_f1"] - flow["macro_f1"]
    assert gain >= 0.05, f"H3 gain {gain:.4f} under flow-only baseline"
    _pass(f"H3 macro F1 {h3['macro_f1']:.4f} exceeds flow-only {flow['macro_f1']:.4f} by {gain:.4f} >= 0.05")


def test_benchmark_cascade_beats_flat_baseline(benchmark_results):
    flow = benchmark_results["flat_flow"].mean_scalars
    h3 = benchmark_results["flat_h3"].mean_scalars
    cascade = benchmark_results["cascade_h3"].mean_scalars
    assert cascade["macro_f1"] >= flow["macro_f1"]
    _pass(
        f"cascade macro F1 {cascade['macro_f1']:.4f} >= flat baseline {flow['macro_f1']:.4f} "
        f"(flat H3 for reference: {h3['macro_f1']:.4f})"
    )


def test_benchmark_minority_class_improves(benchmark_results):
    flow = benchmark_results["flat_flow"].mean_scalars["per_class_f1"]
    cascade = benchmark_results["cascade_h3"].mean_scalars["per_class_f1"]
    assert cascade["twin-light"] > flow["twin-light"]
    _pass(
        f"minority class F1 improves under the cascade: "
        f"{flow['twin-light']:.4f} -> {cascade['twin-light']:.4f}"
    )


def test_end_to_end_determinism(tmp_path_factory):
    root = tmp_path_factory.mktemp("determinism")
    data_dir = root / "data"
    write_synthetic(imbalanced_benchmark(seed=55, scale=0.15), data_dir)
    outputs = []
    for run in ("x", "y"):
        out = root / run
        cfg_path = _write_bench_config(
            root / f"{run}.json", data_dir, out, "h3", "cascade", rounds=2, cache=False
        )
        run_experiment(ExperimentConfig.from_json(cfg_path))
        outputs.append(out)
    a, b = outputs
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    _pass(f"two full runs produced byte-identical artifacts: {', '.join(files)}")
