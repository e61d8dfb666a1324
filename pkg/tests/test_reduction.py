import numpy as np
import pytest

from fusionids.errors import (
    DegenerateDataError,
    DimMismatchError,
    KTooLargeError,
    TargetExceedsSourceError,
)
from fusionids.reduction import (
    PcaModel,
    apply_pca,
    apply_selection,
    apply_selection_batch,
    fit_pca,
    load_pca,
    make_selection_plan,
    reconstruct_pca,
    save_pca,
)

MASK = (1 << 64) - 1


def reference_plan(source_dims, target, seed):
    """Independent reimplementation of the documented plan generator."""
    state = seed & MASK

    def next_u64():
        nonlocal state
        state = (state + 0x9E3779B97F4A7C15) & MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)

    def below(bound):
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            u = next_u64()
            if u < limit:
                return u % bound

    def sample(n, k):
        pool = list(range(n))
        for i in range(k):
            j = i + below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return sorted(pool[:k])

    rows = sample(source_dims[0], target[0])
    cols = sample(source_dims[1], target[1])
    return rows, cols


# --------------------------------------------------------------------------
# selection plans


def test_plan_cell_count_reference_target():
    plan = make_selection_plan((100, 768), (15, 50), seed=1)
    assert plan.row_indices.size * plan.col_indices.size == 750
    assert plan.row_indices.max() < 100 and plan.col_indices.max() < 768


def test_plan_identity_when_target_equals_source():
    plan = make_selection_plan((4, 6), (4, 6), seed=99)
    assert plan.row_indices.tolist() == [0, 1, 2, 3]
    assert plan.col_indices.tolist() == [0, 1, 2, 3, 4, 5]


def test_plan_matches_reference_generator():
    for seed in (0, 1, 77, 2**40):
        for dims, target in (((4, 4), (2, 2)), ((10, 20), (3, 7)), ((100, 768), (15, 50))):
            plan = make_selection_plan(dims, target, seed)
            rows, cols = reference_plan(dims, target, seed)
            assert plan.row_indices.tolist() == rows
            assert plan.col_indices.tolist() == cols


def test_plan_deterministic_byte_for_byte():
    a = make_selection_plan((30, 40), (5, 6), seed=1234)
    b = make_selection_plan((30, 40), (5, 6), seed=1234)
    assert a.to_json() == b.to_json()


def test_plan_sorted_distinct():
    plan = make_selection_plan((50, 60), (20, 30), seed=8)
    assert np.all(np.diff(plan.row_indices) > 0)
    assert np.all(np.diff(plan.col_indices) > 0)


def test_plan_target_exceeds_source():
    with pytest.raises(TargetExceedsSourceError):
        make_selection_plan((4, 4), (5, 2), seed=0)
    with pytest.raises(ValueError):
        make_selection_plan((4, 4), (0, 2), seed=0)


def test_apply_selection_identity_plan():
    plan = make_selection_plan((3, 3), (3, 3), seed=0)
    mat = np.arange(9.0).reshape(3, 3)
    assert np.array_equal(apply_selection(plan, mat), mat)


def test_apply_selection_hand_index():
    from fusionids.reduction import SelectionPlan

    plan = SelectionPlan((2, 2), np.array([1]), np.array([0]), seed=0)
    assert apply_selection(plan, np.array([[1, 2], [3, 4]])).tolist() == [[3]]


def test_apply_selection_layout():
    plan = make_selection_plan((4, 5), (2, 3), seed=21)
    mat = np.random.default_rng(0).normal(size=(4, 5))
    out = apply_selection(plan, mat)
    for i in range(2):
        for j in range(3):
            assert out[i, j] == mat[plan.row_indices[i], plan.col_indices[j]]


def test_apply_selection_composition_with_identity():
    rng = np.random.default_rng(1)
    for seed in range(5):
        mat = rng.normal(size=(6, 7))
        plan = make_selection_plan((6, 7), (3, 4), seed=seed)
        once = apply_selection(plan, mat)
        identity = make_selection_plan((3, 4), (3, 4), seed=0)
        assert np.array_equal(apply_selection(identity, once), once)


def test_apply_selection_dim_mismatch():
    plan = make_selection_plan((3, 3), (2, 2), seed=0)
    with pytest.raises(DimMismatchError):
        apply_selection(plan, np.zeros((4, 3)))


def test_apply_selection_batch_matches_single():
    rng = np.random.default_rng(2)
    stack = rng.normal(size=(5, 6, 7)).astype(np.float32)
    plan = make_selection_plan((6, 7), (2, 5), seed=3)
    batch = apply_selection_batch(plan, stack)
    for s in range(5):
        assert np.array_equal(batch[s], apply_selection(plan, stack[s]))


# --------------------------------------------------------------------------
# PCA


def eig_oracle(data, k):
    """Brute-force PCA via eigendecomposition of the sample covariance."""
    centered = data - data.mean(axis=0)
    cov = centered.T @ centered / (data.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    comps = eigvecs[:, order[:k]].T.copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return comps, eigvals[order[:k]]


def test_pca_rank_one_line():
    t = np.linspace(-2, 2, 30)
    direction = np.array([3.0, 4.0]) / 5.0
    data = np.outer(t, direction) + np.array([1.0, -1.0])
    model = fit_pca(data, 1)
    recon = reconstruct_pca(model, apply_pca(model, data))
    assert np.allclose(recon, data, atol=1e-12)
    assert model.explained_variance[0] == pytest.approx(np.var(t, ddof=1))


def test_pca_components_match_eigh_oracle():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(5, 20))
        d = int(rng.integers(2, 6))
        k = int(rng.integers(1, min(n - 1, d) + 1))
        data = rng.normal(size=(n, d))
        model = fit_pca(data, k)
        comps, eigvals = eig_oracle(data, k)
        assert np.allclose(model.components, comps, atol=1e-8)
        assert np.allclose(model.explained_variance, eigvals, atol=1e-8)


def test_pca_small_matrix_oracle():
    data = np.random.default_rng(42).normal(size=(5, 3))
    model = fit_pca(data, 2)
    comps, _ = eig_oracle(data, 2)
    assert np.allclose(model.components, comps, atol=1e-8)


def test_pca_orthonormal_components():
    data = np.random.default_rng(1).normal(size=(40, 12))
    model = fit_pca(data, 6)
    gram = model.components @ model.components.T
    assert np.abs(gram - np.eye(6)).max() <= 1e-8


def test_pca_total_variance_equals_covariance_trace():
    data = np.random.default_rng(2).normal(size=(100, 7))
    model = fit_pca(data, 7)
    centered = data - data.mean(axis=0)
    trace = np.trace(centered.T @ centered / 99)
    assert model.explained_variance.sum() == pytest.approx(trace, rel=1e-6)


def test_pca_explained_variance_nonincreasing():
    data = np.random.default_rng(3).normal(size=(50, 10))
    model = fit_pca(data, 9)
    assert np.all(np.diff(model.explained_variance) <= 1e-12)


def test_apply_pca_mean_row_is_zero():
    data = np.random.default_rng(4).normal(size=(20, 5))
    model = fit_pca(data, 3)
    out = apply_pca(model, data.mean(axis=0, keepdims=True))
    assert np.allclose(out, 0.0, atol=1e-12)


def test_apply_pca_line_projections_are_signed_distances():
    t = np.linspace(-3, 3, 25)
    direction = np.array([1.0, 2.0, 2.0]) / 3.0
    data = np.outer(t, direction)
    model = fit_pca(data, 1)
    proj = apply_pca(model, data)[:, 0]
    # up to overall sign, projections equal the coordinates along the line
    sign = np.sign(proj[np.argmax(np.abs(t))]) * np.sign(t[np.argmax(np.abs(t))])
    assert np.allclose(sign * proj, t, atol=1e-12)


def test_reconstruction_error_nonincreasing_in_k():
    data = np.random.default_rng(5).normal(size=(60, 12)) @ np.diag(np.linspace(3, 0.3, 12))
    errors = []
    for k in range(1, 12):
        model = fit_pca(data, k)
        recon = reconstruct_pca(model, apply_pca(model, data))
        errors.append(float(((recon - data) ** 2).sum()))
    assert all(errors[i + 1] <= errors[i] + 1e-9 for i in range(len(errors) - 1))


def test_apply_pca_is_affine():
    rng = np.random.default_rng(6)
    data = rng.normal(size=(30, 8))
    model = fit_pca(data, 4)
    x = rng.normal(size=(1, 8))
    y = rng.normal(size=(1, 8))
    for alpha in (0.0, 0.25, 0.5, 0.9, 1.0):
        mix = alpha * x + (1 - alpha) * y
        lhs = apply_pca(model, mix)
        rhs = alpha * apply_pca(model, x) + (1 - alpha) * apply_pca(model, y)
        assert np.allclose(lhs, rhs, atol=1e-9)


def test_pca_k_limits():
    data = np.random.default_rng(7).normal(size=(5, 10))
    with pytest.raises(KTooLargeError):
        fit_pca(data, 5)   # k must be <= N-1
    with pytest.raises(KTooLargeError):
        fit_pca(np.random.default_rng(8).normal(size=(20, 3)), 4)  # k <= d


def test_pca_degenerate_data():
    data = np.tile([1.0, 2.0, 3.0], (6, 1))
    with pytest.raises(DegenerateDataError):
        fit_pca(data, 1)


def test_apply_pca_dim_mismatch():
    model = fit_pca(np.random.default_rng(9).normal(size=(10, 4)), 2)
    with pytest.raises(DimMismatchError):
        apply_pca(model, np.zeros((3, 5)))


def test_pca_serialization_round_trip(tmp_path):
    model = fit_pca(np.random.default_rng(10).normal(size=(25, 6)), 3)
    path = tmp_path / "model.pca1"
    save_pca(model, path)
    back = load_pca(path)
    assert np.array_equal(back.mean, model.mean)
    assert np.array_equal(back.components, model.components)
    assert np.array_equal(back.explained_variance, model.explained_variance)


def test_pca_sign_convention_deterministic():
    data = np.random.default_rng(11).normal(size=(30, 5))
    a = fit_pca(data, 3)
    b = fit_pca(data.copy(), 3)
    assert np.array_equal(a.components, b.components)
    for row in a.components:
        assert row[np.argmax(np.abs(row))] > 0
