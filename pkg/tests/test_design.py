"""Design module: one-hot designs, projectors, contrasts, testability."""

import numpy as np
import pytest

import khltest as kh
from khltest.errors import DegenerateDesignError, InputError, NonTestableContrastError


def test_one_way_matrix_and_projector():
    design = kh.one_way_design(["A", "A", "B"])
    np.testing.assert_array_equal(design.x, [[1, 0], [1, 0], [0, 1]])
    expected = np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]])
    np.testing.assert_allclose(design.p_x, expected, atol=1e-12)
    assert design.rank == 2
    assert design.factors[0].levels == ("A", "B")


def test_one_way_single_level_errors():
    with pytest.raises(DegenerateDesignError):
        kh.one_way_design(["A", "A", "A"])


def test_one_way_balanced_leverages():
    design = kh.one_way_design(["A", "B", "A", "B"])
    np.testing.assert_allclose(design.leverages, [0.5, 0.5, 0.5, 0.5], atol=1e-12)


def test_two_way_2x2_rank_three():
    design = kh.two_way_additive_design(["a", "a", "b", "b"], ["x", "y", "x", "y"])
    assert design.x.shape == (4, 4)
    assert design.rank == 3
    assert np.trace(design.p_x) == pytest.approx(3.0, abs=1e-8)


def test_two_way_duplicated_factor_rank_collapses():
    labels = ["a", "b", "c", "a", "b", "c"]
    design = kh.two_way_additive_design(labels, labels)
    assert design.rank == 3


def test_two_way_eight_by_four_rank():
    # 8 x 4 crossing: 12 columns, one shared constant direction -> rank 11
    rng = np.random.default_rng(0)
    combos = [(a, b) for a in range(8) for b in range(4)] * 2
    labels_a = [f"batch{a}" for a, _ in combos]
    labels_b = [f"cond{b}" for _, b in combos]
    perm = rng.permutation(64)
    design = kh.two_way_additive_design(
        [labels_a[i] for i in perm], [labels_b[i] for i in perm]
    )
    assert design.p == 12
    assert design.rank == 11


def test_two_way_single_level_factor_errors():
    with pytest.raises(DegenerateDesignError):
        kh.two_way_additive_design(["a", "a"], ["x", "y"])


def test_pairwise_contrast_exact_forms():
    np.testing.assert_array_equal(
        kh.pairwise_contrast(3).values, [[1, -1, 0], [0, 1, -1]]
    )
    np.testing.assert_array_equal(kh.pairwise_contrast(2).values, [[1, -1]])


def test_pairwise_contrast_rank():
    contrast = kh.pairwise_contrast(5)
    assert contrast.d == 4
    assert np.linalg.matrix_rank(contrast.values) == 4


def test_pairwise_contrast_rejects_small_u():
    with pytest.raises(InputError):
        kh.pairwise_contrast(1)


def test_pairwise_contrast_annihilates_constants():
    for u in (2, 3, 6):
        np.testing.assert_array_equal(
            kh.pairwise_contrast(u).values @ np.ones(u), np.zeros(u - 1)
        )


def test_padded_contrast_places_block():
    inner = kh.ContrastMatrix([[1.0, -1.0]])
    padded = kh.padded_contrast(inner, 8, 12)
    expected = np.zeros((1, 12))
    expected[0, 8] = 1.0
    expected[0, 9] = -1.0
    np.testing.assert_array_equal(padded.values, expected)


def test_padded_contrast_identity_embedding():
    inner = kh.pairwise_contrast(4)
    padded = kh.padded_contrast(inner, 0, 4)
    np.testing.assert_array_equal(padded.values, inner.values)


def test_padded_contrast_preserves_rank():
    inner = kh.pairwise_contrast(3)
    padded = kh.padded_contrast(inner, 2, 9)
    assert np.linalg.matrix_rank(padded.values) == inner.d


def test_padded_contrast_bounds_checked():
    with pytest.raises(InputError):
        kh.padded_contrast(kh.pairwise_contrast(3), 5, 7)


def test_contrast_requires_independent_rows():
    with pytest.raises(InputError):
        kh.ContrastMatrix([[1.0, -1.0, 0.0], [2.0, -2.0, 0.0]])


def test_hypothesis_projector_two_group_trace_one():
    design = kh.one_way_design(["A", "B", "A", "B"])
    proj = kh.hypothesis_projector(design, kh.ContrastMatrix([[1.0, -1.0]]))
    assert np.trace(proj.values) == pytest.approx(1.0, abs=1e-8)
    assert proj.d == 1


def test_hypothesis_projector_two_way_factor_a():
    design = kh.two_way_additive_design(
        ["a", "a", "b", "b", "a", "b"], ["x", "y", "x", "y", "y", "x"]
    )
    contrast = kh.padded_contrast(kh.pairwise_contrast(2), 0, design.p)
    proj = kh.hypothesis_projector(design, contrast)
    assert np.trace(proj.values) == pytest.approx(1.0, abs=1e-8)


def test_hypothesis_projector_idempotent_symmetric_on_random_designs():
    for seed in range(6):
        rng = np.random.default_rng(seed)
        labels = [f"g{rng.integers(4)}" for _ in range(24)]
        if len(set(labels)) < 4:
            labels[:4] = ["g0", "g1", "g2", "g3"]
        design = kh.one_way_design(labels)
        proj = kh.hypothesis_projector(design, kh.pairwise_contrast(4))
        d_mat = proj.values
        assert np.abs(d_mat - d_mat.T).max() <= 1e-10
        assert np.abs(d_mat @ d_mat - d_mat).max() <= 1e-10
        assert np.trace(d_mat) == pytest.approx(proj.d, abs=1e-8)
        # D projects inside Im(X)
        assert np.abs(d_mat @ design.p_x_perp).max() <= 1e-10


def test_projector_identities():
    design = kh.two_way_additive_design(
        ["a", "b", "a", "b", "a", "b"], ["x", "x", "y", "y", "z", "z"]
    )
    n = design.n
    np.testing.assert_allclose(design.p_x + design.p_x_perp, np.eye(n), atol=1e-12)
    assert np.abs(design.p_x @ design.p_x - design.p_x).max() <= 1e-10
    assert np.abs(design.p_x_perp @ design.x).max() <= 1e-10
    assert np.trace(design.p_x) == pytest.approx(design.rank, abs=1e-8)
    # Frobenius norm squared of a projector equals its rank
    assert np.sum(design.p_x**2) == pytest.approx(design.rank, abs=1e-8)
    assert np.all(design.leverages >= 0.0) and np.all(design.leverages <= 1.0)


def test_non_testable_contrast_raises():
    design = kh.two_way_additive_design(
        ["a", "a", "b", "b"], ["x", "y", "x", "y"]
    )
    # alpha-block ones against beta-block minus-ones spans the kernel of X
    values = np.array([[1.0, 1.0, -1.0, -1.0]])
    with pytest.raises(NonTestableContrastError):
        kh.hypothesis_projector(design, kh.ContrastMatrix(values))


def test_w_matrix_shape_and_role():
    design = kh.one_way_design(["A", "A", "B", "B", "C", "C"])
    contrast = kh.pairwise_contrast(3)
    w = kh.w_matrix(design, contrast)
    assert w.shape == (6, 2)
    # X' W recovers (X'X)(X'X)^- L' = L' for a full-rank design
    np.testing.assert_allclose(design.x.T @ w, contrast.values.T, atol=1e-10)


def test_design_from_matrix_validation():
    with pytest.raises(InputError):
        kh.design_from_matrix(np.zeros((0, 2)))
    with pytest.raises(InputError):
        kh.design_from_matrix(np.array([[np.inf, 1.0]]))
    with pytest.raises(DegenerateDesignError):
        kh.design_from_matrix(np.zeros((3, 2)))


def test_contrast_mismatched_width_rejected():
    design = kh.one_way_design(["A", "B", "A"])
    with pytest.raises(InputError):
        kh.hypothesis_projector(design, kh.pairwise_contrast(3))
