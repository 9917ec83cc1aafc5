"""Diagnostics: projection tables, discriminant axes, influence distances."""

import numpy as np
import pytest

import khltest as kh
from khltest import oracle
from khltest.errors import InputError, LeverageError, TruncationError

from conftest import assert_rel_close, make_instance


# ---------------------------------------------------------------------------
# projection tables
# ---------------------------------------------------------------------------


def test_projection_additivity():
    inst = make_instance(0, n=25, kernel_kind="gaussian")
    tables = kh.projection_tables(inst.model, 3)
    total = tables.residual_proj + tables.prediction_proj
    assert np.abs(tables.response_proj - total).max() <= 1e-10


def test_residual_projection_column_norms():
    inst = make_instance(1, n=20, kernel_kind="gaussian")
    t = 4
    tables = kh.projection_tables(inst.model, t)
    norms_sq = (tables.residual_proj**2).sum(axis=0)
    assert_rel_close(norms_sq, inst.n * inst.model.eigvals[:t], rtol=1e-8)


def test_projection_tables_match_oracle():
    inst = make_instance(2, n=20, kernel_kind="linear")
    t = 3
    tables = kh.projection_tables(inst.model, t)
    resp, resid, pred = oracle.oracle_projection_tables(inst.explicit, t)
    assert_rel_close(tables.response_proj, resp, rtol=1e-8)
    assert_rel_close(tables.residual_proj, resid, rtol=1e-8)
    assert_rel_close(tables.prediction_proj, pred, rtol=1e-8)


def test_projection_tables_truncation_error():
    inst = make_instance(0, n=20)
    with pytest.raises(TruncationError):
        kh.projection_tables(inst.model, inst.model.rank + 1)


# ---------------------------------------------------------------------------
# discriminant coordinates
# ---------------------------------------------------------------------------


def test_axis_eigenvalues_sum_to_statistic():
    inst = make_instance(3, n=30, kernel_kind="gaussian")
    t = 3
    axes = kh.discriminant_coordinates(inst.model, inst.contrast, t)
    statistic = kh.tkhl_test(inst.model, inst.contrast, t).statistic
    assert axes.axis_eigvals.sum() == pytest.approx(statistic, rel=1e-8)
    assert axes.axis_eigvals.shape == (t,)
    assert np.all(np.diff(axes.axis_eigvals) <= 1e-12)


def test_new_observation_matches_sample_row():
    inst = make_instance(4, n=24, kernel_kind="gaussian")
    axes = kh.discriminant_coordinates(inst.model, inst.contrast, 2, newdata=inst.data[5:6])
    np.testing.assert_allclose(axes.new_coords[0], axes.sample_coords[5], atol=1e-10)


def test_coordinates_match_oracle_up_to_sign():
    for seed in (5, 6):
        inst = make_instance(seed, n=30, kernel_kind="linear")
        t = 2
        axes = kh.discriminant_coordinates(inst.model, inst.contrast, t)
        _, coords_o = oracle.oracle_discriminant(inst.explicit, inst.contrast.values, t)
        for j in range(axes.a):
            a = axes.sample_coords[:, j]
            b = coords_o[:, j]
            err = min(np.abs(a - b).max(), np.abs(a + b).max())
            assert err <= 1e-8 * np.abs(b).max(), (seed, j)


def test_default_axis_count_and_extra_axes_flag():
    inst = make_instance(7, n=30, kernel_kind="gaussian")  # d = 2 contrast
    axes = kh.discriminant_coordinates(inst.model, inst.contrast, 3)
    assert axes.a == 2  # min(t, d)
    with pytest.warns(UserWarning, match="axis 3"):
        # the third axis exceeds the contrast rank, so it carries eigenvalue 0
        more = kh.discriminant_coordinates(inst.model, inst.contrast, 3, n_axes=3)
    assert more.sample_coords.shape[1] == 2


def test_zero_eigenvalue_axis_dropped_with_warning():
    rng = np.random.default_rng(8)
    data = rng.standard_normal((20, 3))
    data[10:, 0] += 2.0
    design = kh.one_way_design(["A"] * 10 + ["B"] * 10)
    model = kh.fit(kh.gram(data, kh.KernelSpec("gaussian")), design)
    contrast = kh.pairwise_contrast(2)  # d = 1: second axis carries nothing
    with pytest.warns(UserWarning, match="axis 2"):
        axes = kh.discriminant_coordinates(model, contrast, 2, n_axes=2)
    assert axes.a == 1


def test_axis_sign_convention_first_group_nonpositive():
    for seed in range(4):
        inst = make_instance(seed, n=30, design_kind="oneway3", kernel_kind="gaussian")
        axes = kh.discriminant_coordinates(inst.model, inst.contrast, 2)
        first_level_col = np.flatnonzero(inst.contrast.values[0])[0]
        members = inst.design.x[:, first_level_col] > 0.5
        for j in range(axes.a):
            assert axes.sample_coords[members, j].mean() <= 1e-12


def test_newdata_requires_gram_provenance():
    inst = make_instance(9, n=20, kernel_kind="gaussian")
    stripped = kh.GramMatrix(values=inst.gram.values, n=inst.gram.n)
    model = kh.fit(stripped, inst.design)
    with pytest.raises(InputError):
        kh.discriminant_coordinates(model, inst.contrast, 2, newdata=inst.data[:2])


# ---------------------------------------------------------------------------
# Cook distances
# ---------------------------------------------------------------------------


def test_cook_zero_for_zero_residual_observation():
    data = np.array([[1.0], [2.0], [3.0], [5.0], [6.0], [7.0]])
    design = kh.one_way_design(["A"] * 3 + ["B"] * 3)
    model = kh.fit(kh.gram(data, kh.KernelSpec("linear")), design)
    cook = kh.cook_distances(model, kh.pairwise_contrast(2), 1)
    assert cook[1] == pytest.approx(0.0, abs=1e-20)
    assert cook[4] == pytest.approx(0.0, abs=1e-20)


def test_cook_nonnegative():
    for seed in range(4):
        inst = make_instance(seed, n=25, kernel_kind="gaussian")
        cook = kh.cook_distances(inst.model, inst.contrast, 2)
        assert np.all(cook >= 0.0)
        assert cook.shape == (inst.n,)


def test_cook_matches_leave_one_out_oracle():
    inst = make_instance(10, n=25, design_kind="oneway3", kernel_kind="linear")
    cook = kh.cook_distances(inst.model, inst.contrast, 2)
    loo = np.array(
        [
            oracle.oracle_cook(inst.explicit, inst.contrast.values, 2, i)
            for i in range(inst.n)
        ]
    )
    assert_rel_close(cook, loo, rtol=1e-8)


def test_cook_leverage_error_names_observation():
    data = np.array([[1.0], [2.0], [3.0], [9.0]])
    design = kh.one_way_design(["A", "A", "A", "B"])  # singleton group: leverage 1
    model = kh.fit(kh.gram(data, kh.KernelSpec("linear")), design)
    with pytest.raises(LeverageError, match="observation 3"):
        kh.cook_distances(model, kh.pairwise_contrast(2), 1)


# ---------------------------------------------------------------------------
# invariances
# ---------------------------------------------------------------------------


def test_statistic_invariant_under_kernel_rescaling():
    inst = make_instance(11, n=25, kernel_kind="gaussian")
    base = kh.tkhl_test(inst.model, inst.contrast, 2)
    scaled_gram = kh.GramMatrix(
        values=5.0 * inst.gram.values, n=inst.gram.n, data=inst.gram.data, spec=inst.gram.spec
    )
    scaled_model = kh.fit(scaled_gram, inst.design)
    np.testing.assert_allclose(scaled_model.eigvals, 5.0 * inst.model.eigvals, rtol=1e-10)
    scaled = kh.tkhl_test(scaled_model, inst.contrast, 2)
    assert scaled.statistic == pytest.approx(base.statistic, rel=1e-8)


def test_diagnostics_equivariant_under_relabeling():
    inst = make_instance(12, n=24, design_kind="oneway3", kernel_kind="gaussian")
    t = 2
    tables = kh.projection_tables(inst.model, t)
    axes = kh.discriminant_coordinates(inst.model, inst.contrast, t)
    cook = kh.cook_distances(inst.model, inst.contrast, t)

    rng = np.random.default_rng(21)
    perm = rng.permutation(inst.n)
    labels = [inst.design.factors[0].labels[i] for i in perm]
    model_p = kh.fit(kh.gram(inst.data[perm], inst.gram.spec), kh.one_way_design(labels))
    tables_p = kh.projection_tables(model_p, t)
    axes_p = kh.discriminant_coordinates(model_p, inst.contrast, t)
    cook_p = kh.cook_distances(model_p, inst.contrast, t)

    np.testing.assert_allclose(tables_p.response_proj, tables.response_proj[perm], atol=1e-8)
    np.testing.assert_allclose(axes_p.sample_coords, axes.sample_coords[perm], atol=1e-8)
    np.testing.assert_allclose(cook_p, cook[perm], atol=1e-12)


def test_cook_regression_duplicating_uninvolved_observation():
    # duplicating an unrelated observation changes any single influence only
    # through the refitted spectrum; the ranking of a clear outlier survives
    inst = make_instance(13, n=24, design_kind="oneway3", kernel_kind="gaussian")
    data = inst.data.copy()
    data[3] += 4.0  # make observation 3 a strong outlier
    labels = list(inst.design.factors[0].labels)
    model = kh.fit(kh.gram(data, kh.KernelSpec("gaussian")), kh.one_way_design(labels))
    cook = kh.cook_distances(model, inst.contrast, 2)
    data2 = np.vstack([data, data[10:11]])
    labels2 = labels + [labels[10]]
    model2 = kh.fit(kh.gram(data2, kh.KernelSpec("gaussian")), kh.one_way_design(labels2))
    cook2 = kh.cook_distances(model2, inst.contrast, 2)
    assert np.argmax(cook) == 3
    assert np.argmax(cook2) == 3
