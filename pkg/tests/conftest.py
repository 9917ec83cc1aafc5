"""Shared fixtures and instance builders for the test suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest

import khltest as kh
from khltest import oracle

#: Feature dimension of the synthetic instances.
DIMS = 4


def kernel_spec(kind: str) -> kh.KernelSpec:
    if kind == "linear":
        return kh.KernelSpec("linear")
    if kind == "poly2":
        return kh.KernelSpec("polynomial", degree=2, offset=1.0)
    if kind == "gaussian":
        return kh.KernelSpec("gaussian")
    raise ValueError(kind)


@dataclass
class Instance:
    """One seeded dataset with its design, fitted model, and oracle twin."""

    seed: int
    n: int
    design_kind: str
    kernel_kind: str
    data: np.ndarray
    design: kh.DesignBundle
    spec: kh.KernelSpec
    gram: kh.GramMatrix
    model: kh.FittedModel
    contrast: kh.ContrastMatrix
    explicit: oracle.ExplicitModel | None


def _labels_for(design_kind: str, n: int, rng: np.random.Generator):
    if design_kind == "oneway3":
        labels = [f"g{i % 3}" for i in range(n)]
        rng.shuffle(labels)
        return (labels,)
    if design_kind == "twoway2x3":
        labels_a = [f"a{i % 2}" for i in range(n)]
        labels_b = [f"b{i % 3}" for i in range(n)]
        perm = rng.permutation(n)
        return ([labels_a[i] for i in perm], [labels_b[i] for i in perm])
    raise ValueError(design_kind)


def make_instance(
    seed: int, n: int = 30, design_kind: str = "oneway3", kernel_kind: str = "linear"
) -> Instance:
    """Gaussian data with mild group shifts, fitted both ways."""
    rng = np.random.default_rng(seed)
    label_sets = _labels_for(design_kind, n, rng)
    data = rng.standard_normal((n, DIMS))
    if design_kind == "oneway3":
        design = kh.one_way_design(label_sets[0])
        shift_source = label_sets[0]
        contrast = kh.pairwise_contrast(3)
    else:
        design = kh.two_way_additive_design(label_sets[0], label_sets[1])
        shift_source = label_sets[1]
        contrast = kh.padded_contrast(kh.pairwise_contrast(3), 2, design.p)
    levels = sorted(set(shift_source))
    for j, level in enumerate(levels):
        rows = [i for i, lab in enumerate(shift_source) if lab == level]
        data[rows, 0] += 0.8 * j
    spec = kernel_spec(kernel_kind)
    gm = kh.gram(data, spec)
    model = kh.fit(gm, design)
    explicit = None
    if kernel_kind != "gaussian":  # gaussian has no exact finite feature map
        phi = oracle.explicit_features(data, spec)
        explicit = oracle.explicit_model(design.x, phi)
    return Instance(
        seed=seed,
        n=n,
        design_kind=design_kind,
        kernel_kind=kernel_kind,
        data=data,
        design=design,
        spec=spec,
        gram=gm,
        model=model,
        contrast=contrast,
        explicit=explicit,
    )


def assert_rel_close(actual, desired, rtol=1e-8, context=""):
    """Relative comparison: absolute tolerance scaled by the largest reference entry."""
    actual = np.asarray(actual, dtype=float)
    desired = np.asarray(desired, dtype=float)
    scale = float(np.abs(desired).max()) if desired.size else 0.0
    np.testing.assert_allclose(
        actual, desired, rtol=rtol, atol=rtol * max(scale, 1e-300), err_msg=context
    )


@pytest.fixture(scope="session")
def null_level_run() -> kh.SimReport:
    """Shared null-calibration run: two balanced groups of 100, N(0, I3),
    gaussian kernel with the median heuristic, 2000 replicates."""
    config = kh.SimConfig(
        n_per_group=(100, 100),
        dims=3,
        truncations=(1, 3, 5),
        kernel=kh.KernelSpec("gaussian"),
        alpha=0.05,
        reps=2000,
        seed=987001,
    )
    return kh.run_level_experiment(config)


@pytest.fixture(scope="session")
def null_ks_run() -> kh.SimReport:
    """Null run for the p-value uniformity check, at a sample size where
    the low-truncation statistics have entered their asymptotic regime."""
    config = kh.SimConfig(
        n_per_group=(150, 150),
        dims=3,
        truncations=(1, 3),
        kernel=kh.KernelSpec("gaussian"),
        alpha=0.05,
        reps=2000,
        seed=987001,
    )
    return kh.run_level_experiment(config)
