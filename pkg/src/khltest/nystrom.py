"""Landmark sampling, anchor construction, and the compressed test statistic.

The full residual spectrum costs O(n^3). Sampling q landmarks, taking the
m leading eigenfunctions of their residual covariance as anchors, and
projecting all residuals on the anchor span reduces the heavy
diagonalization to q x q and m x m problems while keeping the tested
operator exact; at q = n with a full anchor basis the compressed
statistic reproduces the exact one.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .design import ContrastMatrix, DesignBundle, design_from_matrix, hypothesis_projector
from .errors import AnchorRankError, DesignLevelLossWarning, InputError
from .kernel import GramMatrix
from .model import EIGVAL_RTOL, ZERO_STATISTIC, TestResult, _fix_signs, chi2_sf


@dataclass(frozen=True, eq=False)
class LandmarkPlan:
    """Deterministic selection of landmark observations."""

    indices: np.ndarray
    q: int
    strategy: str
    seed: int


@dataclass(frozen=True, eq=False)
class AnchorSystem:
    """Top eigensystem of the landmark residual Gram matrix.

    ``u_z`` has orthonormal columns (q x m), ``lambda_z`` the matching
    positive eigenvalues in decreasing order; ``landmark_design`` is the
    design restricted to the sampled rows.
    """

    u_z: np.ndarray
    lambda_z: np.ndarray
    m: int
    landmark_design: DesignBundle


def sample_landmarks(
    n: int, q: int, groups=None, strategy: str = "uniform", seed: int = 0
) -> LandmarkPlan:
    """Sample q of n observation indices without replacement.

    ``strategy="uniform"`` ignores groups; ``"stratified"`` allocates
    counts proportionally to group sizes (largest-remainder rounding,
    ties resolved by group order) and samples within each group.
    Deterministic given ``seed``.
    """
    if int(n) != n or n < 1:
        raise InputError("n must be a positive integer")
    if int(q) != q or not 2 <= q <= n:
        raise InputError(f"landmark count must satisfy 2 <= q <= n, got q={q} with n={n}")
    if strategy not in ("uniform", "stratified"):
        raise InputError(f"unknown landmark strategy {strategy!r}")
    n, q = int(n), int(q)
    rng = np.random.default_rng(seed)
    if strategy == "uniform":
        indices = np.sort(rng.choice(n, size=q, replace=False))
        return LandmarkPlan(indices=indices, q=q, strategy=strategy, seed=seed)
    if groups is None:
        raise InputError("stratified sampling needs group labels")
    groups = list(groups)
    if len(groups) != n:
        raise InputError(f"expected {n} group labels, got {len(groups)}")
    order: list = []
    members: dict = {}
    for i, g in enumerate(groups):
        if g not in members:
            members[g] = []
            order.append(g)
        members[g].append(i)
    sizes = np.array([len(members[g]) for g in order], dtype=float)
    quota = q * sizes / n
    counts = np.floor(quota).astype(int)
    remainder = q - int(counts.sum())
    if remainder > 0:
        frac = quota - counts
        # Largest fractional parts get the extra picks; group order breaks ties.
        extra = np.argsort(-frac, kind="stable")[:remainder]
        counts[extra] += 1
    picked = []
    for g, count in zip(order, counts):
        if count > 0:
            idx = np.asarray(members[g])
            picked.append(idx[rng.choice(idx.size, size=count, replace=False)])
    indices = np.sort(np.concatenate(picked)) if picked else np.empty(0, dtype=int)
    return LandmarkPlan(indices=indices, q=q, strategy=strategy, seed=seed)


def landmark_design(design: DesignBundle, indices) -> DesignBundle:
    """Design restricted to the sampled rows (same columns as the full design).

    Columns that are active in the full design but identically zero on
    the sample are kept (the pseudo-inverse absorbs the rank loss) and a
    :class:`DesignLevelLossWarning` is emitted, since the corresponding
    levels no longer constrain the landmark residuals.
    """
    idx = np.asarray(indices, dtype=int)
    if idx.ndim != 1 or idx.size == 0:
        raise InputError("landmark indices must be a nonempty 1-d integer array")
    if idx.min() < 0 or idx.max() >= design.n:
        raise InputError("landmark indices out of range")
    if np.unique(idx).size != idx.size:
        raise InputError("landmark indices must be distinct")
    sub = design.x[idx]
    lost = np.flatnonzero(
        (np.abs(design.x).sum(axis=0) > 0) & (np.abs(sub).sum(axis=0) == 0)
    )
    if lost.size:
        warnings.warn(
            f"landmark sample lost design columns {lost.tolist()}; "
            "consider stratified sampling",
            DesignLevelLossWarning,
        )
    return design_from_matrix(sub)


def landmark_residual_gram(gram_z: GramMatrix, lm_design: DesignBundle) -> np.ndarray:
    """Residual Gram matrix of the landmarks: P_perp K_Z P_perp / q."""
    if gram_z.n != lm_design.n:
        raise InputError(
            f"landmark Gram has q={gram_z.n} but the landmark design has q={lm_design.n}"
        )
    q = gram_z.n
    k = lm_design.p_x_perp @ gram_z.values @ lm_design.p_x_perp / q
    return (k + k.T) / 2.0


def build_anchors(k_e_z: np.ndarray, m: int, lm_design: DesignBundle) -> AnchorSystem:
    """Top-m eigensystem of the landmark residual Gram matrix.

    Raises
    ------
    AnchorRankError
        If ``m`` exceeds the numerical rank; the message names the
        achievable maximum.
    """
    k_e_z = np.asarray(k_e_z, dtype=float)
    if k_e_z.ndim != 2 or k_e_z.shape[0] != k_e_z.shape[1]:
        raise InputError("landmark residual Gram matrix must be square")
    if k_e_z.shape[0] != lm_design.n:
        raise InputError("landmark residual Gram and landmark design disagree on q")
    if int(m) != m or m < 1:
        raise InputError("anchor count must be an integer >= 1")
    w, v = np.linalg.eigh((k_e_z + k_e_z.T) / 2.0)
    w = w[::-1]
    v = v[:, ::-1]
    rank = int(np.count_nonzero(w > EIGVAL_RTOL * max(w[0], 0.0)))
    if m > rank:
        raise AnchorRankError(
            f"requested {m} anchors but the landmark residual rank is {rank}"
        )
    m = int(m)
    return AnchorSystem(
        u_z=_fix_signs(v[:, :m]),
        lambda_z=w[:m].copy(),
        m=m,
        landmark_design=lm_design,
    )


def _anchor_projections(anchors: AnchorSystem, cross: np.ndarray) -> np.ndarray:
    # Rows of the m x n matrix Lambda_z^{-1/2} U_z' P_perp K_{Z,Y}; row s is
    # sqrt(q) times the anchor-s coordinates of the embedded observations.
    p_perp = anchors.landmark_design.p_x_perp
    return (anchors.u_z.T @ (p_perp @ cross)) / np.sqrt(anchors.lambda_z)[:, None]


def nystrom_gram(anchors: AnchorSystem, cross, design: DesignBundle) -> np.ndarray:
    """Residual covariance in anchor coordinates, an m x m PSD matrix.

    ``cross`` is the q x n cross-Gram between the landmarks the anchors
    were built from and the full sample.
    """
    cross = np.asarray(cross, dtype=float)
    q = anchors.landmark_design.n
    if cross.ndim != 2 or cross.shape[0] != q:
        raise InputError(
            f"cross-Gram must have one row per landmark ({q}), got shape {cross.shape}"
        )
    if cross.shape[1] != design.n:
        raise InputError(
            f"cross-Gram has {cross.shape[1]} columns but the design has n={design.n}"
        )
    h = _anchor_projections(anchors, cross)
    hp = h @ design.p_x_perp
    k_e_a = hp @ hp.T / (design.n * q)
    return (k_e_a + k_e_a.T) / 2.0


def nystrom_test(
    anchors: AnchorSystem,
    cross,
    design: DesignBundle,
    contrast: ContrastMatrix,
    t: int,
) -> TestResult:
    """Compressed Hotelling-Lawley test using the anchor representation.

    The tested operator is never approximated; only the residual
    covariance is replaced by its anchor-span projection. Degrees of
    freedom and calibration match the exact test, with the truncation
    capped at the compressed spectral rank.
    """
    if int(t) != t or t < 1:
        raise InputError("truncation must be an integer >= 1")
    cross = np.asarray(cross, dtype=float)
    k_e_a = nystrom_gram(anchors, cross, design)
    w, v = np.linalg.eigh(k_e_a)
    w = w[::-1]
    v = v[:, ::-1]
    rank = int(np.count_nonzero(w > EIGVAL_RTOL * max(w[0], 0.0)))
    if rank == 0:
        raise AnchorRankError("projected residual covariance is numerically zero")
    t_eff = min(int(t), rank)
    capped = int(t) > rank
    u_a = _fix_signs(v[:, :t_eff])
    lam_a = w[:t_eff]
    q = anchors.landmark_design.n
    h = _anchor_projections(anchors, cross)
    kt_a = (u_a.T @ h) / np.sqrt(q * lam_a)[:, None]
    projector = hypothesis_projector(design, contrast)
    statistic = float(np.sum((kt_a @ projector.values) * kt_a))
    statistic = max(statistic, 0.0)
    df = projector.d * t_eff
    p_value = 1.0 if statistic < ZERO_STATISTIC else chi2_sf(statistic, df)
    return TestResult(
        statistic=statistic,
        df=df,
        p_value=p_value,
        truncation=t_eff,
        method="nystrom",
        capped=capped,
    )
