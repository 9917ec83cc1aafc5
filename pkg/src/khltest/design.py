"""Experimental-design encoding and contrast machinery.

A :class:`DesignBundle` caches everything the fitting and testing code
needs from a design matrix X: the Moore-Penrose pseudo-inverse of X'X,
the orthogonal projector onto Im(X) and its complement, the leverages,
and the numerical rank. Bundles are immutable and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDesignError, InputError, NonTestableContrastError

#: Relative eigenvalue cut for the pseudo-inverse of X'X.
RANK_RTOL = 1e-12
#: Relative singular-value cut for the surjectivity check on contrasts.
CONTRAST_RANK_RTOL = 1e-10
#: Condition-number limit above which a contrast is declared non-testable.
TESTABILITY_CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class FactorInfo:
    """One factor of a design: its levels, per-row labels, and column offset."""

    name: str
    levels: tuple
    labels: tuple
    offset: int


@dataclass(frozen=True, eq=False)
class DesignBundle:
    x: np.ndarray
    xtx_pinv: np.ndarray
    p_x: np.ndarray
    p_x_perp: np.ndarray
    leverages: np.ndarray
    rank: int
    factors: tuple[FactorInfo, ...] = field(default=(), repr=False)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True, eq=False)
class ContrastMatrix:
    """A d x p contrast with linearly independent rows."""

    values: np.ndarray
    d: int = 0

    def __init__(self, values):
        arr = np.atleast_2d(np.asarray(values, dtype=float))
        if arr.ndim != 2 or arr.size == 0:
            raise InputError("contrast matrix must be a nonempty 2-d array")
        if not np.all(np.isfinite(arr)):
            raise InputError("contrast matrix contains non-finite entries")
        d = arr.shape[0]
        s = np.linalg.svd(arr, compute_uv=False)
        if d > arr.shape[1] or s[-1] <= CONTRAST_RANK_RTOL * s[0]:
            raise InputError("contrast rows are linearly dependent (matrix is not surjective)")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "d", d)

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class HypothesisProjector:
    """The n x n orthogonal projector encoding a tested contrast; trace d."""

    values: np.ndarray
    d: int


def design_from_matrix(x, factors: tuple[FactorInfo, ...] = ()) -> DesignBundle:
    """Build a :class:`DesignBundle` from an explicit design matrix.

    The pseudo-inverse of X'X is Moore-Penrose, computed by symmetric
    eigendecomposition with eigenvalues below ``RANK_RTOL`` times the
    largest treated as zero, so rank-deficient designs are handled
    deterministically.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.size == 0:
        raise InputError("design matrix must be a nonempty 2-d array")
    if not np.all(np.isfinite(x)):
        raise InputError("design matrix contains non-finite entries")
    n = x.shape[0]
    xtx = x.T @ x
    xtx = (xtx + xtx.T) / 2.0
    w, v = np.linalg.eigh(xtx)
    w_max = float(w[-1]) if w.size else 0.0
    keep = w > RANK_RTOL * max(w_max, 0.0)
    rank = int(np.count_nonzero(keep))
    if rank == 0:
        raise DegenerateDesignError("design matrix is numerically zero")
    vk = v[:, keep]
    xtx_pinv = (vk / w[keep]) @ vk.T
    xtx_pinv = (xtx_pinv + xtx_pinv.T) / 2.0
    p_x = x @ xtx_pinv @ x.T
    p_x = (p_x + p_x.T) / 2.0
    p_x_perp = np.eye(n) - p_x
    leverages = np.clip(np.diag(p_x).copy(), 0.0, 1.0)  # projector diagonal lies in [0, 1]
    return DesignBundle(
        x=x,
        xtx_pinv=xtx_pinv,
        p_x=p_x,
        p_x_perp=p_x_perp,
        leverages=leverages,
        rank=rank,
        factors=factors,
    )


def _one_hot(labels: list) -> tuple[np.ndarray, list]:
    levels: list = []
    for lab in labels:
        if lab not in levels:
            levels.append(lab)
    x = np.zeros((len(labels), len(levels)))
    index = {lev: j for j, lev in enumerate(levels)}
    for i, lab in enumerate(labels):
        x[i, index[lab]] = 1.0
    return x, levels


def one_way_design(labels, name: str = "factor") -> DesignBundle:
    """One-hot design for a single factor, levels in first-appearance order."""
    labels = list(labels)
    if not labels:
        raise InputError("labels must be nonempty")
    x, levels = _one_hot(labels)
    if len(levels) < 2:
        raise DegenerateDesignError("one-way design needs at least 2 distinct levels")
    factor = FactorInfo(name=name, levels=tuple(levels), labels=tuple(labels), offset=0)
    return design_from_matrix(x, factors=(factor,))


def two_way_additive_design(
    labels_a, labels_b, name_a: str = "factor_a", name_b: str = "factor_b"
) -> DesignBundle:
    """Additive two-factor design: X = [A | B], both blocks one-hot.

    The concatenation carries one linear dependency per shared constant
    direction, so a connected design has rank U + V - 1; the pseudo-inverse
    absorbs the deficiency.
    """
    labels_a = list(labels_a)
    labels_b = list(labels_b)
    if len(labels_a) != len(labels_b):
        raise InputError("the two factors must label the same observations")
    if not labels_a:
        raise InputError("labels must be nonempty")
    xa, levels_a = _one_hot(labels_a)
    xb, levels_b = _one_hot(labels_b)
    if len(levels_a) < 2 or len(levels_b) < 2:
        raise DegenerateDesignError("each factor of a two-way design needs at least 2 levels")
    factors = (
        FactorInfo(name=name_a, levels=tuple(levels_a), labels=tuple(labels_a), offset=0),
        FactorInfo(
            name=name_b, levels=tuple(levels_b), labels=tuple(labels_b), offset=len(levels_a)
        ),
    )
    return design_from_matrix(np.hstack([xa, xb]), factors=factors)


def pairwise_contrast(u: int) -> ContrastMatrix:
    """The (u-1) x u consecutive-difference contrast testing equality of u levels.

    Row i is zero except for +1 at position i and -1 at position i + 1.
    """
    if int(u) != u or u < 2:
        raise InputError("pairwise contrast needs an integer level count >= 2")
    u = int(u)
    values = np.zeros((u - 1, u))
    idx = np.arange(u - 1)
    values[idx, idx] = 1.0
    values[idx, idx + 1] = -1.0
    return ContrastMatrix(values)


def padded_contrast(inner: ContrastMatrix, offset: int, total_cols: int) -> ContrastMatrix:
    """Embed ``inner`` at column ``offset`` of a wider zero matrix."""
    if offset < 0 or offset + inner.p > total_cols:
        raise InputError(
            f"cannot place a {inner.d}x{inner.p} contrast at offset {offset} "
            f"in {total_cols} columns"
        )
    values = np.zeros((inner.d, total_cols))
    values[:, offset : offset + inner.p] = inner.values
    return ContrastMatrix(values)


def level_pair_contrast(design: DesignBundle, factor_name: str, level_a, level_b) -> ContrastMatrix:
    """Single-row contrast comparing two levels of a named factor."""
    factor = factor_by_name(design, factor_name)
    try:
        ia = factor.levels.index(level_a)
        ib = factor.levels.index(level_b)
    except ValueError as exc:
        raise InputError(f"unknown level for factor {factor_name!r}: {exc}") from exc
    if ia == ib:
        raise InputError("a level pair contrast needs two distinct levels")
    row = np.zeros((1, design.p))
    row[0, factor.offset + ia] = 1.0
    row[0, factor.offset + ib] = -1.0
    return ContrastMatrix(row)


def factor_by_name(design: DesignBundle, name: str) -> FactorInfo:
    for factor in design.factors:
        if factor.name == name:
            return factor
    raise InputError(f"design has no factor named {name!r}")


def contrast_inverse(design: DesignBundle, contrast: ContrastMatrix) -> np.ndarray:
    """Inverse of L (X'X)^- L', raising if the contrast is not testable."""
    if contrast.p != design.p:
        raise InputError(
            f"contrast has {contrast.p} columns but the design has {design.p}"
        )
    c = contrast.values @ design.xtx_pinv @ contrast.values.T
    c = (c + c.T) / 2.0
    w, v = np.linalg.eigh(c)
    if w[0] <= 0.0 or w[-1] / w[0] >= TESTABILITY_CONDITION_LIMIT:
        raise NonTestableContrastError(
            "L (X'X)^- L' is singular: the contrast lies outside the estimable space"
        )
    c_inv = (v / w) @ v.T
    return (c_inv + c_inv.T) / 2.0


def w_matrix(design: DesignBundle, contrast: ContrastMatrix) -> np.ndarray:
    """The n x d matrix X (X'X)^- L', whose rows weight each observation's
    influence on the tested combination."""
    if contrast.p != design.p:
        raise InputError(
            f"contrast has {contrast.p} columns but the design has {design.p}"
        )
    return design.x @ design.xtx_pinv @ contrast.values.T


def hypothesis_projector(design: DesignBundle, contrast: ContrastMatrix) -> HypothesisProjector:
    """Orthogonal projector D = X(X'X)^- L' (L(X'X)^- L')^-1 L(X'X)^- X'.

    D is symmetric, idempotent, of trace equal to the contrast rank d.
    """
    c_inv = contrast_inverse(design, contrast)
    w = w_matrix(design, contrast)
    values = w @ c_inv @ w.T
    values = (values + values.T) / 2.0
    return HypothesisProjector(values=values, d=contrast.d)
