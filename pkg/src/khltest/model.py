"""Model fitting and the truncated kernel Hotelling-Lawley test.

The residual structure of the linear model on embeddings is captured by
the residual Gram matrix

    K_E = P_X_perp . K_Y . P_X_perp / n,

whose eigensystem represents the residual covariance operator in dual
(sample) coordinates. The test statistic for a contrast L at truncation
T is trace(K_T D K_T') with K_T the T x n matrix of scaled eigenfunction
projections and D the hypothesis projector; under the null it is
asymptotically chi-square with d*T degrees of freedom, and that is the
calibration used for p-values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .design import ContrastMatrix, DesignBundle, FactorInfo, hypothesis_projector
from .errors import DegenerateFitError, InputError, TruncationError
from .kernel import GramMatrix

#: Eigenvalues below this fraction of the largest are treated as zero.
EIGVAL_RTOL = 1e-10
#: Statistics below this are reported with p = 1 (degenerate tested combination).
ZERO_STATISTIC = 1e-12

_MAX_SPECIAL_ITER = 1000


@dataclass(frozen=True, eq=False)
class FittedModel:
    """Immutable result of :func:`fit`; safe for concurrent testing."""

    gram: GramMatrix
    design: DesignBundle
    k_e: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    rank: int

    @property
    def n(self) -> int:
        return self.gram.n


@dataclass(frozen=True)
class TestResult:
    """Outcome of one contrast test.

    ``statistic`` is the chi-square calibrated quantity; ``capped`` flags
    a requested truncation that was silently reduced to the available
    spectral rank.
    """

    statistic: float
    df: int
    p_value: float
    truncation: int
    method: str
    capped: bool = False

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "truncation": self.truncation,
            "method": self.method,
        }


@dataclass(frozen=True)
class PairwiseResult:
    levels: tuple
    result: TestResult
    adjusted_p: float


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Flip eigenvector signs so each column's largest-magnitude entry is positive."""
    if vecs.size == 0:
        return vecs
    idx = np.argmax(np.abs(vecs), axis=0)
    flip = vecs[idx, np.arange(vecs.shape[1])] < 0
    vecs = vecs.copy()
    vecs[:, flip] *= -1.0
    return vecs


def fit(gram: GramMatrix, design: DesignBundle) -> FittedModel:
    """Fit the linear model on embeddings through its residual Gram matrix.

    Forms K_E, eigendecomposes it, and retains the eigenvalues above
    ``EIGVAL_RTOL`` times the largest, sorted in decreasing order, with a
    deterministic sign convention on the eigenvectors.

    Raises
    ------
    InputError
        If the Gram matrix and design disagree on the sample count.
    DegenerateFitError
        If the residual Gram matrix is numerically zero (perfect fit).
    """
    if gram.n != design.n:
        raise InputError(f"Gram matrix has n={gram.n} but the design has n={design.n}")
    n = gram.n
    k_e = design.p_x_perp @ gram.values @ design.p_x_perp / n
    k_e = (k_e + k_e.T) / 2.0
    w, v = np.linalg.eigh(k_e)
    w = w[::-1]
    v = v[:, ::-1]
    zero_scale = 1e-12 * max(1.0, float(np.abs(gram.values).max()) / n)
    if w[0] <= zero_scale:
        raise DegenerateFitError(
            "residual Gram matrix is numerically zero: the design explains the "
            "embeddings exactly"
        )
    rank = int(np.count_nonzero(w > EIGVAL_RTOL * w[0]))
    return FittedModel(
        gram=gram,
        design=design,
        k_e=k_e,
        eigvals=w[:rank].copy(),
        eigvecs=_fix_signs(v[:, :rank]),
        rank=rank,
    )


def kt_matrix(model: FittedModel, t: int) -> np.ndarray:
    """The t x n matrix of scaled residual-eigenfunction projections.

    Row s holds n^{-1/2} * lambda_s^{-1} * u_s' P_X_perp K_Y; entry (s, i)
    equals lambda_s^{-1/2} times the projection of observation i's
    embedding on the s-th residual eigenfunction.
    """
    if int(t) != t or t < 1:
        raise InputError("truncation must be an integer >= 1")
    if t > model.rank:
        raise TruncationError(f"truncation {t} exceeds the spectral rank {model.rank}")
    t = int(t)
    n = model.n
    proj = model.eigvecs[:, :t].T @ model.design.p_x_perp @ model.gram.values
    return proj / (math.sqrt(n) * model.eigvals[:t, None])


def tkhl_test(model: FittedModel, contrast: ContrastMatrix, t: int) -> TestResult:
    """Truncated kernel Hotelling-Lawley test of L Theta = 0.

    The requested truncation is capped at the spectral rank (flagged in
    the result); a numerically zero statistic yields p = 1.
    """
    if int(t) != t or t < 1:
        raise InputError("truncation must be an integer >= 1")
    t_eff = min(int(t), model.rank)
    capped = int(t) > model.rank
    projector = hypothesis_projector(model.design, contrast)
    kt = kt_matrix(model, t_eff)
    statistic = float(np.sum((kt @ projector.values) * kt))
    statistic = max(statistic, 0.0)
    df = projector.d * t_eff
    p_value = 1.0 if statistic < ZERO_STATISTIC else chi2_sf(statistic, df)
    return TestResult(
        statistic=statistic,
        df=df,
        p_value=p_value,
        truncation=t_eff,
        method="exact",
        capped=capped,
    )


def _reg_lower_series(a: float, z: float) -> float:
    # P(a, z) = z^a e^{-z} / Gamma(a+1) * sum_k z^k / ((a+1)...(a+k))
    term = 1.0
    total = 1.0
    ak = a
    for _ in range(_MAX_SPECIAL_ITER):
        ak += 1.0
        term *= z / ak
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    log_pref = a * math.log(z) - z - math.lgamma(a + 1.0)
    if log_pref < -745.0:
        return 0.0
    return total * math.exp(log_pref)


def _reg_upper_cf(a: float, z: float) -> float:
    # Modified Lentz continued fraction for Q(a, z).
    tiny = 1e-300
    b = z + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b if b != 0.0 else 1.0 / tiny
    h = d
    for i in range(1, _MAX_SPECIAL_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    log_pref = a * math.log(z) - z - math.lgamma(a)
    if log_pref < -745.0:
        return 0.0
    return math.exp(log_pref) * h


def chi2_sf(x: float, df: int) -> float:
    """Upper-tail probability of the chi-square distribution.

    Evaluated through the regularized incomplete gamma function: a power
    series below x = df + 1 and a continued fraction above, accurate to
    well under 1e-12 absolutely.
    """
    if int(df) != df or df < 1:
        raise InputError("degrees of freedom must be a positive integer")
    x = float(x)
    if not np.isfinite(x) or x < 0.0:
        raise InputError("chi-square statistic must be a finite nonnegative number")
    if x == 0.0:
        return 1.0
    a = df / 2.0
    z = x / 2.0
    if x < df + 1.0:
        p = min(max(_reg_lower_series(a, z), 0.0), 1.0)
        return 1.0 - p
    return min(max(_reg_upper_cf(a, z), 0.0), 1.0)


def bh_adjust(p_values) -> np.ndarray:
    """Benjamini-Hochberg step-up adjustment, monotone and capped at 1."""
    p = np.asarray(p_values, dtype=float)
    if p.ndim != 1:
        raise InputError("p-values must be a 1-d sequence")
    if p.size == 0:
        return p.copy()
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise InputError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    adjusted = np.minimum.accumulate(scaled[::-1])[::-1]
    adjusted = np.minimum(adjusted, 1.0)
    out = np.empty(m)
    out[order] = adjusted
    return out


def _match_factor(design: DesignBundle, factor_labels) -> FactorInfo:
    wanted = tuple(factor_labels)
    for factor in design.factors:
        if factor.labels == wanted or factor.levels == wanted:
            return factor
    raise InputError(
        "factor labels do not match any factor of the fitted design; pass the "
        "per-observation labels the design was built from"
    )


def pairwise_tests(model: FittedModel, factor_labels, t: int) -> list[PairwiseResult]:
    """One test per unordered level pair of a factor, BH-adjusted.

    ``factor_labels`` identifies the factor by its per-observation labels
    (or its level list). Every pair is tested against the same fitted
    residual spectrum, then the raw p-values are adjusted jointly.
    """
    factor = _match_factor(model.design, factor_labels)
    levels = factor.levels
    if len(levels) < 2:
        raise InputError("pairwise testing needs a factor with at least 2 levels")
    width = model.design.p
    tested: list[tuple[tuple, TestResult]] = []
    for i in range(len(levels)):
        for j in range(i + 1, len(levels)):
            row = np.zeros((1, width))
            row[0, factor.offset + i] = 1.0
            row[0, factor.offset + j] = -1.0
            result = tkhl_test(model, ContrastMatrix(row), t)
            tested.append(((levels[i], levels[j]), result))
    adjusted = bh_adjust([res.p_value for _, res in tested])
    return [
        PairwiseResult(levels=pair, result=res, adjusted_p=float(adj))
        for (pair, res), adj in zip(tested, adjusted)
    ]
