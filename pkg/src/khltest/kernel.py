"""Kernel evaluation, bandwidth selection, and Gram matrix construction.

All operations are pure. Kernel conventions:

* gaussian:    k(y, y') = exp(-||y - y'||^2 / (2 * bandwidth^2))
* linear:      k(y, y') = <y, y'>
* polynomial:  k(y, y') = (<y, y'> + offset) ** degree

An unset gaussian bandwidth is resolved with the median heuristic
(the median of all pairwise Euclidean distances) at Gram time.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .errors import DegenerateDataError, InputError

GAUSSIAN = "gaussian"
LINEAR = "linear"
POLYNOMIAL = "polynomial"
_KINDS = (GAUSSIAN, LINEAR, POLYNOMIAL)

#: Above this sample size the median heuristic switches from all
#: n(n-1)/2 pairs to a fixed-seed uniform subsample of pairs.
MEDIAN_EXACT_LIMIT = 5000
MEDIAN_SUBSAMPLE_PAIRS = 1_000_000
_MEDIAN_SUBSAMPLE_SEED = 52_296_853  # frozen so large-n bandwidths are reproducible

# Row block size for pairwise products; bounds temporary memory, does not
# change per-entry arithmetic.
_BLOCK_ELEMS = 8_000_000


@dataclass(frozen=True)
class KernelSpec:
    """Choice of kernel function.

    Parameters
    ----------
    kind : str
        One of ``"gaussian"``, ``"linear"``, ``"polynomial"``.
    bandwidth : float or None
        Gaussian scale. ``None`` requests the median heuristic.
    degree : int
        Polynomial degree (polynomial kernel only).
    offset : float
        Nonnegative polynomial offset (polynomial kernel only).
    """

    kind: str
    bandwidth: float | None = None
    degree: int = 2
    offset: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InputError(f"unknown kernel kind {self.kind!r}; expected one of {_KINDS}")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise InputError("gaussian bandwidth must be positive when set")
        if self.kind == POLYNOMIAL:
            if int(self.degree) != self.degree or self.degree < 1:
                raise InputError("polynomial degree must be an integer >= 1")
            if not self.offset >= 0:
                raise InputError("polynomial offset must be nonnegative")

    def resolved(self, data: np.ndarray) -> "KernelSpec":
        """Return a spec with the gaussian bandwidth filled in from ``data``."""
        if self.kind == GAUSSIAN and self.bandwidth is None:
            return dataclasses.replace(self, bandwidth=median_heuristic(data))
        return self

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == GAUSSIAN:
            out["bandwidth"] = self.bandwidth
        elif self.kind == POLYNOMIAL:
            out["degree"] = self.degree
            out["offset"] = self.offset
        return out

    @classmethod
    def from_dict(cls, spec: dict) -> "KernelSpec":
        if "kind" not in spec:
            raise InputError("kernel spec needs a 'kind' entry")
        kwargs = {k: spec[k] for k in ("bandwidth", "degree", "offset") if spec.get(k) is not None}
        return cls(kind=spec["kind"], **kwargs)


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """An n x n matrix of pairwise kernel evaluations.

    ``data`` and ``spec`` record the rows and the resolved kernel the
    matrix was built from, so that later cross-Gram computations (new
    observations, landmarks) reuse the exact same bandwidth.
    """

    values: np.ndarray
    n: int
    data: np.ndarray | None = dataclasses.field(default=None, repr=False)
    spec: KernelSpec | None = None


def _as_matrix(data, name: str = "data") -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise InputError(f"{name} must be a 2-d array of observations, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    return arr


def median_heuristic(data) -> float:
    """Median of the pairwise Euclidean distances of the rows of ``data``.

    For more than ``MEDIAN_EXACT_LIMIT`` rows the median is taken over a
    fixed-seed uniform subsample of ``MEDIAN_SUBSAMPLE_PAIRS`` pairs.

    Raises
    ------
    DegenerateDataError
        If there are fewer than 2 rows or the median distance is zero.
    """
    y = _as_matrix(data)
    n = y.shape[0]
    if n < 2:
        raise DegenerateDataError("median heuristic needs at least 2 observations")
    if n <= MEDIAN_EXACT_LIMIT:
        dists = pdist(y)
    else:
        rng = np.random.default_rng(_MEDIAN_SUBSAMPLE_SEED)
        i = rng.integers(0, n, size=MEDIAN_SUBSAMPLE_PAIRS)
        j = rng.integers(0, n - 1, size=MEDIAN_SUBSAMPLE_PAIRS)
        j += j >= i  # uniform over off-diagonal pairs
        dists = np.linalg.norm(y[i] - y[j], axis=1)
    med = float(np.median(dists))
    if med <= 0.0:
        raise DegenerateDataError("median pairwise distance is zero; cannot set a bandwidth")
    return med


def _pair_dots(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All inner products <a_i, b_j>.

    Computed entrywise with a summation order that depends only on the
    feature dimension, so the result is exactly symmetric under swapping
    the arguments: ``_pair_dots(a, b).T == _pair_dots(b, a)`` bit for bit.
    """
    n, p = a.shape
    q = b.shape[0]
    out = np.empty((n, q))
    step = max(1, _BLOCK_ELEMS // max(1, q * p))
    for start in range(0, n, step):
        stop = min(n, start + step)
        out[start:stop] = np.add.reduce(a[start:stop, None, :] * b[None, :, :], axis=2)
    return out


def _kernel_values(a: np.ndarray, b: np.ndarray, spec: KernelSpec, same: bool) -> np.ndarray:
    dots = _pair_dots(a, b)
    if spec.kind == LINEAR:
        return dots
    if spec.kind == POLYNOMIAL:
        return (dots + spec.offset) ** spec.degree
    # gaussian
    sq_a = np.add.reduce(a * a, axis=1)
    sq_b = sq_a if same else np.add.reduce(b * b, axis=1)
    d2 = sq_a[:, None] + sq_b[None, :] - 2.0 * dots
    np.maximum(d2, 0.0, out=d2)
    if same:
        np.fill_diagonal(d2, 0.0)  # exact unit diagonal
    return np.exp(d2 / (-2.0 * spec.bandwidth**2))


def gram(data, spec: KernelSpec) -> GramMatrix:
    """Gram matrix of the rows of ``data`` under ``spec``.

    A gaussian spec without a bandwidth is resolved here with
    :func:`median_heuristic` on ``data``; the resolved spec is stored on
    the returned :class:`GramMatrix`.
    """
    y = _as_matrix(data)
    resolved = spec.resolved(y)
    values = _kernel_values(y, y, resolved, same=True)
    return GramMatrix(values=values, n=y.shape[0], data=y, spec=resolved)


def cross_gram(a, b, spec: KernelSpec) -> np.ndarray:
    """Matrix of kernel evaluations k(a_i, b_j).

    ``spec`` must already carry the bandwidth used for the model Gram
    matrix; resolving it here on either argument would silently change
    the kernel between the two computations.
    """
    ya = _as_matrix(a, "a")
    yb = _as_matrix(b, "b")
    if ya.shape[1] != yb.shape[1]:
        raise InputError(
            f"column mismatch: a has {ya.shape[1]} features, b has {yb.shape[1]}"
        )
    if spec.kind == GAUSSIAN and spec.bandwidth is None:
        raise InputError("cross_gram needs a resolved gaussian bandwidth; call gram() first")
    return _kernel_values(ya, yb, spec, same=False)
