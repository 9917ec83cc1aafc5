"""Projection-based model diagnostics and influence measures.

Three n x T tables project the embedded responses, the model residuals,
and the model predictions onto the leading residual eigenfunctions
(response = residual + prediction columnwise). Discriminant coordinates
place the observations along the unit eigenfunctions of the tested
operator in the truncated residual metric, and the kernelized Cook's
distance scores each observation's leave-one-out influence on the tested
combination. All functions are pure in the fitted model.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .design import ContrastMatrix, contrast_inverse, hypothesis_projector, w_matrix
from .errors import InputError, LeverageError, TruncationError
from .kernel import cross_gram
from .model import EIGVAL_RTOL, FittedModel, kt_matrix

#: Leverages within this distance of 1 make an observation self-determined.
LEVERAGE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class DiagnosticsBundle:
    """Response, residual and prediction projections on the first T
    residual eigenfunctions (each n x T)."""

    response_proj: np.ndarray
    residual_proj: np.ndarray
    prediction_proj: np.ndarray
    truncation: int


@dataclass(frozen=True, eq=False)
class DiscriminantAxes:
    """Eigenvalues of the tested operator and observation coordinates on
    its unit eigenfunctions.

    ``axis_eigvals`` holds all T eigenvalues (their sum is the test
    statistic); ``sample_coords`` has one column per retained axis, and
    ``new_coords`` the coordinates of any supplied new observations.
    """

    axis_eigvals: np.ndarray
    sample_coords: np.ndarray
    a: int
    new_coords: np.ndarray | None = None


def projection_tables(model: FittedModel, t: int) -> DiagnosticsBundle:
    """Diagnostic projections of responses, residuals and predictions.

    Columns s = 1..t hold inner products with the s-th residual
    eigenfunction; the response table is the entrywise sum of the other
    two because the design projector splits every embedding.
    """
    if int(t) != t or t < 1:
        raise InputError("truncation must be an integer >= 1")
    if t > model.rank:
        raise TruncationError(f"truncation {t} exceeds the spectral rank {model.rank}")
    t = int(t)
    n = model.n
    base = model.design.p_x_perp @ (model.eigvecs[:, :t] / np.sqrt(model.eigvals[:t]))
    response = model.gram.values @ base / math.sqrt(n)
    residual = model.design.p_x_perp @ response
    prediction = model.design.p_x @ response
    return DiagnosticsBundle(
        response_proj=response,
        residual_proj=residual,
        prediction_proj=prediction,
        truncation=t,
    )


def _first_group_mask(model: FittedModel, contrast: ContrastMatrix) -> np.ndarray | None:
    cols = np.flatnonzero(contrast.values[0])
    if cols.size == 0:
        return None
    members = model.design.x[:, cols[0]] > 0.5
    return members if members.any() else None


def discriminant_coordinates(
    model: FittedModel,
    contrast: ContrastMatrix,
    t: int,
    newdata=None,
    n_axes: int | None = None,
) -> DiscriminantAxes:
    """Observation coordinates along the tested operator's eigenfunctions.

    The t x t matrix K_T D K_T' is diagonalized; coordinates on axis j
    are v_j' K_T D k(Y, .) normalized by the axis eigenfunction norm. By
    default min(t, d) axes are retained; axes with a numerically zero
    eigenvalue are dropped with a warning. Each axis sign is fixed so the
    group carried by the first contrast entry has nonpositive mean
    coordinate. ``newdata`` rows are projected through cross-kernel
    columns against the original sample.
    """
    kt = kt_matrix(model, t)
    t = int(t)
    projector = hypothesis_projector(model.design, contrast)
    s_mat = kt @ projector.values  # t x n
    axis_mat = s_mat @ kt.T
    axis_mat = (axis_mat + axis_mat.T) / 2.0
    xi, vecs = np.linalg.eigh(axis_mat)
    xi = np.maximum(xi[::-1], 0.0)
    vecs = vecs[:, ::-1]

    if n_axes is None:
        n_axes = min(t, projector.d)
    if int(n_axes) != n_axes or n_axes < 0:
        raise InputError("number of axes must be a nonnegative integer")
    n_axes = min(int(n_axes), t)

    cross_new = None
    if newdata is not None:
        if model.gram.data is None or model.gram.spec is None:
            raise InputError(
                "the fitted Gram matrix does not carry its source data; "
                "new observations cannot be projected"
            )
        cross_new = cross_gram(model.gram.data, newdata, model.gram.spec)

    mask = _first_group_mask(model, contrast)
    sample_cols = []
    new_cols = []
    xi_floor = EIGVAL_RTOL * xi[0] if xi.size and xi[0] > 0 else 0.0
    for j in range(n_axes):
        weights = s_mat.T @ vecs[:, j]  # n-vector (K_T D)' v_j
        against_sample = weights @ model.gram.values
        norm_sq = float(against_sample @ weights)
        if xi[j] <= xi_floor or norm_sq <= 0.0:
            warnings.warn(
                f"discriminant axis {j + 1} has a numerically zero eigenvalue; dropped"
            )
            continue
        norm = math.sqrt(norm_sq)
        coords = against_sample / norm
        new_c = (weights @ cross_new) / norm if cross_new is not None else None
        if mask is not None and coords[mask].mean() > 0:
            coords = -coords
            if new_c is not None:
                new_c = -new_c
        sample_cols.append(coords)
        if new_c is not None:
            new_cols.append(new_c)

    n = model.n
    sample_coords = np.column_stack(sample_cols) if sample_cols else np.empty((n, 0))
    if cross_new is not None:
        q_new = cross_new.shape[1]
        new_coords = np.column_stack(new_cols) if new_cols else np.empty((q_new, 0))
    else:
        new_coords = None
    return DiscriminantAxes(
        axis_eigvals=xi,
        sample_coords=sample_coords,
        a=sample_coords.shape[1],
        new_coords=new_coords,
    )


def cook_distances(model: FittedModel, contrast: ContrastMatrix, t: int) -> np.ndarray:
    """Truncated kernelized Cook's distance of every observation.

    Combines the contrast-weighted leverage of each row with the
    truncated-metric length of its residual; equals the leave-one-out
    shift of the tested combination measured against the full fit.

    Raises
    ------
    LeverageError
        If some leverage is within ``LEVERAGE_TOL`` of 1 (the refit
        without that observation is undefined).
    """
    if int(t) != t or t < 1:
        raise InputError("truncation must be an integer >= 1")
    if t > model.rank:
        raise TruncationError(f"truncation {t} exceeds the spectral rank {model.rank}")
    t = int(t)
    leverages = model.design.leverages
    offending = np.flatnonzero(leverages >= 1.0 - LEVERAGE_TOL)
    if offending.size:
        raise LeverageError(
            f"observation {offending[0]} has leverage 1: it is fully determined "
            "by the design"
        )
    c_inv = contrast_inverse(model.design, contrast)
    w = w_matrix(model.design, contrast)
    quad = np.einsum("ij,jk,ik->i", w, c_inv, w)
    quad = np.maximum(quad, 0.0)
    n = model.n
    d = contrast.d
    resid_gram = n * model.k_e  # P_perp K P_perp
    b = resid_gram @ (model.eigvecs[:, :t] / model.eigvals[:t])
    metric = np.einsum("ij,ij->i", b, b)
    return quad / (d * n * (1.0 - leverages) ** 2) * metric
