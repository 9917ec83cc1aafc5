"""Brute-force reference computations in explicit feature coordinates.

For kernels with an exact finite-dimensional feature map (linear,
degree-2 polynomial) every model quantity can be materialized densely:
coefficients, residuals, the residual covariance and its eigensystem,
the tested operator, and leave-one-out refits. These routines exist to
verify the Gram-matrix implementations and are intentionally naive; they
share no linear algebra with the main modules beyond raw
eigendecompositions. Not part of the command-line surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, OracleError, UnsupportedKernelError
from .kernel import LINEAR, POLYNOMIAL, KernelSpec, _as_matrix
from .model import EIGVAL_RTOL


@dataclass(frozen=True, eq=False)
class ExplicitModel:
    """Least-squares fit of explicit features on a design matrix."""

    x: np.ndarray
    phi: np.ndarray
    theta_hat: np.ndarray
    residuals: np.ndarray
    sigma_hat: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    rank: int

    @property
    def n(self) -> int:
        return self.phi.shape[0]


def explicit_features(data, spec: KernelSpec) -> np.ndarray:
    """Exact finite feature map: identity for linear, weighted monomials
    for the degree-2 polynomial so that <phi(x), phi(y)> = (<x, y> + c)^2.

    Raises
    ------
    UnsupportedKernelError
        For kernels without an exact finite map (gaussian, higher degrees).
    """
    y = _as_matrix(data)
    if spec.kind == LINEAR:
        return y.copy()
    if spec.kind == POLYNOMIAL and spec.degree == 2:
        n, p = y.shape
        c = spec.offset
        cols = [y[:, [i]] * y[:, [i]] for i in range(p)]
        for i in range(p):
            for j in range(i + 1, p):
                cols.append(np.sqrt(2.0) * y[:, [i]] * y[:, [j]])
        if c > 0:
            cols.append(np.sqrt(2.0 * c) * y)
            cols.append(np.full((n, 1), c))
        return np.hstack(cols)
    raise UnsupportedKernelError(
        f"no exact finite feature map for kernel {spec.kind!r}"
        + (f" of degree {spec.degree}" if spec.kind == POLYNOMIAL else "")
    )


def explicit_model(x, phi) -> ExplicitModel:
    """Least-squares fit of ``phi`` on ``x`` with all quantities dense.

    Uses numpy's SVD-based pseudo-inverse throughout, independently of
    the eigendecomposition-based route in the design module. Eigenvector
    signs follow the same convention as the Gram-side fit, recomputed
    here through the duality between feature-space eigenfunctions and
    sample-space eigenvectors.
    """
    x = np.asarray(x, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if x.shape[0] != phi.shape[0]:
        raise InputError("design and feature matrices disagree on the sample count")
    n = x.shape[0]
    theta_hat = np.linalg.pinv(x.T @ x) @ x.T @ phi
    residuals = phi - x @ theta_hat
    sigma_hat = residuals.T @ residuals / n
    sigma_hat = (sigma_hat + sigma_hat.T) / 2.0
    w, v = np.linalg.eigh(sigma_hat)
    w = w[::-1]
    v = v[:, ::-1]
    rank = int(np.count_nonzero(w > EIGVAL_RTOL * max(w[0], 0.0)))
    w = w[:rank].copy()
    v = v[:, :rank].copy()
    # Dual sign rule: the sample-space eigenvector paired with f_t is
    # residuals @ f_t / sqrt(n * lambda_t); make its largest entry positive.
    for s in range(rank):
        dual = residuals @ v[:, s]
        if dual[np.argmax(np.abs(dual))] < 0:
            v[:, s] *= -1.0
    return ExplicitModel(
        x=x,
        phi=phi,
        theta_hat=theta_hat,
        residuals=residuals,
        sigma_hat=sigma_hat,
        eigvals=w,
        eigvecs=v,
        rank=rank,
    )


def _contrast_pieces(model: ExplicitModel, contrast_values: np.ndarray):
    el = np.atleast_2d(np.asarray(contrast_values, dtype=float))
    xtx_pinv = np.linalg.pinv(model.x.T @ model.x)
    c = el @ xtx_pinv @ el.T
    c_inv = np.linalg.inv(c)
    return el, xtx_pinv, c_inv


def oracle_hl_operator(model: ExplicitModel, contrast_values) -> np.ndarray:
    """The tested operator H_L as a dense D x D matrix."""
    el, _, c_inv = _contrast_pieces(model, contrast_values)
    ltheta = el @ model.theta_hat
    return ltheta.T @ c_inv @ ltheta


def _truncated_inverse(model: ExplicitModel, t: int) -> np.ndarray:
    if int(t) != t or not 1 <= t <= model.rank:
        raise OracleError(f"truncation {t} outside 1..{model.rank}")
    f = model.eigvecs[:, :t]
    return (f / model.eigvals[:t]) @ f.T


def oracle_statistic(model: ExplicitModel, contrast_values, t: int) -> float:
    """trace of the truncated inverse residual covariance times H_L."""
    h_l = oracle_hl_operator(model, contrast_values)
    return float(np.trace(_truncated_inverse(model, t) @ h_l))


def oracle_cook(model: ExplicitModel, contrast_values, t: int, i: int) -> float:
    """Leave-one-out influence of observation ``i`` on the tested combination.

    Refits the coefficients without row ``i`` and measures the shift of
    L Theta in the metric of the full fit's truncated inverse covariance
    and contrast normalization.
    """
    n = model.n
    if not 0 <= i < n:
        raise OracleError(f"observation index {i} outside 0..{n - 1}")
    keep = np.arange(n) != i
    x_del = model.x[keep]
    if np.linalg.matrix_rank(x_del) < np.linalg.matrix_rank(model.x):
        raise OracleError(f"deleting observation {i} collapses the design rank")
    theta_del = np.linalg.pinv(x_del.T @ x_del) @ x_del.T @ model.phi[keep]
    el, _, c_inv = _contrast_pieces(model, contrast_values)
    delta = el @ (model.theta_hat - theta_del)
    sig_t_inv = _truncated_inverse(model, t)
    d = el.shape[0]
    return float(np.trace(c_inv @ delta @ sig_t_inv @ delta.T)) / d


def oracle_kt(model: ExplicitModel, t: int) -> np.ndarray:
    """Reference for the t x n projection matrix: entry (s, i) equals
    lambda_s^{-1/2} <f_s, phi_i>."""
    if int(t) != t or not 1 <= t <= model.rank:
        raise OracleError(f"truncation {t} outside 1..{model.rank}")
    f = model.eigvecs[:, :t]
    return (f / np.sqrt(model.eigvals[:t])).T @ model.phi.T


def oracle_projection_tables(model: ExplicitModel, t: int):
    """Response, residual, and prediction projections on the first t
    residual eigenfunctions (each n x t)."""
    if int(t) != t or not 1 <= t <= model.rank:
        raise OracleError(f"truncation {t} outside 1..{model.rank}")
    f = model.eigvecs[:, :t]
    response = model.phi @ f
    residual = model.residuals @ f
    prediction = (model.x @ model.theta_hat) @ f
    return response, residual, prediction


def oracle_discriminant(model: ExplicitModel, contrast_values, t: int):
    """Eigenvalues and observation coordinates of the discriminant axes.

    The tested operator (truncated inverse covariance times H_L) is not
    symmetric; the axis carrying eigenvalue xi_j is the unit direction
    H_L applied to the j-th eigendirection of the truncated metric, the
    same object the Gram-side projection formula evaluates. Axis signs
    are arbitrary here.
    """
    h_l = oracle_hl_operator(model, contrast_values)
    if int(t) != t or not 1 <= t <= model.rank:
        raise OracleError(f"truncation {t} outside 1..{model.rank}")
    f = model.eigvecs[:, :t]
    lam = model.eigvals[:t]
    b = f.T @ h_l @ f
    b = (b + b.T) / 2.0
    core = (b / np.sqrt(lam)[None, :]) / np.sqrt(lam)[:, None]
    xi, w = np.linalg.eigh(core)
    xi = np.maximum(xi[::-1], 0.0)
    w = w[:, ::-1]
    axes = h_l @ f @ (w / np.sqrt(lam)[:, None])  # column j: H_L f-combination for v_j
    coords = np.zeros((model.n, t))
    for j in range(t):
        norm = np.linalg.norm(axes[:, j])
        if norm > 0.0:
            coords[:, j] = model.phi @ axes[:, j] / norm
    return xi, coords


def oracle_anchors(model: ExplicitModel, landmark_indices, m: int) -> np.ndarray:
    """Top-m eigenfunctions (D x m, orthonormal) of the landmark residual
    covariance, fitted from scratch on the sampled rows."""
    idx = np.asarray(landmark_indices, dtype=int)
    x_i = model.x[idx]
    phi_i = model.phi[idx]
    q = idx.size
    theta_i = np.linalg.pinv(x_i.T @ x_i) @ x_i.T @ phi_i
    resid_i = phi_i - x_i @ theta_i
    sigma_z = resid_i.T @ resid_i / q
    sigma_z = (sigma_z + sigma_z.T) / 2.0
    wz, vz = np.linalg.eigh(sigma_z)
    wz = wz[::-1]
    vz = vz[:, ::-1]
    rank_z = int(np.count_nonzero(wz > EIGVAL_RTOL * max(wz[0], 0.0)))
    if m > rank_z:
        raise OracleError(f"anchor count {m} exceeds landmark residual rank {rank_z}")
    return vz[:, :m]


def oracle_nystrom_covariance(model: ExplicitModel, landmark_indices, m: int) -> np.ndarray:
    """Residual covariance after projection on the anchor span, expressed
    in anchor coordinates (m x m)."""
    anchors = oracle_anchors(model, landmark_indices, m)
    projected = model.residuals @ anchors
    sigma_a = projected.T @ projected / model.n
    return (sigma_a + sigma_a.T) / 2.0


def oracle_nystrom_statistic(
    model: ExplicitModel, contrast_values, landmark_indices, m: int, t: int
) -> float:
    """Landmark-compressed statistic computed entirely in feature space.

    Anchors are the top eigenfunctions of the landmark residual
    covariance; residuals are projected on their span, the projected
    covariance is diagonalized, and the statistic is the trace of its
    truncated inverse against H_L, everything expressed in the anchor
    basis.
    """
    anchors = oracle_anchors(model, landmark_indices, m)
    projected = model.residuals @ anchors  # n x m, residual coordinates on anchors
    sigma_a = projected.T @ projected / model.n
    sigma_a = (sigma_a + sigma_a.T) / 2.0
    wa, va = np.linalg.eigh(sigma_a)
    wa = wa[::-1]
    va = va[:, ::-1]
    rank_a = int(np.count_nonzero(wa > EIGVAL_RTOL * max(wa[0], 0.0)))
    if t > rank_a:
        raise OracleError(f"truncation {t} exceeds projected covariance rank {rank_a}")
    h_l = oracle_hl_operator(model, contrast_values)
    h_anchor = anchors.T @ h_l @ anchors  # H_L in anchor coordinates
    ft = va[:, :t]
    trunc_inv = (ft / wa[:t]) @ ft.T
    return float(np.trace(trunc_inv @ h_anchor))
