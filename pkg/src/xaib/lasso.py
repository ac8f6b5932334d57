"""Weighted least squares and weighted L1-penalized regression by
coordinate descent, used for the K-limited sparse surrogate fit."""
from __future__ import annotations

import numpy as np

__all__ = ["weighted_least_squares", "weighted_lasso", "lasso_path_support"]


def weighted_least_squares(
    X: np.ndarray, y: np.ndarray, w: np.ndarray
) -> tuple[float, np.ndarray]:
    """Minimize sum_i w_i (y_i - b0 - x_i beta)^2.  Returns (b0, beta)."""
    sw = np.sqrt(w)
    A = np.concatenate([np.ones((len(y), 1)), X], axis=1) * sw[:, None]
    coef, *_ = np.linalg.lstsq(A, y * sw, rcond=None)
    return float(coef[0]), coef[1:]


def weighted_lasso(
    X: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    lam: float,
    beta: np.ndarray | None = None,
    max_iter: int = 2000,
    tol: float = 1e-10,
) -> tuple[float, np.ndarray]:
    """Coordinate descent for
        (1 / 2W) sum_i w_i (y_i - b0 - x_i beta)^2 + lam * ||beta||_1,
    W = sum_i w_i; the intercept is unpenalized.  Returns (b0, beta).
    """
    n, d = X.shape
    W = w.sum()
    beta = np.zeros(d) if beta is None else beta.copy()
    # per-feature curvature (sum_i w_i x_ij^2) / W
    col_sq = (w[:, None] * X * X).sum(axis=0) / W
    resid = y - X @ beta
    b0 = float(np.dot(w, resid) / W)
    resid = resid - b0
    for _ in range(max_iter):
        max_delta = 0.0
        for j in range(d):
            if col_sq[j] == 0.0:
                continue
            rho = np.dot(w * X[:, j], resid) / W + col_sq[j] * beta[j]
            new = np.sign(rho) * max(abs(rho) - lam, 0.0) / col_sq[j]
            delta = new - beta[j]
            if delta != 0.0:
                resid -= X[:, j] * delta
                beta[j] = new
                max_delta = max(max_delta, abs(delta))
        # re-center the intercept
        shift = float(np.dot(w, resid) / W)
        if shift != 0.0:
            b0 += shift
            resid -= shift
            max_delta = max(max_delta, abs(shift))
        if max_delta < tol:
            break
    return b0, beta


def lasso_path_support(
    X: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    k_max: int,
    rel_grid: np.ndarray | None = None,
) -> np.ndarray:
    """Walk a lambda grid downward from lambda_max and return the support of
    the last fit with at most k_max active features (the densest admissible
    one on the path).  `rel_grid` holds multipliers of lambda_max; the
    default is geometric over two decades, 50 points."""
    W = w.sum()
    yc = y - np.dot(w, y) / W
    lam_max = float(np.max(np.abs((w * yc) @ X)) / W)
    if lam_max <= 0.0:
        return np.array([], dtype=np.int64)
    if rel_grid is None:
        rel_grid = np.power(10.0, -np.linspace(0.0, 2.0, 50))
    grid = lam_max * np.sort(np.asarray(rel_grid, dtype=np.float64))[::-1]
    support = np.array([], dtype=np.int64)
    beta = None
    for lam in grid:
        _, beta = weighted_lasso(X, y, w, lam, beta=beta)
        nz = np.flatnonzero(np.abs(beta) > 1e-12)
        if len(nz) > k_max:
            break
        support = nz
    return support
