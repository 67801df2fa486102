"""Penalised and unpenalised regression solvers.

The lasso solver minimises the unnormalised objective

    ||y - X b||_2^2 + lam * ||b||_1

by cyclic coordinate descent with soft-thresholding. Note there is no
1/(2n) factor: the soft-threshold level is therefore lam / 2 and the KKT
conditions read |2 X_j'(y - X b)| <= lam on inactive coordinates and
= lam * sign(b_j) on active ones.

Internally everything runs on Gram matrices (G = X'X, C = X'Y), which
lets one factorisation serve many response columns. That is what makes
the interval scan cheap: the block-diagonal Kronecker designs used by the
test statistics decouple into p single-response problems sharing one G.

Solvers are pure and reentrant; fits of independent responses may run in
parallel and give identical results regardless of schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DesignError, ParameterError
from .var_model import TimeSeriesPanel, lag_design

_RANK_RTOL = 1e-10


@dataclass
class SolverOptions:
    """Convergence controls for the coordinate-descent lasso."""

    tolerance: float = 1e-8
    max_iterations: int = 10000
    warm_start: Optional[np.ndarray] = None
    track_objective: bool = False

    def __post_init__(self) -> None:
        if self.tolerance < 0:
            raise ParameterError("tolerance must be non-negative")
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be >= 1")


@dataclass
class FitResult:
    coefficients: np.ndarray
    objective: float
    iterations: int
    converged: bool
    objective_path: Optional[list[float]] = None


def soft_threshold(value: float | np.ndarray, level: float) -> float | np.ndarray:
    return np.sign(value) * np.maximum(np.abs(value) - level, 0.0)


def lasso_cd_gram(
    gram: np.ndarray,
    cross: np.ndarray,
    lam: float,
    opts: SolverOptions | None = None,
    y_sq: float = 0.0,
) -> tuple[np.ndarray, int, bool, Optional[list[float]]]:
    """Cyclic coordinate descent on Gram form, for one or many responses.

    ``cross`` has shape (m, k): column i holds X' y_i and the k problems
    share the design. Returns (coefficients (m, k), sweeps, converged,
    objective path). The optional path records the summed objective after
    each sweep (requires ``y_sq`` = sum_i ||y_i||^2 to be meaningful).
    Zero-norm columns of the design keep a zero coefficient.
    """
    opts = opts or SolverOptions()
    cross = np.asarray(cross, dtype=float)
    if cross.ndim == 1:
        cross = cross[:, None]
    m, k = cross.shape
    beta = np.zeros((m, k))
    if opts.warm_start is not None:
        ws = np.asarray(opts.warm_start, dtype=float).reshape(m, k)
        beta[:] = ws
    diag = np.diag(gram).copy()
    active_cols = diag > 0.0
    beta[~active_cols, :] = 0.0
    level = lam / 2.0
    path: Optional[list[float]] = [] if opts.track_objective else None
    converged = False
    sweeps = 0
    for sweeps in range(1, opts.max_iterations + 1):
        max_change = 0.0
        for j in range(m):
            if not active_cols[j]:
                continue
            rho = cross[j] - gram[j] @ beta + diag[j] * beta[j]
            new = soft_threshold(rho, level) / diag[j]
            change = float(np.max(np.abs(new - beta[j])))
            if change > max_change:
                max_change = change
            beta[j] = new
        if path is not None:
            path.append(_gram_objective(gram, cross, beta, lam, y_sq))
        if max_change <= opts.tolerance:
            converged = True
            break
    return beta, sweeps, converged, path


def _gram_objective(gram, cross, beta, lam, y_sq) -> float:
    quad = float(np.sum(beta * (gram @ beta)))
    lin = float(np.sum(cross * beta))
    return y_sq - 2.0 * lin + quad + lam * float(np.abs(beta).sum())


def lasso_cd_gram_batch(
    grams: np.ndarray,
    crosses: np.ndarray,
    lams: np.ndarray,
    tolerance: float = 1e-8,
    max_iterations: int = 10000,
) -> tuple[np.ndarray, np.ndarray]:
    """Solve many independent Gram-form lassos with synchronised sweeps.

    ``grams`` is (N, m, m), ``crosses`` (N, m, k) and ``lams`` (N,): problem
    n minimises its objective with penalty lams[n]. All problems take the
    same cyclic coordinate steps as :func:`lasso_cd_gram`; problems that
    converge are frozen and compacted out of the working set, so a scan
    costs roughly one batched matrix product per coordinate per sweep.

    Returns (coefficients (N, m, k), converged (N,)).
    """
    n_prob, m, k = crosses.shape
    out = np.zeros((n_prob, m, k))
    converged = np.zeros(n_prob, dtype=bool)
    # KKT at zero: problems with 2 max|c| <= lam are done immediately
    busy = 2.0 * np.abs(crosses).max(axis=(1, 2)) > lams
    converged[~busy] = True
    idx = np.flatnonzero(busy)
    if idx.size == 0:
        return out, converged
    G = grams[idx].copy()
    C = crosses[idx].copy()
    B = np.zeros((idx.size, m, k))
    diag = np.einsum("nii->ni", G).copy()
    zero_col = diag <= 0.0
    diag_safe = np.where(zero_col, 1.0, diag)
    level = (np.asarray(lams, dtype=float)[idx] / 2.0)[:, None]
    for _ in range(max_iterations):
        max_change = np.zeros(idx.size)
        for j in range(m):
            rho = C[:, j, :] - (G[:, None, j, :] @ B)[:, 0, :] + diag[:, j, None] * B[:, j, :]
            new = np.sign(rho) * np.maximum(np.abs(rho) - level, 0.0) / diag_safe[:, j, None]
            if zero_col[:, j].any():
                new[zero_col[:, j]] = 0.0
            np.maximum(max_change, np.abs(new - B[:, j, :]).max(axis=1), out=max_change)
            B[:, j, :] = new
        done = max_change <= tolerance
        if done.any():
            out[idx[done]] = B[done]
            converged[idx[done]] = True
            if done.all():
                return out, converged
            keep = ~done
            idx, G, C, B = idx[keep], G[keep], C[keep], B[keep]
            diag, diag_safe = diag[keep], diag_safe[keep]
            zero_col, level = zero_col[keep], level[keep]
    out[idx] = B
    return out, converged


def kkt_violation(gram: np.ndarray, cross: np.ndarray, beta: np.ndarray, lam: float) -> float:
    """Worst violation of the lasso stationarity conditions, in gradient units."""
    grad = 2.0 * (gram @ beta - cross)
    active = beta != 0.0
    v = 0.0
    if np.any(active):
        v = float(np.max(np.abs(grad[active] + lam * np.sign(beta[active]))))
    inactive = ~active
    if np.any(inactive):
        v = max(v, float(np.max(np.abs(grad[inactive])) - lam))
    return max(v, 0.0)


def lasso_solve(X: np.ndarray, y: np.ndarray, lam: float, opts: SolverOptions | None = None) -> FitResult:
    """Minimise ||y - X b||^2 + lam ||b||_1 by cyclic coordinate descent.

    Non-convergence within max_iterations is reported through the
    ``converged`` flag, never hidden.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if lam < 0:
        raise ParameterError("lasso penalty must be non-negative")
    if X.shape[0] != y.shape[0]:
        raise DesignError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    gram = X.T @ X
    cross = (X.T @ y)[:, None]
    beta, sweeps, converged, path = lasso_cd_gram(gram, cross, lam, opts, y_sq=float(y @ y))
    b = beta[:, 0]
    resid = y - X @ b
    objective = float(resid @ resid) + lam * float(np.abs(b).sum())
    return FitResult(b, objective, sweeps, converged, path)


def ols_solve(X: np.ndarray, y: np.ndarray) -> FitResult:
    """Least squares on a full column rank design with n >= m."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, m = X.shape
    if n < m:
        raise DesignError(f"ill-posed design: {n} rows for {m} columns")
    sv = np.linalg.svd(X, compute_uv=False)
    if sv.size == 0 or sv[-1] <= _RANK_RTOL * sv[0]:
        raise DesignError("ill-posed design: rank deficient within tolerance")
    b, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ b
    return FitResult(b, float(resid @ resid), 1, True)


def ridge_solve(X: np.ndarray, y: np.ndarray, lam: float) -> FitResult:
    """Minimise ||y - X b||^2 + lam ||b||^2; unique for lam > 0."""
    if lam <= 0:
        raise ParameterError("ridge penalty must be positive")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    m = X.shape[1]
    b = np.linalg.solve(X.T @ X + lam * np.eye(m), X.T @ y)
    resid = y - X @ b
    return FitResult(b, float(resid @ resid) + lam * float(b @ b), 1, True)


def default_baseline_lambda(p: int, n_train: int, c: float = 0.15) -> float:
    """Default penalty for baseline estimation: the rate with L set to T_train."""
    return c * math.sqrt(n_train * (2.0 * math.log(p) + math.log(n_train)))


def estimate_baseline(
    training: TimeSeriesPanel,
    q: int,
    penalty: str = "ridge",
    lam: Optional[float] = None,
    c: float = 0.15,
    opts: SolverOptions | None = None,
) -> np.ndarray:
    """Estimate the p x pq coefficient matrix from a stationary training slice.

    Each coordinate is regressed on the lagged design independently with the
    chosen penalty ("lasso", "ridge" or "none"). The default lam follows the
    tuning-parameter rate with the interval length replaced by the training
    length.
    """
    if penalty not in ("lasso", "ridge", "none"):
        raise ParameterError(f"unknown penalty {penalty!r}")
    values = training.values
    n, p = values.shape
    if n < q + 2:
        raise DesignError(f"training needs at least q + 2 = {q + 2} rows, got {n}")
    Z, Y = lag_design(values, q)
    if penalty == "none":
        if Z.shape[0] < Z.shape[1]:
            raise DesignError("unpenalised baseline needs at least pq usable rows")
        fits = [ols_solve(Z, Y[:, i]).coefficients for i in range(p)]
        return np.vstack(fits)
    if lam is None:
        lam = default_baseline_lambda(p, n, c)
    gram = Z.T @ Z
    cross = Z.T @ Y
    if penalty == "ridge":
        theta = np.linalg.solve(gram + lam * np.eye(gram.shape[0]), cross)
        return theta.T
    beta, _, converged, _ = lasso_cd_gram(gram, cross, lam, opts)
    if not converged:
        raise DesignError("baseline lasso did not converge; relax solver options")
    return beta.T


def estimate_noise_covariance(training: TimeSeriesPanel, theta: np.ndarray, q: int) -> np.ndarray:
    """Residual covariance (1 / (T - q)) sum_t r_t r_t' under the fitted theta."""
    values = training.values
    n, p = values.shape
    if n <= q:
        raise DesignError(f"training needs more than q = {q} rows")
    theta = np.asarray(theta, dtype=float)
    Z, Y = lag_design(values, q)
    resid = Y - Z @ theta.T if q > 0 else Y.copy()
    return resid.T @ resid / resid.shape[0]
