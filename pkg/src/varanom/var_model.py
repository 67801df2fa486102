"""VAR(q) processes with piecewise-constant coefficients.

Time indices are 1-based throughout: a panel with T rows carries the
observations x_1, ..., x_T and an interval [s, e] refers to those rows
inclusively. The first q rows of a panel can never be regression
responses because they lack a full set of lags.

All functions here are pure given their inputs and seed; the returned
objects are treated as immutable and are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DesignError, ParameterError


def companion_matrix(coeffs: Sequence[np.ndarray]) -> np.ndarray:
    """Stack lag matrices A_1..A_q into the pq x pq companion form."""
    q = len(coeffs)
    p = coeffs[0].shape[0]
    top = np.hstack(coeffs)
    if q == 1:
        return top
    lower = np.hstack([np.eye(p * (q - 1)), np.zeros((p * (q - 1), p))])
    return np.vstack([top, lower])


def spectral_radius(coeffs: Sequence[np.ndarray]) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(coeffs)))))


@dataclass(frozen=True)
class VarParams:
    """Coefficient stack (A_1, ..., A_q) and innovation covariance of a VAR(q).

    Invariants enforced on construction: all lag matrices are p x p for a
    single p >= 1, the noise covariance is symmetric positive definite and
    the companion matrix has spectral radius strictly below one.
    """

    coeffs: tuple[np.ndarray, ...]
    noise_cov: np.ndarray

    def __post_init__(self) -> None:
        coeffs = tuple(np.array(a, dtype=float) for a in self.coeffs)
        if not coeffs:
            raise ParameterError("at least one lag matrix is required")
        p = coeffs[0].shape[0]
        for a in coeffs:
            if a.ndim != 2 or a.shape != (p, p):
                raise ParameterError("all lag matrices must be square with a common dimension")
        cov = np.array(self.noise_cov, dtype=float)
        if cov.shape != (p, p):
            raise ParameterError(f"noise covariance must be {p} x {p}")
        if not np.allclose(cov, cov.T, atol=1e-10):
            raise ParameterError("noise covariance must be symmetric")
        if np.min(np.linalg.eigvalsh(cov)) <= 0.0:
            raise ParameterError("noise covariance must be positive definite")
        rho = spectral_radius(coeffs)
        if rho >= 1.0:
            raise ParameterError(f"rejected parameters: companion spectral radius {rho:.4f} >= 1")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "noise_cov", cov)

    @property
    def p(self) -> int:
        return self.coeffs[0].shape[0]

    @property
    def q(self) -> int:
        return len(self.coeffs)

    @property
    def stacked(self) -> np.ndarray:
        """Coefficients as the p x pq matrix (A_1 ... A_q)."""
        return np.hstack(self.coeffs)

    @classmethod
    def from_stacked(cls, theta: np.ndarray, noise_cov: np.ndarray, q: int) -> "VarParams":
        theta = np.asarray(theta, dtype=float)
        p = theta.shape[0]
        if theta.shape != (p, p * q):
            raise ParameterError(f"stacked coefficients must be p x pq, got {theta.shape}")
        coeffs = tuple(theta[:, k * p : (k + 1) * p] for k in range(q))
        return cls(coeffs, noise_cov)


@dataclass(frozen=True)
class TimeSeriesPanel:
    """T x p observation matrix, optionally carrying ordered timestamps."""

    values: np.ndarray
    timestamps: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ParameterError("panel must be a T x p matrix with T, p >= 1")
        if not np.all(np.isfinite(values)):
            raise ParameterError("panel contains non-finite entries")
        object.__setattr__(self, "values", values)
        if self.timestamps is not None:
            ts = np.asarray(self.timestamps)
            if len(ts) != values.shape[0]:
                raise ParameterError("timestamps must match the number of rows")
            if len(ts) > 1 and not np.all(ts[1:] > ts[:-1]):
                raise ParameterError("timestamps must be strictly increasing")
            object.__setattr__(self, "timestamps", ts)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_series(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class AnomalyScenario:
    """A baseline law plus one coefficient excursion on a closed window.

    The coefficients equal ``base`` outside ``window`` and ``base + delta``
    on it. The window (eta_1, eta_2) must satisfy 0 < eta_1 < eta_2 < T,
    and both regimes must be stationary.
    """

    base: VarParams
    delta: np.ndarray
    window: tuple[int, int]
    horizon: int
    burn_in: int = 200

    def __post_init__(self) -> None:
        delta = np.array(self.delta, dtype=float)
        p, q = self.base.p, self.base.q
        if delta.shape != (p, p * q):
            raise ParameterError(f"delta must be p x pq = {p} x {p * q}, got {delta.shape}")
        object.__setattr__(self, "delta", delta)
        eta1, eta2 = self.window
        if not (0 < eta1 < eta2 < self.horizon):
            raise ParameterError(
                f"anomaly window must satisfy 0 < eta1 < eta2 < T, got ({eta1}, {eta2}) with T={self.horizon}"
            )
        if self.burn_in < 0:
            raise ParameterError("burn_in must be non-negative")
        # validates stationarity of the anomalous regime as a side effect
        object.__setattr__(self, "_anomalous", VarParams.from_stacked(
            self.base.stacked + delta, self.base.noise_cov, q))

    @property
    def anomalous(self) -> VarParams:
        return self._anomalous  # type: ignore[attr-defined]

    @property
    def is_null(self) -> bool:
        return not np.any(self.delta)


def _simulate(
    base: VarParams,
    episodes: Sequence[tuple[tuple[int, int], np.ndarray]],
    n_rows: int,
    burn_in: int,
    seed: int,
) -> TimeSeriesPanel:
    """Shared simulation kernel. Episode windows index the retained rows 1..T."""
    p, q = base.p, base.q
    stacks = [base.stacked]
    starts = np.full(n_rows + 1, 0, dtype=int)
    for (eta1, eta2), delta in episodes:
        stacks.append(base.stacked + np.asarray(delta, dtype=float))
        starts[eta1 : eta2 + 1] = len(stacks) - 1
    rng = np.random.default_rng(seed)
    chol = np.linalg.cholesky(base.noise_cov)
    state = np.zeros(p * q)  # (x_{t-1}, ..., x_{t-q}) flattened
    out = np.empty((n_rows, p))
    for t in range(-burn_in, n_rows):
        theta = stacks[starts[t + 1]] if t >= 0 else stacks[0]
        x = theta @ state + chol @ rng.standard_normal(p)
        state = x if q == 1 else np.concatenate([x, state[:-p]])
        if t >= 0:
            out[t] = x
    return TimeSeriesPanel(out)


def simulate(params: VarParams, n_rows: int, burn_in: int = 200, seed: int = 0) -> TimeSeriesPanel:
    """Draw a stationary panel of exactly ``n_rows`` rows from ``params``.

    The recursion x_t = sum_k A_k x_{t-k} + eps_t starts from the zero state
    and the first ``burn_in`` draws are discarded. Deterministic given seed.
    """
    if n_rows < 1:
        raise ParameterError("n_rows must be >= 1")
    if burn_in < 0:
        raise ParameterError("burn_in must be non-negative")
    return _simulate(params, [], n_rows, burn_in, seed)


def simulate_with_anomaly(scenario: AnomalyScenario, seed: int = 0) -> TimeSeriesPanel:
    """Simulate a panel whose coefficients switch to base + delta on the window."""
    return _simulate(
        scenario.base,
        [(scenario.window, scenario.delta)],
        scenario.horizon,
        scenario.burn_in,
        seed,
    )


def simulate_episodes(
    base: VarParams,
    episodes: Sequence[tuple[tuple[int, int], np.ndarray]],
    n_rows: int,
    burn_in: int = 200,
    seed: int = 0,
) -> TimeSeriesPanel:
    """Simulate a panel with several non-overlapping coefficient excursions.

    Each episode is a ((eta1, eta2), delta) pair; windows are closed and must
    be disjoint and strictly inside [1, n_rows - 1]. Every excursion must be
    stationary on its own.
    """
    occupied = np.zeros(n_rows + 2, dtype=bool)
    for (eta1, eta2), delta in episodes:
        if not (0 < eta1 < eta2 < n_rows):
            raise ParameterError(f"episode window ({eta1}, {eta2}) out of range for T={n_rows}")
        if occupied[eta1 : eta2 + 1].any():
            raise ParameterError("episode windows must be disjoint")
        occupied[eta1 : eta2 + 1] = True
        VarParams.from_stacked(base.stacked + np.asarray(delta, float), base.noise_cov, base.q)
    return _simulate(base, episodes, n_rows, burn_in, seed)


def lag_design(values: np.ndarray, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (Z, Y): lagged predictor rows and aligned responses.

    Row i of Z is (x_{t-1}', ..., x_{t-q}') and row i of Y is x_t' for
    t = q + 1 + i, so both have T - q rows.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if q < 0 or n <= q:
        raise DesignError(f"need more than q={q} rows, got {n}")
    if q == 0:
        return np.empty((n, 0)), values
    cols = [values[q - k : n - k] for k in range(1, q + 1)]
    return np.hstack(cols), values[q:]


@dataclass(frozen=True)
class RegressionView:
    """Baseline-adjusted regression of an interval J.

    ``residuals`` holds x_t' - (lag row) theta' for t in J as an |J| x p
    matrix; ``lagged`` holds the |J| x pq predictor rows. The implied full
    design is the block-diagonal Kronecker lift of ``lagged`` (one block per
    response coordinate) and is never materialised.
    """

    start: int
    end: int
    residuals: np.ndarray
    lagged: np.ndarray

    @property
    def n_times(self) -> int:
        return self.residuals.shape[0]

    @property
    def n_series(self) -> int:
        return self.residuals.shape[1]

    @property
    def response(self) -> np.ndarray:
        """The vectorised response, stacking the p coordinate columns."""
        return np.ravel(self.residuals, order="F")

    def full_design(self) -> np.ndarray:
        """Materialise the |J|p x p*pq block-diagonal design (tests only)."""
        return np.kron(np.eye(self.n_series), self.lagged)


def build_regression_view(
    panel: TimeSeriesPanel, baseline: np.ndarray, start: int, end: int, q: int
) -> RegressionView:
    """Build the anomaly regression for the interval [start, end].

    ``baseline`` is the p x pq coefficient matrix subtracted from the
    responses. The interval must lie within [q + 1, T] so that every row
    has q lags available.
    """
    values = panel.values
    n, p = values.shape
    baseline = np.asarray(baseline, dtype=float)
    if baseline.shape != (p, p * q):
        raise ParameterError(f"baseline must be p x pq = {p} x {p * q}, got {baseline.shape}")
    if start > end:
        raise ParameterError(f"empty interval [{start}, {end}]")
    if start < q + 1:
        raise DesignError(f"interval starts at {start} but rows before {q + 1} lack q={q} lags")
    if end > n:
        raise DesignError(f"interval ends at {end} beyond the panel length {n}")
    lagged = np.hstack([values[start - 1 - k : end - k] for k in range(1, q + 1)])
    residuals = values[start - 1 : end] - lagged @ baseline.T
    return RegressionView(start, end, residuals, lagged)


def generate_dense_stationary(p: int, seed: int = 0, radius: float = 0.7) -> VarParams:
    """A fully dense stationary VAR(1) with identity noise covariance.

    Entries are drawn i.i.d. uniform(-1, 1), exact zeros redrawn, and the
    matrix is rescaled so its spectral radius equals ``radius``.
    """
    if p < 1:
        raise ParameterError("p must be >= 1")
    if not 0 < radius < 1:
        raise ParameterError("target spectral radius must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1.0, 1.0, size=(p, p))
    while np.any(a == 0.0):
        zeros = a == 0.0
        a[zeros] = rng.uniform(-1.0, 1.0, size=int(zeros.sum()))
    rho = float(np.max(np.abs(np.linalg.eigvals(a))))
    if rho == 0.0:
        # possible only for p = 1 after sign cancellation, never in practice
        a = np.full((p, p), radius)
    else:
        a *= radius / rho
    return VarParams((a,), np.eye(p))


def generate_sparse_offdiag(p: int, value: float, q: int = 1) -> VarParams:
    """A VAR(q) whose first lag has ``value`` on the superdiagonal, zero elsewhere.

    The matrix is strictly upper triangular, hence nilpotent and stationary
    for any value; exactly p - 1 entries are nonzero.
    """
    if p < 1:
        raise ParameterError("p must be >= 1")
    a1 = np.zeros((p, p))
    idx = np.arange(p - 1)
    a1[idx, idx + 1] = value
    coeffs = (a1,) + tuple(np.zeros((p, p)) for _ in range(q - 1))
    return VarParams(coeffs, np.eye(p))
