"""Core data containers and the least-squares / ridge pilot estimators.

All fits center ``y`` and the columns of ``X`` when ``fit_intercept`` is
true and report the intercept separately, so the slope vector is always the
solution of the intercept-free problem on centered data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NonFiniteInput, SingularDesign

logger = logging.getLogger(__name__)

# XᵀX condition numbers above this are treated as singular by ols_fit.
COND_SINGULAR = 1e12
# Pilot selection uses OLS only below this condition number.
COND_PILOT = 1e8
WEIGHT_FLOOR = 1e-8
DEFAULT_RIDGE_GRID = tuple(10.0**k for k in range(-3, 4))

SCHEMES = ("adaptive-lasso", "adaptive-enet", "lasso", "enet")
_SCHEME_ALIASES = {"alasso": "adaptive-lasso", "aenet": "adaptive-enet"}


@dataclass(frozen=True)
class Dataset:
    """Design matrix, response and (for simulated data) the true support.

    ``truth`` holds 0-based column indices. ``names`` are optional column
    labels carried through to reports.
    """

    X: np.ndarray
    y: np.ndarray
    truth: frozenset | None = None
    names: tuple | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim != 2:
            raise InputError(f"X must be 2-d, got shape {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise InputError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise InputError("empty design matrix")
        if not np.all(np.isfinite(X)):
            raise NonFiniteInput("X contains non-finite entries")
        if not np.all(np.isfinite(y)):
            raise NonFiniteInput("y contains non-finite entries")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.truth is not None:
            truth = frozenset(int(j) for j in self.truth)
            if any(j < 0 or j >= X.shape[1] for j in truth):
                raise InputError(f"truth {sorted(truth)} not a subset of columns 0..{X.shape[1] - 1}")
            object.__setattr__(self, "truth", truth)
        if self.names is not None:
            names = tuple(str(s) for s in self.names)
            if len(names) != X.shape[1]:
                raise InputError("names must have one entry per column")
            object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset_rows(self, rows) -> "Dataset":
        return Dataset(self.X[rows], self.y[rows], self.truth, self.names)

    def subset_columns(self, cols) -> "Dataset":
        cols = list(cols)
        truth = None
        if self.truth is not None:
            pos = {c: i for i, c in enumerate(cols)}
            truth = frozenset(pos[j] for j in self.truth if j in pos)
        names = None if self.names is None else tuple(self.names[c] for c in cols)
        return Dataset(self.X[:, cols], self.y, truth, names)


@dataclass(frozen=True)
class CoefficientVector:
    values: np.ndarray
    intercept: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(values)):
            raise NonFiniteInput("coefficients must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "intercept", float(self.intercept))

    @property
    def support(self) -> tuple:
        return tuple(int(j) for j in np.flatnonzero(self.values))

    def predict(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.values + self.intercept


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty family plus its fixed hyper-parameters.

    ``lambda2`` is the ridge level; it is forced to zero for the pure L1
    schemes. The running L1 level lives on the solution path.
    """

    scheme: str = "adaptive-lasso"
    gamma: float = 1.0
    lambda2: float = 0.0

    def __post_init__(self):
        scheme = _SCHEME_ALIASES.get(self.scheme, self.scheme)
        if scheme not in SCHEMES:
            raise InputError(f"unknown penalty scheme {self.scheme!r}")
        if self.gamma < 0:
            raise InputError("gamma must be >= 0")
        if self.lambda2 < 0:
            raise InputError("lambda2 must be >= 0")
        object.__setattr__(self, "scheme", scheme)
        if scheme in ("lasso", "adaptive-lasso"):
            object.__setattr__(self, "lambda2", 0.0)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "lambda2", float(self.lambda2))

    @property
    def adaptive(self) -> bool:
        return self.scheme.startswith("adaptive")


def center(X, y, fit_intercept=True):
    """Return ``(Xc, yc, x_mean, y_mean)``; means are zero when not centering."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not fit_intercept:
        return X, y, np.zeros(X.shape[1]), 0.0
    xm = X.mean(axis=0)
    ym = float(y.mean())
    return X - xm, y - ym, xm, ym


def _with_intercept(beta, xm, ym, fit_intercept) -> CoefficientVector:
    b0 = ym - float(xm @ beta) if fit_intercept else 0.0
    return CoefficientVector(beta, b0)


def ols_fit(data: Dataset, fit_intercept: bool = True) -> CoefficientVector:
    """Ordinary least squares.

    Raises
    ------
    SingularDesign
        If there are not more rows than parameters or the centered Gram
        matrix has condition number above ``COND_SINGULAR``.
    """
    n, p = data.X.shape
    # a square full-rank design without intercept is an exact, valid fit
    if n < p + int(fit_intercept):
        raise SingularDesign(f"OLS needs at least as many rows as parameters (n={n}, p={p})")
    Xc, yc, xm, ym = center(data.X, data.y, fit_intercept)
    s = np.linalg.svd(Xc, compute_uv=False)
    if s[-1] == 0 or (s[0] / s[-1]) ** 2 > COND_SINGULAR:
        raise SingularDesign("XᵀX is numerically singular")
    beta, *_ = np.linalg.lstsq(Xc, yc, rcond=None)
    return _with_intercept(beta, xm, ym, fit_intercept)


def _ridge_svd(Xc, yc, lambda2):
    U, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    uty = U.T @ yc
    shrink = s / (s**2 + lambda2)
    beta = Vt.T @ (shrink * uty)
    df = float(np.sum(s**2 / (s**2 + lambda2)))
    return beta, df


def ridge_fit(data: Dataset, lambda2: float, fit_intercept: bool = True) -> CoefficientVector:
    """Minimize ``||y - Xb||² + lambda2 ||b||²`` (intercept unpenalized)."""
    if lambda2 < 0:
        raise InputError("lambda2 must be >= 0")
    if lambda2 == 0:
        return ols_fit(data, fit_intercept)
    Xc, yc, xm, ym = center(data.X, data.y, fit_intercept)
    beta, _ = _ridge_svd(Xc, yc, lambda2)
    return _with_intercept(beta, xm, ym, fit_intercept)


def ridge_bic(data: Dataset, lambda2: float, fit_intercept: bool = True) -> tuple:
    """BIC ``n log(SSE/n) + df log n`` of a ridge fit; returns ``(bic, df, fit)``.

    ``df`` is the trace of the ridge hat matrix; the intercept is common to
    all candidates and not counted.
    """
    n = data.n
    Xc, yc, xm, ym = center(data.X, data.y, fit_intercept)
    if lambda2 == 0:
        fit = ols_fit(data, fit_intercept)
        df = float(data.p)
        beta = fit.values
    else:
        beta, df = _ridge_svd(Xc, yc, lambda2)
        fit = _with_intercept(beta, xm, ym, fit_intercept)
    sse = float(np.sum((yc - Xc @ beta) ** 2))
    sse = max(sse, 1e-300, 1e-30 * float(yc @ yc))
    return n * np.log(sse / n) + df * np.log(n), df, fit


def ridge_tune_bic(data: Dataset, grid=DEFAULT_RIDGE_GRID, fit_intercept: bool = True):
    """Pick the ridge level on ``grid`` minimizing BIC.

    Candidates whose effective degrees of freedom leave fewer than one
    residual degree of freedom are skipped. Ties go to the larger level.

    Returns
    -------
    (CoefficientVector, float)
        The fit and the chosen ``lambda2``.
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise InputError("ridge grid is empty")
    if any(g < 0 for g in grid):
        raise InputError("ridge grid entries must be >= 0")
    best = None
    for lam in sorted(set(grid), reverse=True):
        try:
            bic, df, fit = ridge_bic(data, lam, fit_intercept)
        except SingularDesign:
            continue
        if data.n - df - int(fit_intercept) < 1:
            continue
        if best is None or bic < best[0]:
            best = (bic, lam, fit)
    if best is None:
        raise SingularDesign("no ridge grid value produced a usable fit")
    return best[2], best[1]


def adaptive_weights(pilot, gamma: float = 1.0, floor: float = WEIGHT_FLOOR) -> np.ndarray:
    """Weights ``|b_j|^-gamma`` with ``|b_j|`` clamped below at ``floor``."""
    if gamma < 0:
        raise InputError("gamma must be >= 0")
    values = pilot.values if isinstance(pilot, CoefficientVector) else np.asarray(pilot, float)
    mag = np.maximum(np.abs(values), floor)
    return mag ** (-float(gamma))


def pilot_estimate(data: Dataset, grid=DEFAULT_RIDGE_GRID, fit_intercept: bool = True) -> CoefficientVector:
    """OLS when the design is tall and well conditioned, else BIC-tuned ridge."""
    n, p = data.X.shape
    if n > 1.5 * p:
        Xc, _, _, _ = center(data.X, data.y, fit_intercept)
        s = np.linalg.svd(Xc, compute_uv=False)
        if s[-1] > 0 and (s[0] / s[-1]) ** 2 < COND_PILOT:
            return ols_fit(data, fit_intercept)
    fit, lam = ridge_tune_bic(data, grid, fit_intercept)
    logger.debug("pilot: ridge with lambda2=%g", lam)
    return fit
