"""Logistic-regression variant of the weighted frequency selector, plus SIS.

The logistic penalty level is the KKT threshold of

    sum_i [log(1 + e^eta_i) - y_i eta_i] + lambda2 |b|² + lam sum_j w_j |b_j|,

with an unpenalized intercept. Paths are computed on a descending grid by
warm-started proximal-Newton coordinate descent.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from scipy.special import expit, gammaln

from . import _kernels
from .core import CoefficientVector, Dataset, PenaltySpec, adaptive_weights
from .errors import (
    EmptyTable,
    InputError,
    NoConvergence,
    NumericalError,
    Separation,
    UnknownCriterion,
)
from .paths import SolutionPath, TransitionPoint, models_by_size
from .resampling import derive_seed, paired_bootstrap
from .selection import (
    CvConfig,
    DimensionTable,
    SelectionResult,
    _argmax_high,
    dimension_weights,
    kfold_indices,
)

logger = logging.getLogger(__name__)

SEPARATION_NORM = 1e3
FALLBACK_RIDGE = 1e-4
GLM_CRITERIA = ("bic", "ebic", "gic")


class GlmDataset(Dataset):
    """Dataset whose response is binary with both classes present."""

    def __post_init__(self):
        super().__post_init__()
        check_binary(self.y)


def check_binary(y):
    y = np.asarray(y)
    if not np.all((y == 0) | (y == 1)):
        raise InputError("response must be coded 0/1")
    if y.min() == y.max():
        raise InputError("response must contain both classes")


@dataclass(frozen=True)
class ScreenResult:
    kept: tuple
    scores: np.ndarray


def sis_screen(X, y, d_n: int) -> ScreenResult:
    """Keep the ``d_n`` columns with the largest absolute marginal correlation.

    Zero-variance columns score 0. Ties keep the lower column index first.
    """
    if d_n < 1:
        raise InputError("d_n must be >= 1")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    sx = np.sqrt(np.einsum("ij,ij->j", Xc, Xc))
    sy = math.sqrt(float(yc @ yc))
    scores = np.zeros(X.shape[1])
    ok = sx > 0
    if (~ok).any():
        logger.info("%d constant column(s) score 0 in screening", int((~ok).sum()))
    if sy > 0:
        scores[ok] = np.abs(Xc[:, ok].T @ yc) / (sx[ok] * sy)
    order = np.argsort(-scores, kind="stable")
    kept = tuple(int(j) for j in order[: min(d_n, X.shape[1])])
    return ScreenResult(kept, scores)


def default_dn(n: int) -> int:
    return max(1, int(math.floor(n / math.log(n))))


# ----------------------------------------------------------------------------
# unpenalized / ridge logistic fits


def _newton_logistic(X, y, lambda2, tol, max_iter, guard):
    n, p = X.shape
    Z = np.column_stack([np.ones(n), X])
    pen = np.full(p + 1, 2.0 * lambda2)
    pen[0] = 0.0
    ybar = float(y.mean())
    theta = np.zeros(p + 1)
    theta[0] = math.log(ybar / (1 - ybar))

    def objective(t):
        eta = Z @ t
        return float(np.sum(np.logaddexp(0.0, eta) - y * eta) + 0.5 * np.sum(pen * t * t))

    f = objective(theta)
    for _ in range(max_iter):
        mu = expit(Z @ theta)
        grad = Z.T @ (y - mu) - pen * theta
        W = mu * (1 - mu)
        H = (Z * W[:, None]).T @ Z + np.diag(pen)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        # on separable data the gradient vanishes while Newton steps stay O(1)
        if np.max(np.abs(grad)) < tol and np.max(np.abs(step)) < 1e-6 * (1 + np.max(np.abs(theta))):
            return theta
        t = 1.0
        while True:
            cand = theta + t * step
            fc = objective(cand)
            if fc <= f + 1e-12 * (1 + abs(f)) or t < 1e-10:
                break
            t *= 0.5
        theta, f = cand, fc
        if guard and np.linalg.norm(theta[1:]) > SEPARATION_NORM:
            raise Separation("logistic coefficients diverge; data look separable")
    mu = expit(Z @ theta)
    grad = Z.T @ (y - mu) - pen * theta
    if guard:
        raise Separation("logistic Newton iterations did not settle; data look separable")
    if np.max(np.abs(grad)) >= tol:
        raise NoConvergence(f"logistic fit stopped with gradient {np.max(np.abs(grad)):.3g}")
    return theta


def logistic_mle(data: Dataset, tol: float = 1e-8, max_iter: int = 200) -> CoefficientVector:
    """Maximum-likelihood logistic fit with intercept (damped Newton).

    Raises
    ------
    Separation
        When the slope norm exceeds 1e3 during the iterations.
    """
    check_binary(data.y)
    if data.n <= data.p:
        raise InputError("logistic MLE needs n > p")
    theta = _newton_logistic(data.X, data.y, 0.0, tol, max_iter, guard=True)
    return CoefficientVector(theta[1:], theta[0])


def logistic_ridge(data: Dataset, lambda2: float = FALLBACK_RIDGE, tol: float = 1e-8,
                   max_iter: int = 500) -> CoefficientVector:
    """Ridge-stabilized logistic fit; finite even for separable data."""
    check_binary(data.y)
    theta = _newton_logistic(data.X, data.y, lambda2, tol, max_iter, guard=False)
    return CoefficientVector(theta[1:], theta[0])


def stable_logistic_fit(data: Dataset) -> CoefficientVector:
    """MLE, or the ridge-stabilized fit when the MLE is not available."""
    if data.n <= data.p:
        return logistic_ridge(data, FALLBACK_RIDGE)
    try:
        return logistic_mle(data)
    except Separation:
        logger.info("separation detected; using ridge-stabilized logistic fit")
        return logistic_ridge(data, FALLBACK_RIDGE)


def predict_proba(coef: CoefficientVector, X) -> np.ndarray:
    return expit(coef.predict(X))


def classify(probabilities, threshold: float = 0.5) -> np.ndarray:
    """Elementwise ``1`` where ``probability > threshold`` (strict)."""
    if not 0.0 < threshold < 1.0:
        raise InputError("threshold must lie in (0, 1)")
    return (np.asarray(probabilities, dtype=float) > threshold).astype(int)


# ----------------------------------------------------------------------------
# penalized path


def logistic_lambda_max(data: Dataset, weights) -> float:
    w = np.asarray(weights, dtype=float)
    return float(np.max(np.abs(data.X.T @ (data.y - data.y.mean())) / w))


def lambda_grid(lam_max: float, n_lambda: int = 100, ratio: float = 1e-4) -> np.ndarray:
    return np.geomspace(lam_max, ratio * lam_max, n_lambda)


def logistic_fit_at(data: Dataset, weights, lam: float, lambda2: float = 0.0, tol: float = 1e-8,
                    init: CoefficientVector | None = None, max_newton: int = 200) -> CoefficientVector:
    """Penalized logistic solution at one level."""
    X = np.ascontiguousarray(data.X)
    y = np.ascontiguousarray(data.y, dtype=float)
    w = np.ascontiguousarray(weights, dtype=float)
    if init is None:
        ybar = float(y.mean())
        b0, beta = math.log(ybar / (1 - ybar)), np.zeros(data.p)
    else:
        b0, beta = init.intercept, init.values.copy()
    b0, it, kkt = _kernels.logistic_fit(X, y, b0, beta, lam, w, lambda2, tol, max_newton, 1000)
    if kkt > tol:
        raise NoConvergence(f"penalized logistic fit stopped at KKT residual {kkt:.3g} (level {lam:.4g})")
    return CoefficientVector(beta, b0)


def logistic_adaptive_lasso_path(data: Dataset, weights, lam_grid=None, lambda2: float = 0.0,
                                 n_lambda: int = 100, ratio: float = 1e-4, tol: float = 1e-8) -> SolutionPath:
    """Warm-started penalized logistic path on a descending grid.

    The first point is the solution at the top of the grid (all-zero slopes
    when the grid starts at :func:`logistic_lambda_max`). Each later point
    is the last grid solution of a run of constant support, i.e. the best
    fitting member of that run.
    """
    check_binary(data.y)
    w = np.asarray(weights, dtype=float)
    if w.shape != (data.p,) or np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise InputError("weights must be positive, finite, one per column")
    if lam_grid is None:
        lam_grid = lambda_grid(logistic_lambda_max(data, w), n_lambda, ratio)
    grid = np.asarray(lam_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1 or np.any(grid <= 0) or np.any(np.diff(grid) >= 0):
        raise InputError("lambda grid must be positive and strictly descending")
    sols = []
    coef = None
    for lam in grid:
        coef = logistic_fit_at(data, w, float(lam), lambda2, tol, coef)
        sols.append(coef)
    supports = [s.support for s in sols]
    keep = [0]
    for i in range(1, len(sols)):
        last = i == len(sols) - 1
        if supports[i] == supports[0] and keep == [0]:
            continue
        if last or supports[i + 1] != supports[i]:
            keep.append(i)
    points = tuple(TransitionPoint(step, float(grid[i]), supports[i], sols[i]) for step, i in enumerate(keep))
    scheme = PenaltySpec("adaptive-enet" if lambda2 > 0 else "adaptive-lasso", lambda2=lambda2)
    return SolutionPath(points, scheme, len(grid), w, 1.0)


def bernoulli_deviance(y, prob) -> float:
    prob = np.clip(prob, 1e-15, 1 - 1e-15)
    return float(-2.0 * np.sum(y * np.log(prob) + (1 - y) * np.log(1 - prob)))


# ----------------------------------------------------------------------------
# cross-validation and selection


def glm_mcv(data: Dataset, model, K: int = 10, loss: str = "deviance", seed: int = 0) -> float:
    """K-fold CV loss of an unpenalized logistic refit on ``model``'s columns.

    ``loss="deviance"`` returns total held-out deviance divided by ``n``;
    ``loss="misclass"`` the held-out error rate of ``I(p > 0.5)``. An empty
    model is the intercept-only fit.
    """
    if loss not in ("deviance", "misclass"):
        raise UnknownCriterion(f"unknown loss {loss!r}")
    check_binary(data.y)
    model = list(model)
    total = 0.0
    for test in kfold_indices(data.n, K, seed):
        train = np.setdiff1d(np.arange(data.n), test, assume_unique=True)
        ytr = data.y[train]
        if ytr.min() == ytr.max():
            # one-class training part: the only sensible fit is a constant
            prob_const = np.clip(ytr.mean(), 1e-15, 1 - 1e-15)
            prob = np.full(test.size, prob_const)
        elif not model:
            prob = np.full(test.size, ytr.mean())
        else:
            sub = Dataset(data.X[np.ix_(train, model)], ytr)
            coef = stable_logistic_fit(sub)
            prob = predict_proba(coef, data.X[np.ix_(test, model)])
        if loss == "deviance":
            total += bernoulli_deviance(data.y[test], prob)
        else:
            total += float(np.sum(classify(prob) != data.y[test]))
    return total / data.n


def _glm_replicate(data, gamma, master_seed, b, n_lambda, ratio, lambda2):
    seed = derive_seed(master_seed, 0, b + 1)
    boot = paired_bootstrap(data, seed)
    check_binary(boot.y)
    pilot = stable_logistic_fit(boot)
    w = adaptive_weights(pilot, gamma)
    path = logistic_adaptive_lasso_path(boot, w, lambda2=lambda2, n_lambda=n_lambda, ratio=ratio)
    return models_by_size(path)


def _glm_chunk(data, reps, gamma, master_seed, n_lambda, ratio, lambda2):
    table = DimensionTable(len(reps), data.p)
    for b in reps:
        try:
            table.add(_glm_replicate(data, gamma, master_seed, b, n_lambda, ratio, lambda2))
        except (NumericalError, InputError) as exc:
            logger.warning("bootstrap replicate %d dropped: %s", b, exc)
    return table


def glm_mf_table(data: Dataset, B: int = 100, master_seed: int = 0, gamma: float = 1.0, n_lambda: int = 100,
                 ratio: float = 1e-4, lambda2: float = 0.0, n_jobs: int = 1) -> DimensionTable:
    """Logistic analogue of :func:`wmfselect.selection.mf_table` (paired bootstrap)."""
    if B < 1:
        raise InputError("B must be >= 1")
    reps = list(range(B))
    if n_jobs == 1:
        table = _glm_chunk(data, reps, gamma, master_seed, n_lambda, ratio, lambda2)
    else:
        chunks = [c for c in np.array_split(reps, max(1, min(B, 4 * abs(n_jobs)))) if len(c)]
        parts = Parallel(n_jobs=n_jobs)(
            delayed(_glm_chunk)(data, [int(b) for b in c], gamma, master_seed, n_lambda, ratio, lambda2)
            for c in chunks
        )
        table = parts[0]
        for part in parts[1:]:
            table = table.merge(part)
    table.B = B
    return table


def glm_wmf_select(data: Dataset, B: int = 100, cfg: CvConfig = CvConfig(), master_seed: int = 0,
                   gamma: float = 1.0, loss: str = "deviance", n_lambda: int = 100, ratio: float = 1e-4,
                   lambda2: float = 0.0, n_jobs: int = 1) -> SelectionResult:
    """Weighted maximum-frequency selection for logistic regression.

    Uses paired bootstrap and the logistic adaptive-LASSO path. The softmax
    temperature is ``c`` times the full-model CV mean deviance (or
    ``cfg.sigma2`` when given).
    """
    check_binary(data.y)
    table = glm_mf_table(data, B, master_seed, gamma, n_lambda, ratio, lambda2, n_jobs)
    if table.empty:
        raise EmptyTable("dimension table has no models")
    cv_seed = derive_seed(master_seed, 1, 0)
    upper = max(1, data.p - 1)
    dims = np.arange(1, upper + 1)
    mf = table.mf_vector()[:upper]
    T = np.full(upper, np.inf)
    for j in dims:
        model = table.model(int(j))
        if model is not None:
            T[j - 1] = glm_mcv(data, model, cfg.K, loss, cv_seed)
    scale = glm_mcv(data, range(data.p), cfg.K, loss, cv_seed)
    if not scale > 0:
        scale = float(np.nanmin(T[np.isfinite(T)])) if np.isfinite(T).any() else 1.0
        scale = max(scale, 1e-12)
    weights = dimension_weights(T, cfg, scale=scale)
    wmf = weights * mf
    if not np.any(wmf > 0):
        raise EmptyTable("no selectable size has positive weighted frequency")
    j = _argmax_high(wmf) + 1
    diag = {"dims": dims, "mf_freq": mf / table.B, "mcv": T, "weight": weights, "wmf": wmf / table.B,
            "scale": scale}
    return SelectionResult(int(j), table.model(int(j)), "wmf", diag, table)


def glm_path(data: Dataset, gamma: float = 1.0, n_lambda: int = 100, ratio: float = 1e-4,
             lambda2: float = 0.0) -> SolutionPath:
    """Adaptive logistic path on the original data with MLE-based weights."""
    pilot = stable_logistic_fit(data)
    w = adaptive_weights(pilot, gamma)
    return logistic_adaptive_lasso_path(data, w, lambda2=lambda2, n_lambda=n_lambda, ratio=ratio)


def glm_criterion_select(data: Dataset, path: SolutionPath, criterion: str, xi: float = 0.5) -> SelectionResult:
    """Deviance-based BIC / EBIC / GIC minimized over transition points."""
    if criterion not in GLM_CRITERIA:
        raise UnknownCriterion(f"unknown GLM criterion {criterion!r}; expected one of {GLM_CRITERIA}")
    n, p = data.X.shape
    k = path.sizes.astype(float)
    dev = np.array([bernoulli_deviance(data.y, predict_proba(pt.coefficients, data.X)) for pt in path.points])
    if criterion == "bic":
        scores = dev + k * math.log(n)
    elif criterion == "ebic":
        scores = dev + k * math.log(n) + 2 * xi * (gammaln(p + 1) - gammaln(k + 1) - gammaln(p - k + 1))
    else:
        scores = dev + k * math.log(math.log(n)) * math.log(p)
    idx = int(np.argmin(scores))
    pt = path.points[idx]
    diag = {"step": np.arange(len(path.points)), "size": path.sizes, "lambda": path.lambdas, "score": scores}
    return SelectionResult(pt.size, pt.active_set, criterion, diag, lam=pt.lam)
