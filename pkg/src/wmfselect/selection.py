"""Maximum-frequency model selection and its prediction-weighted variant.

For each of ``B`` bootstrap samples a full (adaptive) path is computed and,
for every model size ``j``, the last model of that size on the path is
recorded. ``MF_j`` is the count of the most frequent size-``j`` model. The
weighted score multiplies ``MF_j`` by a softmax over sizes of the negative
K-fold prediction error of that model, so underfit sizes are penalized.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.special import gammaln

from .core import (
    COND_SINGULAR,
    DEFAULT_RIDGE_GRID,
    Dataset,
    PenaltySpec,
    adaptive_weights,
    center,
    pilot_estimate,
    ridge_tune_bic,
)
from .errors import (
    EmptyTable,
    FoldTooSmall,
    InputError,
    NonPositiveSigma,
    NumericalError,
    UnknownCriterion,
)
from .paths import SolutionPath, coefficients_at, fit_path, models_by_size
from .resampling import (
    BootstrapScheme,
    derive_seed,
    paired_bootstrap,
    residual_bootstrap,
    residual_pilot,
)

logger = logging.getLogger(__name__)

SIGMA2_FLOOR = 1e-12
CRITERIA = ("bic", "ebic", "gic", "cp", "cv-min", "cv-1se")
# seed streams under one master seed
_STREAM_BOOT = 0
_STREAM_CV = 1


@dataclass(frozen=True)
class CvConfig:
    K: int = 10
    c: float = 1.0
    sigma2: float | None = None

    def __post_init__(self):
        if self.K < 2:
            raise InputError("K must be >= 2")
        if not 1.0 <= self.c <= 2.0:
            raise InputError("c must lie in [1, 2]")
        if self.sigma2 is not None and self.sigma2 <= 0:
            raise NonPositiveSigma("sigma2 override must be positive")


@dataclass
class DimensionTable:
    """Per-size model counts over ``B`` bootstrap paths.

    ``counts[j]`` maps a size-``j`` model (sorted tuple of 0-based columns)
    to the number of replicates whose path ended size ``j`` on that model.
    Among equally frequent models the lexicographically smallest one is the
    representative, which keeps merging order-independent.
    """

    B: int
    p: int
    counts: dict = field(default_factory=dict)

    def add(self, models: dict):
        for j, model in models.items():
            self.counts.setdefault(j, Counter())[tuple(sorted(model))] += 1

    def merge(self, other: "DimensionTable") -> "DimensionTable":
        if other.p != self.p:
            raise InputError("cannot merge tables of different width")
        out = DimensionTable(self.B + other.B, self.p)
        for src in (self, other):
            for j, cnt in src.counts.items():
                out.counts.setdefault(j, Counter()).update(cnt)
        return out

    def mf(self, j: int) -> int:
        cnt = self.counts.get(j)
        return max(cnt.values()) if cnt else 0

    def model(self, j: int):
        cnt = self.counts.get(j)
        if not cnt:
            return None
        top = max(cnt.values())
        return min(m for m, c in cnt.items() if c == top)

    def mf_vector(self) -> np.ndarray:
        """``MF_j`` for ``j = 1..p`` (index 0 is size 1)."""
        return np.array([self.mf(j) for j in range(1, self.p + 1)], dtype=float)

    @property
    def empty(self) -> bool:
        return not any(self.counts.values())


@dataclass
class SelectionResult:
    dimension: int
    model: tuple
    method: str
    diagnostics: dict = field(default_factory=dict)
    table: DimensionTable | None = None
    lam: float | None = None


# ----------------------------------------------------------------------------
# bootstrap frequency table


def path_weights(data: Dataset, penalty: PenaltySpec, fit_intercept=True, ridge_grid=DEFAULT_RIDGE_GRID):
    if not penalty.adaptive:
        return np.ones(data.p)
    pilot = pilot_estimate(data, ridge_grid, fit_intercept)
    return adaptive_weights(pilot, penalty.gamma)


def full_path(data: Dataset, penalty: PenaltySpec, max_steps=None, fit_intercept=True,
              ridge_grid=DEFAULT_RIDGE_GRID) -> SolutionPath:
    """Path on the original data with weights from the default pilot."""
    w = path_weights(data, penalty, fit_intercept, ridge_grid)
    return fit_path(data, penalty, w, max_steps, fit_intercept)


def _replicate_models(data, penalty, scheme, master_seed, b, max_steps, pilot, fit_intercept):
    seed = derive_seed(master_seed, _STREAM_BOOT, b + 1)
    if scheme.kind == "paired":
        boot = paired_bootstrap(data, seed)
    else:
        boot = residual_bootstrap(data, pilot, seed)
    path = full_path(boot, penalty, max_steps, fit_intercept, scheme.pilot_lambda2_grid)
    return models_by_size(path)


def _table_chunk(data, penalty, scheme, master_seed, reps, max_steps, pilot, fit_intercept):
    table = DimensionTable(len(reps), data.p)
    for b in reps:
        try:
            table.add(_replicate_models(data, penalty, scheme, master_seed, b, max_steps, pilot, fit_intercept))
        except NumericalError as exc:
            logger.warning("bootstrap replicate %d dropped: %s", b, exc)
    return table


def mf_table(data: Dataset, penalty: PenaltySpec, scheme: BootstrapScheme, B: int = 100,
             master_seed: int = 0, max_steps=None, fit_intercept=True, n_jobs=1) -> DimensionTable:
    """Tally the last model of every size over ``B`` bootstrap paths.

    Adaptive weights are recomputed on each bootstrap sample. Replicate ``b``
    draws from ``derive_seed(master_seed, 0, b + 1)``, so the table does not
    depend on ``n_jobs``. A replicate whose path fails is logged and skipped;
    ``B`` stays the denominator.
    """
    if B < 1:
        raise InputError("B must be >= 1")
    pilot = residual_pilot(data, scheme, fit_intercept) if scheme.kind == "residual" else None
    reps = list(range(B))
    if n_jobs == 1:
        table = _table_chunk(data, penalty, scheme, master_seed, reps, max_steps, pilot, fit_intercept)
    else:
        chunks = [c for c in np.array_split(reps, max(1, min(B, 4 * abs(n_jobs)))) if len(c)]
        parts = Parallel(n_jobs=n_jobs)(
            delayed(_table_chunk)(data, penalty, scheme, master_seed, [int(b) for b in c], max_steps, pilot,
                                  fit_intercept)
            for c in chunks
        )
        table = parts[0]
        for part in parts[1:]:
            table = table.merge(part)
    table.B = B
    return table


def _argmax_high(scores) -> int:
    """Index of the maximum, preferring the highest index among ties."""
    scores = np.asarray(scores, dtype=float)
    top = np.max(scores)
    return int(np.flatnonzero(scores == top)[-1])


def mf_select(table: DimensionTable) -> SelectionResult:
    """Pick the size with the largest ``MF_j`` over ``j = 1..p-1``.

    The full model is never eligible; ties go to the highest size.
    """
    if table.empty:
        raise EmptyTable("dimension table has no models")
    upper = max(1, table.p - 1)
    mf = table.mf_vector()[:upper]
    if not np.any(mf > 0):
        raise EmptyTable("no bootstrap path visited a selectable size")
    j = _argmax_high(mf) + 1
    diag = {"dims": np.arange(1, upper + 1), "mf_freq": mf / table.B}
    return SelectionResult(j, table.model(j), "mf", diag, table)


# ----------------------------------------------------------------------------
# multi-fold cross-validation and the dimension weight


def kfold_indices(n: int, K: int, seed: int) -> list:
    """Random partition of ``range(n)`` into ``K`` near-equal folds."""
    if not 2 <= K <= n:
        raise InputError(f"need 2 <= K <= n, got K={K}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, K)]


def _ols_restricted(X, y, fit_intercept):
    Xc, yc, xm, ym = center(X, y, fit_intercept)
    beta, *_ = np.linalg.lstsq(Xc, yc, rcond=None)
    b0 = ym - float(xm @ beta) if fit_intercept else 0.0
    return beta, b0


def mcv_error(data: Dataset, model, K: int = 10, seed: int = 0, fit_intercept=True, refit="ols",
              penalty: PenaltySpec | None = None, weights=None, lam=None) -> float:
    """K-fold mean squared prediction error of ``model``.

    The model is refit on each training part by least squares on its own
    columns (``refit="ols"``), or, with ``refit="penalized"``, by the
    penalized path restricted to those columns evaluated at level ``lam``.

    Raises
    ------
    FoldTooSmall
        If a training part has fewer than ``len(model) + 1`` rows.
    """
    model = list(model)
    if not model:
        raise InputError("model must be nonempty")
    folds = kfold_indices(data.n, K, seed)
    sq = 0.0
    for test in folds:
        train = np.setdiff1d(np.arange(data.n), test, assume_unique=True)
        if train.size < len(model) + 1:
            raise FoldTooSmall(f"training part of {train.size} rows cannot fit {len(model)} columns")
        Xtr = data.X[np.ix_(train, model)]
        ytr = data.y[train]
        if refit == "ols":
            beta, b0 = _ols_restricted(Xtr, ytr, fit_intercept)
        elif refit == "penalized":
            w = np.ones(len(model)) if weights is None else np.asarray(weights, float)[model]
            sub = Dataset(Xtr, ytr)
            path = fit_path(sub, penalty or PenaltySpec(), w, max_steps=len(model) + 5, fit_intercept=fit_intercept)
            coef = coefficients_at(path, 0.0 if lam is None else lam)
            beta, b0 = coef.values, coef.intercept
        else:
            raise InputError(f"unknown refit {refit!r}")
        pred = data.X[np.ix_(test, model)] @ beta + b0
        sq += float(np.sum((data.y[test] - pred) ** 2))
    return sq / data.n


def sigma2_estimate(data: Dataset, fit_intercept=True) -> float:
    """Residual variance of the full model.

    Uses ``SSE / (n - p - 1)`` from OLS when the design is tall and well
    conditioned, else a BIC-tuned ridge fit with effective degrees of freedom.
    Exact fits are floored at ``SIGMA2_FLOOR``.
    """
    n, p = data.X.shape
    if n < 3:
        raise InputError("need n >= 3 to estimate sigma2")
    Xc, yc, _, _ = center(data.X, data.y, fit_intercept)
    dof_int = int(fit_intercept)
    s = np.linalg.svd(Xc, compute_uv=False)
    if n > p + dof_int + 1 and s[-1] > 0 and (s[0] / s[-1]) ** 2 < COND_SINGULAR:
        beta, *_ = np.linalg.lstsq(Xc, yc, rcond=None)
        sse = float(np.sum((yc - Xc @ beta) ** 2))
        s2 = sse / (n - p - dof_int)
    else:
        fit, lam = ridge_tune_bic(data, DEFAULT_RIDGE_GRID, fit_intercept)
        df = float(np.sum(s**2 / (s**2 + lam))) if lam > 0 else float(p)
        sse = float(np.sum((data.y - fit.predict(data.X)) ** 2))
        s2 = sse / max(n - df - dof_int, 1.0)
    if s2 < SIGMA2_FLOOR:
        logger.warning("sigma2 estimate %.3g is at the noiseless floor", s2)
        s2 = SIGMA2_FLOOR
    return s2


def dimension_weights(errors, cfg: CvConfig, data: Dataset | None = None, scale: float | None = None) -> np.ndarray:
    """Softmax of ``-T_j / (c * sigma2)`` over the supplied sizes.

    ``sigma2`` is, in order of precedence, ``cfg.sigma2``, ``scale``, or
    :func:`sigma2_estimate` on ``data``. Infinite errors (sizes never visited
    or not refittable) get weight zero.
    """
    T = np.asarray(errors, dtype=float)
    if np.any(np.isnan(T)) or np.any(T == -np.inf):
        raise InputError("prediction errors must be finite or +inf")
    if cfg.sigma2 is not None:
        s2 = cfg.sigma2
    elif scale is not None:
        s2 = float(scale)
    elif data is not None:
        s2 = sigma2_estimate(data)
    else:
        raise InputError("need cfg.sigma2, scale or data to set the temperature")
    if not s2 > 0:
        raise NonPositiveSigma(f"temperature must be positive, got {s2}")
    finite = np.isfinite(T)
    if not finite.any():
        raise InputError("no finite prediction error")
    z = np.full(T.shape, -np.inf)
    z[finite] = -T[finite] / (cfg.c * s2)
    z -= z[finite].max()
    w = np.exp(z)
    return w / w.sum()


# ----------------------------------------------------------------------------
# weighted maximum frequency


def wmf_from_table(data: Dataset, table: DimensionTable, cfg: CvConfig, cv_seed: int, fit_intercept=True,
                   refit="ols", penalty=None, ref_path: SolutionPath | None = None) -> SelectionResult:
    """Weight an existing table by K-fold prediction error and select."""
    if table.empty:
        raise EmptyTable("dimension table has no models")
    upper = max(1, data.p - 1)
    dims = np.arange(1, upper + 1)
    mf = table.mf_vector()[:upper]
    T = np.full(upper, np.inf)
    lam_by_size = {}
    if refit == "penalized" and ref_path is not None:
        for pt in ref_path.points:
            lam_by_size[pt.size] = pt.lam
    for j in dims:
        model = table.model(int(j))
        if model is None:
            continue
        try:
            T[j - 1] = mcv_error(data, model, cfg.K, cv_seed, fit_intercept, refit, penalty,
                                 None if ref_path is None else ref_path.weights, lam_by_size.get(int(j), 0.0))
        except FoldTooSmall as exc:
            logger.info("size %d not refittable in CV: %s", j, exc)
    weights = dimension_weights(T, cfg, data)
    wmf = weights * mf
    if not np.any(wmf > 0):
        raise EmptyTable("no selectable size has positive weighted frequency")
    j = _argmax_high(wmf) + 1
    diag = {"dims": dims, "mf_freq": mf / table.B, "mcv": T, "weight": weights, "wmf": wmf / table.B}
    return SelectionResult(int(j), table.model(int(j)), "wmf", diag, table)


def wmf_select(data: Dataset, penalty: PenaltySpec, scheme: BootstrapScheme, B: int = 100,
               cfg: CvConfig = CvConfig(), master_seed: int = 0, max_steps=None, fit_intercept=True,
               refit="ols", n_jobs=1) -> SelectionResult:
    """Bootstrap frequency table, K-fold weights, and the weighted argmax.

    Parameters
    ----------
    data : Dataset
    penalty : PenaltySpec
        Path family and adaptive exponent.
    scheme : BootstrapScheme
        Paired or residual resampling.
    B : int
        Number of bootstrap paths.
    cfg : CvConfig
        Folds ``K``, temperature constant ``c`` and optional known ``sigma2``.
    master_seed : int
        All randomness (resamples and the fold partition) derives from it.
    refit : {"ols", "penalized"}
        How each candidate is refit inside cross-validation.

    Returns
    -------
    SelectionResult
        ``diagnostics`` holds per-size ``mf_freq``, ``mcv``, ``weight`` and
        ``wmf`` (frequency scale) for sizes ``1..p-1``.
    """
    table = mf_table(data, penalty, scheme, B, master_seed, max_steps, fit_intercept, n_jobs)
    ref = full_path(data, penalty, max_steps, fit_intercept) if refit == "penalized" else None
    cv_seed = derive_seed(master_seed, _STREAM_CV, 0)
    return wmf_from_table(data, table, cfg, cv_seed, fit_intercept, refit, penalty, ref)


# ----------------------------------------------------------------------------
# comparison criteria on transition points


def _log_binom(p, k):
    return gammaln(p + 1) - gammaln(k + 1) - gammaln(p - k + 1)


def path_sse(data: Dataset, path: SolutionPath) -> np.ndarray:
    out = np.empty(len(path.points))
    for i, pt in enumerate(path.points):
        r = data.y - pt.coefficients.predict(data.X)
        out[i] = float(r @ r)
    return out


def _cv_path_errors(data, path, K, seed, fit_intercept):
    folds = kfold_indices(data.n, K, seed)
    lams = path.lambdas
    fold_mse = np.empty((K, len(lams)))
    for f, test in enumerate(folds):
        train = np.setdiff1d(np.arange(data.n), test, assume_unique=True)
        sub = data.subset_rows(train)
        fpath = fit_path(sub, path.scheme, path.weights, max(path.max_steps, 1), fit_intercept)
        for k, lam in enumerate(lams):
            coef = coefficients_at(fpath, lam)
            r = data.y[test] - coef.predict(data.X[test])
            fold_mse[f, k] = float(r @ r) / len(test)
    sizes = np.array([len(t) for t in folds], dtype=float)
    cv = (fold_mse * sizes[:, None]).sum(axis=0) / data.n
    se = fold_mse.std(axis=0, ddof=1) / np.sqrt(K)
    return cv, se


def criterion_scores(data: Dataset, path: SolutionPath, criterion: str, cfg: CvConfig = CvConfig(),
                     sigma2=None, seed: int = 0, fit_intercept=True, xi: float = 0.5) -> np.ndarray:
    """Criterion value at every transition point (lower is better)."""
    n, p = data.X.shape
    k = path.sizes.astype(float)
    if criterion in ("bic", "ebic", "gic", "cp"):
        sse = path_sse(data, path)
        sse = np.maximum(sse, max(1e-300, 1e-30 * float(np.sum((data.y - data.y.mean()) ** 2))))
        if criterion == "bic":
            return n * np.log(sse / n) + k * np.log(n)
        if criterion == "ebic":
            return n * np.log(sse / n) + k * np.log(n) + 2 * xi * _log_binom(p, k)
        if criterion == "gic":
            return n * np.log(sse / n) + k * math.log(math.log(n)) * math.log(p)
        s2 = sigma2 if sigma2 is not None else (cfg.sigma2 or sigma2_estimate(data, fit_intercept))
        return sse / s2 - n + 2 * k
    if criterion in ("cv-min", "cv-1se"):
        cv, _ = _cv_path_errors(data, path, cfg.K, seed, fit_intercept)
        return cv
    raise UnknownCriterion(f"unknown criterion {criterion!r}; expected one of {CRITERIA}")


def criterion_select(data: Dataset, path: SolutionPath, criterion: str, cfg: CvConfig = CvConfig(),
                     sigma2=None, seed: int = 0, fit_intercept=True, xi: float = 0.5) -> SelectionResult:
    """Minimize an information criterion or CV error over transition points.

    ``cv-1se`` takes the largest level whose CV error is within one standard
    error of the minimum. Exact ties resolve to the earliest point.
    """
    if criterion not in CRITERIA:
        raise UnknownCriterion(f"unknown criterion {criterion!r}; expected one of {CRITERIA}")
    if not path.points:
        raise InputError("empty path")
    if criterion == "cv-1se":
        cv, se = _cv_path_errors(data, path, cfg.K, seed, fit_intercept)
        best = int(np.argmin(cv))
        idx = int(np.flatnonzero(cv <= cv[best] + se[best])[0])
        scores = cv
    else:
        scores = criterion_scores(data, path, criterion, cfg, sigma2, seed, fit_intercept, xi)
        idx = int(np.argmin(scores))
    pt = path.points[idx]
    diag = {"step": np.arange(len(path.points)), "size": path.sizes, "lambda": path.lambdas,
            "score": scores}
    return SelectionResult(pt.size, pt.active_set, criterion, diag, lam=pt.lam)


def tune_lambda2(data: Dataset, grid=DEFAULT_RIDGE_GRID, fit_intercept=True) -> float:
    """Ridge level picked by BIC on the full data; held fixed across bootstraps."""
    _, lam = ridge_tune_bic(data, grid, fit_intercept)
    return float(lam)


def tuned_enet_penalty(data: Dataset, gamma: float = 1.0, grid=DEFAULT_RIDGE_GRID, fit_intercept=True) -> PenaltySpec:
    """Adaptive Elastic-Net penalty with ``lambda2`` tuned by :func:`tune_lambda2`."""
    return PenaltySpec("adaptive-enet", gamma, tune_lambda2(data, grid, fit_intercept))
