"""Data-generating scenarios, replication driver and selection metrics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.special import expit

from .core import DEFAULT_RIDGE_GRID, Dataset, PenaltySpec
from .errors import InputError, WMFError
from .glm import GLM_CRITERIA, GlmDataset, glm_criterion_select, glm_mf_table, glm_path, glm_wmf_select
from .resampling import BootstrapScheme, derive_seed
from .selection import (
    CRITERIA,
    CvConfig,
    SelectionResult,
    criterion_select,
    full_path,
    mf_select,
    mf_table,
    tune_lambda2,
    wmf_select,
)

logger = logging.getLogger(__name__)

BLOCK_NOISE = 0.05
DEFAULT_N = (100, 300, 500)


@dataclass(frozen=True)
class ScenarioSpec:
    """Parameters of one data-generating process.

    ``base`` maps 0-based positions to the coefficients present at ``n0``.
    Every ``step_n`` units of ``n`` above ``n0`` add ``per_step`` coefficients
    equal to ``new_value`` at the next free positions after ``start``.
    """

    id: str
    p_rule: tuple
    base: tuple
    step_n: int = 0
    per_step: int = 0
    new_value: float = 0.0
    start: int = 0
    sigma: float = 1.0
    cov_rule: tuple = ("ar", 0.0)
    family: str = "gaussian"
    penalty: str = "alasso"
    bootstrap: str = "paired"
    n0: int = 100

    def __post_init__(self):
        if self.p_rule[0] not in ("fixed", "sqrt", "pow34"):
            raise InputError(f"unknown p rule {self.p_rule!r}")
        if self.cov_rule[0] not in ("ar", "block"):
            raise InputError(f"unknown covariance rule {self.cov_rule!r}")
        if self.family not in ("gaussian", "logistic"):
            raise InputError(f"unknown family {self.family!r}")
        if self.sigma < 0:
            raise InputError("sigma must be >= 0")


_EX1 = ((0, 3.0), (1, 1.5), (4, 2.0))

SCENARIOS = {
    "1": ScenarioSpec("1", ("fixed", 10), _EX1, sigma=3.0, cov_rule=("ar", 0.3)),
    "2": ScenarioSpec("2", ("sqrt",), _EX1, step_n=40, per_step=1, new_value=1.0, start=5,
                      sigma=3.0, cov_rule=("ar", 0.3)),
    "3": ScenarioSpec("3", ("pow34",), _EX1, step_n=40, per_step=1, new_value=2.0, start=5,
                      sigma=3.0, cov_rule=("ar", 0.3)),
    "4": ScenarioSpec("4", ("sqrt",), ((0, 2.0), (1, 2.0), (2, 2.0)), step_n=200, per_step=3, new_value=1.0,
                      start=3, sigma=3.0, cov_rule=("ar", 0.5), penalty="aenet", bootstrap="residual"),
    "5": ScenarioSpec("5", ("pow34",), tuple((j, 2.0) for j in range(6)), step_n=200, per_step=3, new_value=2.0,
                      start=6, sigma=5.0, cov_rule=("ar", 0.5), penalty="aenet", bootstrap="residual"),
    "6": ScenarioSpec("6", ("pow34",), tuple((j, 2.0) for j in range(6)), step_n=200, per_step=3, new_value=2.0,
                      start=6, sigma=5.0, cov_rule=("block", BLOCK_NOISE), penalty="aenet", bootstrap="residual"),
    "glm": ScenarioSpec("glm", ("fixed", 10), _EX1, sigma=0.0, cov_rule=("ar", 0.3), family="logistic"),
}


def get_scenario(key) -> ScenarioSpec:
    key = str(key)
    if key not in SCENARIOS:
        raise InputError(f"unknown scenario {key!r}; expected one of {sorted(SCENARIOS)}")
    return SCENARIOS[key]


def scenario_p(spec: ScenarioSpec, n: int) -> int:
    rule = spec.p_rule[0]
    if rule == "fixed":
        return int(spec.p_rule[1])
    if rule == "sqrt":
        return math.isqrt(n)
    return int(round(n**0.75))


def scenario_dims(spec: ScenarioSpec, n: int):
    """Return ``(p, p0, beta)`` for sample size ``n``."""
    if n < 1:
        raise InputError("n must be >= 1")
    p = scenario_p(spec, n)
    beta = np.zeros(p)
    for j, v in spec.base:
        if j >= p:
            raise InputError(f"scenario {spec.id} needs p > {j} but n = {n} gives p = {p}")
        beta[j] = v
    extra = spec.per_step * max(0, (n - spec.n0) // spec.step_n) if spec.step_n else 0
    if spec.start + extra > p:
        raise InputError(f"scenario {spec.id}: {extra} added coefficients do not fit in p = {p}")
    beta[spec.start:spec.start + extra] = spec.new_value
    return p, int(np.count_nonzero(beta)), beta


def population_covariance(spec: ScenarioSpec, n: int) -> np.ndarray:
    p, p0, _ = scenario_dims(spec, n)
    if spec.cov_rule[0] == "ar":
        idx = np.arange(p)
        return spec.cov_rule[1] ** np.abs(idx[:, None] - idx[None, :]).astype(float)
    eps2 = spec.cov_rule[1] ** 2
    S = np.eye(p)
    for b in range(0, p0, 3):
        blk = slice(b, min(b + 3, p0))
        S[blk, blk] = 1.0
    S[np.arange(p0), np.arange(p0)] = 1.0 + eps2
    return S


def population_snr(spec: ScenarioSpec, n: int) -> float:
    _, _, beta = scenario_dims(spec, n)
    if spec.sigma == 0:
        return math.inf
    return float(beta @ population_covariance(spec, n) @ beta) / spec.sigma**2


def _draw_design(spec, n, p, p0, rng):
    if spec.cov_rule[0] == "ar":
        L = np.linalg.cholesky(population_covariance(spec, n))
        return rng.standard_normal((n, p)) @ L.T
    X = rng.standard_normal((n, p))
    for b in range(0, p0, 3):
        cols = np.arange(b, min(b + 3, p0))
        f = rng.standard_normal(n)
        X[:, cols] = f[:, None] + spec.cov_rule[1] * X[:, cols]
    return X


def generate_scenario(spec: ScenarioSpec, n: int, seed: int) -> Dataset:
    """Draw one dataset; ``truth`` holds the 0-based support of ``beta``."""
    p, p0, beta = scenario_dims(spec, n)
    rng = np.random.default_rng(seed)
    X = _draw_design(spec, n, p, p0, rng)
    truth = frozenset(int(j) for j in np.flatnonzero(beta))
    eta = X @ beta
    if spec.family == "logistic":
        y = (rng.random(n) < expit(eta)).astype(float)
        return GlmDataset(X, y, truth)
    y = eta + spec.sigma * rng.standard_normal(n)
    return Dataset(X, y, truth)


# ----------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class MetricsSummary:
    method: str
    n: int
    proportion_correct: float
    avg_false_nonzeros: float
    avg_false_zeros: float
    avg_model_size: float
    runs: int
    failed: int = 0

    def as_dict(self) -> dict:
        return {"proportion_correct": self.proportion_correct, "avg_false_nonzeros": self.avg_false_nonzeros,
                "avg_false_zeros": self.avg_false_zeros, "avg_model_size": self.avg_model_size}


METRIC_NAMES = ("proportion_correct", "avg_false_nonzeros", "avg_false_zeros", "avg_model_size")


def compute_metrics(selections, truth, method: str = "", n: int = 0, failed: int = 0) -> MetricsSummary:
    """Average selection accuracy of ``selections`` against ``truth``."""
    sels = [frozenset(s) for s in selections]
    if not sels:
        raise InputError("need at least one selection")
    truth = frozenset(truth)
    R = len(sels)
    correct = sum(s == truth for s in sels)
    fnz = sum(len(s - truth) for s in sels)
    fz = sum(len(truth - s) for s in sels)
    size = sum(len(s) for s in sels)
    return MetricsSummary(method, n, correct / R, fnz / R, fz / R, size / R, R, failed)


# ----------------------------------------------------------------------------
# running methods


@dataclass(frozen=True)
class MethodSettings:
    """Everything a method needs beyond the data and a seed.

    ``lambda2=None`` with an Elastic-Net penalty means BIC-tuned on the data.
    """

    penalty: str = "alasso"
    bootstrap: str = "paired"
    B: int = 100
    cv: CvConfig = field(default_factory=CvConfig)
    gamma: float = 1.0
    lambda2: float | None = None
    lambda2_grid: tuple = DEFAULT_RIDGE_GRID
    max_steps: int | None = None
    fit_intercept: bool = True
    n_jobs: int = 1
    xi: float = 0.5


def penalty_for(data: Dataset, settings: MethodSettings) -> PenaltySpec:
    if PenaltySpec(settings.penalty).scheme in ("adaptive-enet", "enet"):
        lam2 = settings.lambda2
        if lam2 is None:
            lam2 = tune_lambda2(data, settings.lambda2_grid, settings.fit_intercept)
        return PenaltySpec(settings.penalty, settings.gamma, lam2)
    return PenaltySpec(settings.penalty, settings.gamma)


def run_methods(data: Dataset, methods, settings: MethodSettings, seed: int, family: str = "gaussian") -> dict:
    """Run every method on ``data``; failures map to ``None`` (logged)."""
    allowed = ("wmf", "mf") + (GLM_CRITERIA if family == "logistic" else CRITERIA)
    unknown = [m for m in methods if m not in allowed]
    if unknown:
        raise InputError(f"unknown method(s) {unknown} for {family} data; expected a subset of {allowed}")
    out = {}
    if family == "logistic":
        path = None
        for m in methods:
            try:
                if m == "wmf":
                    out[m] = glm_wmf_select(data, settings.B, settings.cv, seed, settings.gamma,
                                            n_jobs=settings.n_jobs)
                elif m == "mf":
                    out[m] = mf_select(glm_mf_table(data, settings.B, seed, settings.gamma,
                                                    n_jobs=settings.n_jobs))
                else:
                    if path is None:
                        path = glm_path(data, settings.gamma)
                    out[m] = glm_criterion_select(data, path, m, settings.xi)
            except WMFError as exc:
                logger.warning("method %s failed: %s", m, exc)
                out[m] = None
        return out
    penalty = penalty_for(data, settings)
    scheme = BootstrapScheme(settings.bootstrap, settings.lambda2_grid)
    path = None
    cv_seed = derive_seed(seed, 1, 0)
    for m in methods:
        try:
            if m == "wmf":
                out[m] = wmf_select(data, penalty, scheme, settings.B, settings.cv, seed, settings.max_steps,
                                    settings.fit_intercept, n_jobs=settings.n_jobs)
            elif m == "mf":
                out[m] = mf_select(mf_table(data, penalty, scheme, settings.B, seed, settings.max_steps,
                                            settings.fit_intercept, settings.n_jobs))
            else:
                if path is None:
                    path = full_path(data, penalty, settings.max_steps, settings.fit_intercept, settings.lambda2_grid)
                out[m] = criterion_select(data, path, m, settings.cv, seed=cv_seed,
                                          fit_intercept=settings.fit_intercept, xi=settings.xi)
        except WMFError as exc:
            logger.warning("method %s failed: %s", m, exc)
            out[m] = None
    return out


def default_methods(spec: ScenarioSpec) -> tuple:
    if spec.family == "logistic":
        return ("wmf",) + GLM_CRITERIA
    return ("wmf", "bic", "ebic", "gic", "cp", "cv-1se")


def _one_replicate(spec, n, n_idx, r, methods, settings, master_seed):
    data_seed = derive_seed(master_seed, r, n_idx)
    data = generate_scenario(spec, n, data_seed)
    res = run_methods(data, methods, settings, derive_seed(data_seed, 2, 0), spec.family)
    return {m: (None if v is None else tuple(v.model)) for m, v in res.items()}


def run_replications(spec: ScenarioSpec, methods, n_list, R: int, master_seed: int,
                     settings: MethodSettings | None = None, n_jobs: int = 1) -> list:
    """Simulate ``R`` datasets per ``n`` and summarize every method.

    Replicate ``r`` at the ``i``-th sample size draws its data from
    ``derive_seed(master_seed, r, i)``; all methods see the same data. The
    result list is ordered by ``(n, method)`` and does not depend on
    ``n_jobs``.
    """
    if R < 1:
        raise InputError("R must be >= 1")
    methods = tuple(methods)
    if settings is None:
        settings = MethodSettings(penalty=spec.penalty, bootstrap=spec.bootstrap)
    tasks = [(i, n, r) for i, n in enumerate(n_list) for r in range(R)]
    if n_jobs == 1:
        rows = [_one_replicate(spec, n, i, r, methods, settings, master_seed) for i, n, r in tasks]
    else:
        rows = Parallel(n_jobs=n_jobs)(
            delayed(_one_replicate)(spec, n, i, r, methods, settings, master_seed) for i, n, r in tasks)
    summaries = []
    for i, n in enumerate(n_list):
        truth = frozenset(int(j) for j in np.flatnonzero(scenario_dims(spec, n)[2]))
        block = rows[i * R:(i + 1) * R]
        for m in methods:
            sels = [row[m] for row in block if row[m] is not None]
            failed = R - len(sels)
            if failed:
                logger.warning("%s at n=%d: %d of %d replicates failed", m, n, failed, R)
            if sels:
                summaries.append(compute_metrics(sels, truth, m, n, failed))
            else:
                summaries.append(MetricsSummary(m, n, math.nan, math.nan, math.nan, math.nan, 0, failed))
    return summaries


__all__ = [
    "SCENARIOS", "ScenarioSpec", "MetricsSummary", "MethodSettings", "METRIC_NAMES", "DEFAULT_N",
    "compute_metrics", "default_methods", "generate_scenario", "get_scenario", "penalty_for",
    "population_covariance", "population_snr", "run_methods", "run_replications", "scenario_dims",
    "SelectionResult",
]
