"""End-to-end acceptance checks; each prints one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s``. The long checks are
marked ``slow`` but stay in the default run.
"""

import json
import math
import time

import numpy as np
import pytest

from conftest import EXAMPLE1_CSV, EXAMPLE1_SEED, orthonormal_design, random_dataset, report
from wmfselect import cli
from wmfselect.core import Dataset, PenaltySpec, adaptive_weights, ols_fit
from wmfselect.glm import default_dn, sis_screen
from wmfselect.paths import cd_solve, coefficients_at, kkt_residual, lars_lasso_path, larsen_path
from wmfselect.resampling import BootstrapScheme
from wmfselect.selection import CvConfig, mcv_error, sigma2_estimate, wmf_select
from wmfselect.simulation import SCENARIOS, MethodSettings, generate_scenario, get_scenario, run_replications, scenario_dims


def _adaptive_soft(X, y, w, lam):
    # independent closed form for an orthonormal design
    z = X.T @ y
    return np.sign(z) * np.maximum(np.abs(z) - lam * w, 0.0)


def test_criterion_01_orthogonal_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(50):
        p = int(rng.integers(2, 17))
        n = int(rng.integers(p + 2, 65))
        X = orthonormal_design(rng, n, p)
        beta = np.where(rng.random(p) < 0.5, rng.normal(0, 3, p), 0.0)
        y = X @ beta + rng.normal(0, 0.5, n)
        d = Dataset(X, y)
        w = adaptive_weights(X.T @ y, 1.0)
        path = lars_lasso_path(d, w, fit_intercept=False)
        lams = list(path.lambdas)
        lams += [0.5 * (a + b) for a, b in zip(lams, lams[1:])]
        lams += list(rng.uniform(0, 1.2 * lams[0], 5))
        for lam in lams:
            got = coefficients_at(path, lam).values
            worst = max(worst, float(np.max(np.abs(got - _adaptive_soft(X, y, w, lam)))))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and dt < 10
    report(1, ok, f"max |path - soft threshold| = {worst:.2e}, {dt:.1f}s")
    assert ok


def test_criterion_02_kkt_and_cd_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    worst_kkt = worst_cd = 0.0
    lambda2s = [0.0, 0.5, 5.0]
    for i in range(100):
        p = int(rng.integers(2, 51))
        n = int(rng.integers(max(10, p // 2), 201))
        d = random_dataset(rng, n, p, k=min(5, p), sigma=1.0, rho=0.5)
        lambda2 = lambda2s[i % 3]
        if i % 2 == 0:
            # adaptive weights from a ridge pilot
            w = adaptive_weights(np.linalg.solve(d.X.T @ d.X + np.eye(p), d.X.T @ d.y), 1.0)
            w = np.minimum(w, 1e3)
        else:
            w = np.ones(p)
        path = lars_lasso_path(d, w) if lambda2 == 0 else larsen_path(d, lambda2, w)
        for pt in path.points:
            unscaled = pt.coefficients.values / path.scale
            worst_kkt = max(worst_kkt, kkt_residual(d, w, unscaled, pt.lam, lambda2))
            ref = cd_solve(d, w, pt.lam, lambda2, tol=1e-12, max_sweeps=200_000).values
            worst_cd = max(worst_cd, float(np.max(np.abs(unscaled - ref))))
    dt = time.perf_counter() - t0
    ok = worst_kkt <= 1e-6 and worst_cd <= 1e-6 and dt < 60
    report(2, ok, f"max KKT violation {worst_kkt:.2e}, max |path - CD| {worst_cd:.2e}, {dt:.1f}s")
    assert ok


def test_criterion_03_marginal_ordering_monte_carlo():
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    n, draws, sigma = 20, 10_000, 1.0
    X = orthonormal_design(rng, n, 3)
    beta = np.array([1.0, 0.5, 0.5])
    Y = (X @ beta)[None, :] + sigma * rng.standard_normal((draws, n))
    Z = np.abs(Y @ X)
    p_strict = float(np.mean(Z[:, 0] > Z[:, 1]))
    p_equal = float(np.mean(Z[:, 1] > Z[:, 2]))
    dt = time.perf_counter() - t0
    ok = p_strict > 0.5 and abs(p_equal - 0.5) <= 0.02 and dt < 5
    report(3, ok, f"P(strict) = {p_strict:.4f}, P(equal case) = {p_equal:.4f}, {dt:.1f}s")
    assert ok


def test_criterion_04_example1_golden(example1):
    t0 = time.perf_counter()
    res = wmf_select(example1, PenaltySpec("adaptive-lasso", 1.0), BootstrapScheme("paired"), B=100,
                     cfg=CvConfig(K=10), master_seed=EXAMPLE1_SEED)
    mf = np.asarray(res.diagnostics["mf_freq"])
    wmf = np.asarray(res.diagnostics["wmf"])
    gap = float(mf[:3].min()) > float(mf[3:9].max())
    arg = int(np.argmax(wmf)) + 1
    names = [example1.names[j] for j in res.model]
    dt = time.perf_counter() - t0
    ok = gap and arg == 3 and res.dimension == 3 and names == ["x1", "x2", "x5"] and dt < 30
    report(4, ok, f"gap {mf[:3].min():.2f} > {mf[3:9].max():.2f}, argmax WMF = {arg}, model {names}, {dt:.1f}s")
    assert ok


DIMS = {
    "2": [(10, 0.3), (17, 0.47), (22, 0.59)],
    "3": [(32, 0.09), (72, 0.11), (106, 0.12)],
    "4": [(10, 0.3), (17, 0.35), (22, 0.41)],
    "5": [(32, 0.19), (72, 0.13), (106, 0.11)],
}


def test_criterion_05_dimension_table():
    t0 = time.perf_counter()
    bad = []
    for key, expected in DIMS.items():
        for n, (p_ref, prop_ref) in zip((100, 300, 500), expected):
            p, p0, _ = scenario_dims(get_scenario(key), n)
            # printed proportions are two-decimal roundings of p0/p
            if p != p_ref or abs(p0 / p - prop_ref) > 0.005 + 1e-12:
                bad.append((key, n, p, p0))
    dt = time.perf_counter() - t0
    ok = not bad and dt < 1
    report(5, ok, f"{12 - len(bad)}/12 entries match, {dt:.3f}s")
    assert ok


@pytest.mark.slow
def test_criterion_06_scenario1_trend():
    t0 = time.perf_counter()
    settings = MethodSettings(B=100)
    res = run_replications(SCENARIOS["1"], ["wmf", "bic"], [100, 300, 500], 100, 6, settings)
    by = {(m.method, m.n): m for m in res}
    wmf = [by["wmf", n].proportion_correct for n in (100, 300, 500)]
    bic = [by["bic", n].proportion_correct for n in (100, 300, 500)]
    mono = all(b >= a - 0.05 for a, b in zip(wmf, wmf[1:]))
    beats = all(w >= b - 0.05 for w, b in zip(wmf, bic))
    fnz_w, fnz_b = by["wmf", 500].avg_false_nonzeros, by["bic", 500].avg_false_nonzeros
    dt = time.perf_counter() - t0
    ok = mono and beats and fnz_w <= 0.3 and fnz_b > fnz_w
    report(6, ok, f"WMF correct {wmf}, BIC correct {bic}, false nonzeros n=500 WMF {fnz_w:.2f} "
                  f"BIC {fnz_b:.2f}, {dt:.0f}s")
    assert ok


@pytest.mark.slow
def test_criterion_07_mcv_separation():
    t0 = time.perf_counter()
    spec = SCENARIOS["1"]
    n, R = 300, 100
    under = over = 0
    for r in range(R):
        d = generate_scenario(spec, n, 7000 + r)
        p = d.p
        e_under = mcv_error(d, [0], 10, r)
        e_true = mcv_error(d, [0, 1, 4], 10, r)
        e_full = mcv_error(d, list(range(p)), 10, r)
        under += e_under > e_true
        over += abs(e_true - e_full) < 5 * p / n * sigma2_estimate(d)
    dt = time.perf_counter() - t0
    ok = under >= 95 and over >= 90 and dt < 120
    report(7, ok, f"underfit > true in {under}/{R}, |true - full| small in {over}/{R}, {dt:.0f}s")
    assert ok


@pytest.mark.slow
def test_criterion_08_glm_trend():
    t0 = time.perf_counter()
    settings = MethodSettings(B=100)
    res = run_replications(SCENARIOS["glm"], ["wmf", "bic"], [500], 100, 8, settings)
    by = {m.method: m for m in res}
    w, b = by["wmf"], by["bic"]
    dt = time.perf_counter() - t0
    ok = w.proportion_correct >= b.proportion_correct - 0.05 and abs(w.avg_model_size - 3) < abs(b.avg_model_size - 3)
    report(8, ok, f"correct WMF {w.proportion_correct:.2f} BIC {b.proportion_correct:.2f}, size WMF "
                  f"{w.avg_model_size:.2f} BIC {b.avg_model_size:.2f}, runs {w.runs}/{b.runs}, {dt:.0f}s")
    assert ok


def _files(d):
    return {f.name: f.read_bytes() for f in sorted(d.iterdir())}


@pytest.mark.slow
def test_criterion_09_cli_determinism(tmp_path):
    t0 = time.perf_counter()
    runs = {
        "select": ["select", str(EXAMPLE1_CSV), "--seed", "1", "-B", "100"],
        "simulate": ["simulate", "--scenario", "4", "--n", "100,300", "-R", "4", "-B", "20", "--seed", "5",
                     "--methods", "wmf,bic,cv-1se"],
    }
    same = True
    for name, args in runs.items():
        first = tmp_path / f"{name}-orig"
        assert cli.main(args + ["--out", str(first)]) == 0
        ref = _files(first)
        for threads in (1, 8):
            again = tmp_path / f"{name}-t{threads}"
            rc = cli.main([name, "--config", str(first / "manifest.json"), "--threads", str(threads),
                           "--out", str(again)])
            same &= rc == 0 and _files(again) == ref
    dt = time.perf_counter() - t0
    ok = same and dt < 120
    report(9, ok, f"select and simulate outputs byte-identical at threads 1 and 8, {dt:.0f}s")
    assert ok


def test_criterion_10_sis_retention():
    t0 = time.perf_counter()
    n, p = 200, 400
    dn = default_dn(n)
    kept_all = 0
    for r in range(100):
        rng = np.random.default_rng(10_000 + r)
        X = rng.standard_normal((n, p))
        support = rng.choice(p, 3, replace=False)
        beta = np.zeros(p)
        beta[support] = rng.choice([-1, 1], 3) * rng.uniform(2, 3, 3)
        y = X @ beta + rng.standard_normal(n)
        kept = set(sis_screen(X, y, dn).kept)
        kept_all += set(support) <= kept
    dt = time.perf_counter() - t0
    ok = dn == math.floor(n / math.log(n)) and kept_all >= 95 and dt < 60
    report(10, ok, f"d_n = {dn}, all true variables kept in {kept_all}/100, {dt:.1f}s")
    assert ok
