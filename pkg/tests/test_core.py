import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wmfselect.core import (
    CoefficientVector,
    Dataset,
    PenaltySpec,
    adaptive_weights,
    ols_fit,
    pilot_estimate,
    ridge_bic,
    ridge_fit,
    ridge_tune_bic,
)
from wmfselect.errors import InputError, NonFiniteInput, SingularDesign


def test_dataset_validation():
    X = np.ones((3, 2))
    with pytest.raises(InputError):
        Dataset(X, np.ones(4))
    with pytest.raises(NonFiniteInput):
        Dataset(np.array([[1.0, np.nan], [0, 1]]), np.ones(2))
    with pytest.raises(NonFiniteInput):
        Dataset(np.eye(2), np.array([1.0, np.inf]))
    with pytest.raises(InputError):
        Dataset(X, np.ones(3), truth={5})
    d = Dataset(X, np.ones(3), truth=[0])
    assert d.truth == frozenset({0}) and d.n == 3 and d.p == 2


def test_subset_columns_remaps_truth():
    d = Dataset(np.eye(4), np.arange(4.0), truth={1, 3}, names=("a", "b", "c", "d"))
    s = d.subset_columns([3, 0])
    assert s.truth == frozenset({0}) and s.names == ("d", "a")


def test_penalty_spec_forces_lambda2():
    assert PenaltySpec("alasso", lambda2=3.0).lambda2 == 0.0
    assert PenaltySpec("aenet", lambda2=3.0).lambda2 == 3.0
    assert PenaltySpec("aenet").scheme == "adaptive-enet"
    with pytest.raises(InputError):
        PenaltySpec("scad")
    with pytest.raises(InputError):
        PenaltySpec(gamma=-1)


def test_ols_identity():
    b = ols_fit(Dataset(np.eye(3), np.array([1.0, 2.0, 3.0])), fit_intercept=False)
    np.testing.assert_allclose(b.values, [1, 2, 3], atol=1e-14)


def test_ols_noiseless_recovery(rng):
    X = rng.standard_normal((30, 4))
    beta = np.array([1.0, -2.0, 0.5, 3.0])
    b = ols_fit(Dataset(X, X @ beta + 7.0))
    np.testing.assert_allclose(b.values, beta, atol=1e-10)
    assert abs(b.intercept - 7.0) < 1e-10


def test_ols_normal_equations(rng):
    X = rng.standard_normal((20, 3))
    y = rng.standard_normal(20)
    b = ols_fit(Dataset(X, y), fit_intercept=False)
    ref = np.linalg.solve(X.T @ X, X.T @ y)
    np.testing.assert_allclose(b.values, ref, atol=1e-8)
    r = y - X @ b.values
    assert np.max(np.abs(X.T @ r)) < 1e-6 * np.max(np.abs(X.T @ y))


def test_ols_singular():
    X = np.column_stack([np.arange(10.0), 2 * np.arange(10.0)])
    with pytest.raises(SingularDesign):
        ols_fit(Dataset(X, np.arange(10.0)))
    with pytest.raises(SingularDesign):
        ols_fit(Dataset(np.ones((2, 3)), np.ones(2)))


def test_ridge_closed_form():
    b = ridge_fit(Dataset(np.eye(2), np.array([2.0, 4.0])), 1.0, fit_intercept=False)
    np.testing.assert_allclose(b.values, [1, 2], atol=1e-14)


def test_ridge_zero_is_ols(rng):
    d = Dataset(rng.standard_normal((25, 4)), rng.standard_normal(25))
    a, b = ridge_fit(d, 0.0), ols_fit(d)
    np.testing.assert_array_equal(a.values, b.values)


def test_ridge_dense_solve(rng):
    X = rng.standard_normal((30, 5))
    y = rng.standard_normal(30)
    b = ridge_fit(Dataset(X, y), 0.7, fit_intercept=False)
    ref = np.linalg.solve(X.T @ X + 0.7 * np.eye(5), X.T @ y)
    np.testing.assert_allclose(b.values, ref, atol=1e-8)


def test_ridge_handles_p_greater_than_n(rng):
    d = Dataset(rng.standard_normal((5, 12)), rng.standard_normal(5))
    assert np.all(np.isfinite(ridge_fit(d, 0.5).values))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 50.0), st.floats(0.0, 50.0))
def test_ridge_norm_shrinks(seed, l1, l2):
    rng = np.random.default_rng(seed)
    d = Dataset(rng.standard_normal((15, 4)), rng.standard_normal(15))
    lo, hi = sorted((l1, l2))
    assert np.linalg.norm(ridge_fit(d, hi).values) <= np.linalg.norm(ridge_fit(d, lo).values) + 1e-10


def _bic_oracle(X, y, lam):
    n = len(y)
    Xc, yc = X - X.mean(0), y - y.mean()
    p = X.shape[1]
    H = Xc @ np.linalg.solve(Xc.T @ Xc + lam * np.eye(p), Xc.T)
    sse = np.sum((yc - H @ yc) ** 2)
    return n * np.log(sse / n) + np.trace(H) * np.log(n)


def test_ridge_tune_singleton(rng):
    d = Dataset(rng.standard_normal((20, 3)), rng.standard_normal(20))
    fit, lam = ridge_tune_bic(d, [2.5])
    assert lam == 2.5
    np.testing.assert_allclose(fit.values, ridge_fit(d, 2.5).values)


def test_ridge_tune_noiseless_picks_zero(rng):
    X = rng.standard_normal((30, 4))
    d = Dataset(X, X @ np.array([1.0, 2, 3, 4]) + 0.001 * rng.standard_normal(30))
    _, lam = ridge_tune_bic(d, [0.0, 0.1, 1.0, 10.0])
    assert lam == 0.0


def test_ridge_tune_matches_enumeration(rng):
    z = rng.standard_normal((40, 1))
    X = np.hstack([z + 0.01 * rng.standard_normal((40, 1)) for _ in range(3)] + [rng.standard_normal((40, 2))])
    y = X @ np.array([1.0, 1.0, 1.0, 0.5, 0.0]) + rng.standard_normal(40)
    d = Dataset(X, y)
    grid = [0.01, 1.0, 100.0]
    scores = [_bic_oracle(X, y, g) for g in grid]
    _, lam = ridge_tune_bic(d, grid)
    assert lam == grid[int(np.argmin(scores))]
    for g, s in zip(grid, scores):
        assert ridge_bic(d, g)[0] == pytest.approx(s, rel=1e-10)


def test_ridge_tune_tie_goes_to_larger():
    # duplicate grid entries give identical BIC; the larger lambda must win among exact ties
    X = np.eye(4)
    d = Dataset(np.vstack([X, X]), np.arange(8.0))
    _, lam = ridge_tune_bic(d, [5.0, 5.0])
    assert lam == 5.0


@pytest.mark.parametrize(
    "pilot, gamma, expected",
    [((2.0, 0.5), 1.0, (0.5, 2.0)), ((2.0, 0.5), 0.0, (1.0, 1.0)), ((0.0, 4.0), 1.0, (1e8, 0.25)),
     ((-3.0, 1.0), 2.0, (1 / 9, 1.0))],
)
def test_adaptive_weights(pilot, gamma, expected):
    np.testing.assert_allclose(adaptive_weights(CoefficientVector(np.array(pilot)), gamma), expected)


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=8), st.floats(0, 3))
def test_adaptive_weights_antitone(vals, gamma):
    v = np.array(vals)
    w = adaptive_weights(v, gamma)
    order = np.argsort(-np.abs(v))
    assert np.all(np.diff(w[order]) >= -1e-12 * np.max(w))


def test_pilot_rule(rng):
    X = rng.standard_normal((100, 5))
    d = Dataset(X, X @ np.ones(5) + rng.standard_normal(100))
    np.testing.assert_allclose(pilot_estimate(d).values, ols_fit(d).values)
    wide = Dataset(rng.standard_normal((10, 8)), rng.standard_normal(10))
    fit, _ = ridge_tune_bic(wide)
    np.testing.assert_allclose(pilot_estimate(wide).values, fit.values)
