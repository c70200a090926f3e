import numpy as np
import pytest

from conftest import random_dataset
from wmfselect.core import CoefficientVector, Dataset, ols_fit
from wmfselect.errors import InputError
from wmfselect.resampling import (
    BootstrapScheme,
    _mix64,
    centered_residuals,
    derive_seed,
    paired_bootstrap,
    residual_bootstrap,
    residual_pilot,
)


def test_mix64_reference_outputs():
    # first two outputs of the reference splitmix64 generator seeded with 0
    assert _mix64(0) == 0xE220A8397B1DCDAF
    assert _mix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4


@pytest.mark.parametrize(
    "args, expected",
    [((0, 0, 0), 0x238275BC38FCBE91), ((1, 2, 3), 0x6AE515C1C0AC7E37),
     ((2**63, 7, 11), 0xC9B25424A6E58D9A), ((42, 0, 1), 0xB682EE25CE24109E)],
)
def test_derive_seed_golden(args, expected):
    assert derive_seed(*args) == expected


def _mix64_np(z):
    z = z + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _derive_np(m, r, d):
    with np.errstate(over="ignore"):
        z = _mix64_np(m)
        z = _mix64_np(z + np.uint64(r))
        return _mix64_np(z + np.uint64(d))


def test_derive_seed_no_sibling_collisions():
    masters = np.random.default_rng(0).integers(0, 2**63, size=1_000_000, dtype=np.uint64)
    a, b = _derive_np(masters, 1, 1), _derive_np(masters, 1, 2)
    assert not np.any(a == b)
    for m in masters[:200]:
        assert derive_seed(int(m), 1, 1) == int(_derive_np(np.array([m]), 1, 1)[0])


def test_paired_bootstrap_n1():
    d = Dataset(np.array([[1.0, 2.0]]), np.array([3.0]))
    b = paired_bootstrap(d, 5)
    np.testing.assert_array_equal(b.X, d.X)
    np.testing.assert_array_equal(b.y, d.y)


def test_paired_bootstrap_preserves_pairs(rng):
    d = random_dataset(rng, 30, 4)
    b = paired_bootstrap(d, 11)
    rows = {tuple(r) + (v,) for r, v in zip(d.X, d.y)}
    assert all(tuple(r) + (v,) in rows for r, v in zip(b.X, b.y))
    b2 = paired_bootstrap(d, 11)
    np.testing.assert_array_equal(b.X, b2.X)


def test_paired_bootstrap_uniform():
    n = 10
    d = Dataset(np.arange(n, dtype=float)[:, None], np.arange(n, dtype=float))
    counts = np.zeros(n)
    for s in range(10_000):
        counts += np.bincount(paired_bootstrap(d, s).y.astype(int), minlength=n)
    freq = counts / counts.sum()
    assert np.all((freq > 0.095) & (freq < 0.105))


def test_residual_bootstrap_perfect_fit(rng):
    X = rng.standard_normal((20, 3))
    d = Dataset(X, X @ np.array([1.0, 2.0, 3.0]) + 1.0)
    pilot = ols_fit(d)
    b = residual_bootstrap(d, pilot, 3)
    np.testing.assert_allclose(b.y, pilot.predict(X), atol=1e-12)
    assert b.X is d.X


def test_residual_bootstrap_properties(rng):
    d = random_dataset(rng, 40, 5)
    pilot = residual_pilot(d, BootstrapScheme("residual"))
    r = centered_residuals(d, pilot)
    assert abs(r.sum()) < 1e-10 * d.n
    a, b = residual_bootstrap(d, pilot, 9), residual_bootstrap(d, pilot, 9)
    np.testing.assert_array_equal(a.y, b.y)
    pool = set(np.round(r, 12))
    assert set(np.round(a.y - pilot.predict(d.X), 12)) <= pool
    with pytest.raises(InputError):
        centered_residuals(d, CoefficientVector(np.ones(2)))


def test_scheme_validation():
    with pytest.raises(InputError):
        BootstrapScheme("wild")
    with pytest.raises(InputError):
        BootstrapScheme("residual", ())
    assert BootstrapScheme("residual", (0,)).pilot_lambda2_grid == (0.0,)
