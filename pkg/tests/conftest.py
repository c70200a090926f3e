import os

import numpy as np
import pytest

from wmfselect.core import Dataset

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
EXAMPLE1_CSV = os.path.join(DATA_DIR, "example1.csv")
EXAMPLE1_SEED = 1


def ar_cov(p, rho):
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)


def orthonormal_design(rng, n, p):
    q, _ = np.linalg.qr(rng.standard_normal((n, p)))
    return q


def random_dataset(rng, n, p, k=3, sigma=1.0, rho=0.3):
    X = rng.standard_normal((n, p)) @ np.linalg.cholesky(ar_cov(p, rho)).T
    beta = np.zeros(p)
    beta[rng.choice(p, size=min(k, p), replace=False)] = rng.choice([-1, 1], size=min(k, p)) * rng.uniform(1, 3, min(k, p))
    y = X @ beta + sigma * rng.standard_normal(n)
    return Dataset(X, y, frozenset(np.flatnonzero(beta)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def example1():
    from wmfselect.io import load_csv

    return load_csv(EXAMPLE1_CSV)


ACCEPTANCE_LINES = []


def report(criterion, ok, detail=""):
    """Record and print one acceptance line; the summary hook repeats them."""
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance check (still part of the default run)")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
