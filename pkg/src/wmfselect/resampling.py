"""Paired and residual bootstrap with platform-stable seed derivation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DEFAULT_RIDGE_GRID, CoefficientVector, Dataset, ridge_tune_bic
from .errors import InputError

_MASK = (1 << 64) - 1


def _mix64(z: int) -> int:
    # splitmix64 finalizer (Steele, Lea & Flood); a bijection on 64-bit words
    z = (z + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(master: int, replicate: int, draw: int) -> int:
    """Mix ``(master, replicate, draw)`` into a 64-bit generator seed.

    For fixed ``master`` and ``replicate`` the map ``draw -> seed`` is
    injective modulo 2**64, so sibling draws never share a stream.
    """
    z = _mix64(int(master) & _MASK)
    z = _mix64((z + (int(replicate) & _MASK)) & _MASK)
    return _mix64((z + (int(draw) & _MASK)) & _MASK)


def rng_for(master: int, replicate: int, draw: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, replicate, draw))


@dataclass(frozen=True)
class BootstrapScheme:
    kind: str = "paired"
    pilot_lambda2_grid: tuple = DEFAULT_RIDGE_GRID

    def __post_init__(self):
        if self.kind not in ("paired", "residual"):
            raise InputError(f"unknown bootstrap kind {self.kind!r}")
        grid = tuple(float(g) for g in self.pilot_lambda2_grid)
        if self.kind == "residual" and not grid:
            raise InputError("residual bootstrap needs a pilot ridge grid (possibly (0,))")
        object.__setattr__(self, "pilot_lambda2_grid", grid)


def paired_bootstrap(data: Dataset, seed: int) -> Dataset:
    """Resample ``n`` rows of ``(x_i, y_i)`` uniformly with replacement."""
    rng = np.random.default_rng(seed)
    rows = rng.integers(0, data.n, size=data.n)
    return data.subset_rows(rows)


def centered_residuals(data: Dataset, pilot: CoefficientVector) -> np.ndarray:
    if pilot.values.shape[0] != data.p:
        raise InputError("pilot does not match the design width")
    resid = data.y - pilot.predict(data.X)
    return resid - resid.mean()


def residual_bootstrap(data: Dataset, pilot: CoefficientVector, seed: int) -> Dataset:
    """Regenerate responses from the pilot fit plus resampled centered residuals.

    The design matrix object is reused unchanged.
    """
    resid = centered_residuals(data, pilot)
    rng = np.random.default_rng(seed)
    draw = resid[rng.integers(0, data.n, size=data.n)]
    y_star = pilot.predict(data.X) + draw
    return Dataset(data.X, y_star, data.truth, data.names)


def residual_pilot(data: Dataset, scheme: BootstrapScheme, fit_intercept: bool = True) -> CoefficientVector:
    """BIC-tuned ridge fit used to generate residual-bootstrap responses."""
    fit, _ = ridge_tune_bic(data, scheme.pilot_lambda2_grid, fit_intercept)
    return fit
