"""Piecewise-linear regularization paths and fixed-level oracle solvers.

Conventions
-----------
The running path level ``lam`` is the KKT threshold of the problem

    ||y - X b||² + lambda2 ||b||² + 2 lam sum_j w_j |b_j|,

so an inactive column satisfies ``|X_jᵀ r| <= lam w_j`` and an active one
``X_jᵀ r - lambda2 b_j = lam w_j sgn(b_j)``. Adaptive weights are handled by
solving a plain L1 path on the columns ``X_j / w_j`` and mapping back.
Elastic-Net coefficients reported on a path are multiplied by
``1 + lambda2 / n``; the unscaled ("naive") solution is ``coef / path.scale``.

A transition point stores the solution *at* its knot, so its active set is
exactly the support of its coefficients: a variable entering at a knot is
still zero there, a variable leaving at a knot is already zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import CoefficientVector, Dataset, PenaltySpec, center
from .errors import InputError, NoConvergence, NonFiniteInput, NotOrthogonal

logger = logging.getLogger(__name__)

# events closer than this (relative to the entry level) are simultaneous
TIE_TOL = 1e-11
# the path is considered to have reached the unpenalized fit below this level
END_TOL = 1e-10
# a column is refused when its Schur complement falls below this fraction
SCHUR_TOL = 1e-10


@dataclass(frozen=True)
class TransitionPoint:
    step: int
    lam: float
    active_set: tuple
    coefficients: CoefficientVector

    @property
    def size(self) -> int:
        return len(self.active_set)


@dataclass(frozen=True)
class SolutionPath:
    points: tuple
    scheme: PenaltySpec
    max_steps: int
    weights: np.ndarray = field(repr=False, default=None)
    scale: float = 1.0

    def __len__(self):
        return len(self.points)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([pt.lam for pt in self.points])

    @property
    def sizes(self) -> np.ndarray:
        return np.array([pt.size for pt in self.points], dtype=int)

    @property
    def coef_matrix(self) -> np.ndarray:
        """``(len(points), p)`` array of reported coefficients."""
        return np.array([pt.coefficients.values for pt in self.points])


def default_max_steps(n: int, p: int) -> int:
    return max(1, min(p, n - 1))


def _check_weights(weights, p):
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape[0] != p:
        raise InputError(f"expected {p} weights, got {w.shape[0]}")
    if not np.all(np.isfinite(w)):
        raise NonFiniteInput("weights must be finite")
    if np.any(w <= 0):
        raise InputError("weights must be strictly positive")
    return w


def _homotopy(Xw, yc, ridge, max_steps):
    """L1 homotopy for 0.5 b'(XwᵀXw + diag(ridge))b - (Xwᵀyc)'b + lam |b|_1.

    Returns a list of ``(lam, beta)`` knots in the reweighted coordinates.
    """
    n, p = Xw.shape
    c = Xw.T @ yc
    absc = np.abs(c)
    lam0 = float(absc.max()) if p else 0.0
    beta = np.zeros(p)
    knots = [(lam0, beta.copy())]
    if lam0 <= 0.0:
        return knots
    tie = TIE_TOL * lam0
    colsq = np.einsum("ij,ij->j", Xw, Xw) + ridge

    active: list = []
    signs: list = []
    excluded: set = set()

    def try_add(j, sign):
        if colsq[j] <= 0.0:
            excluded.add(j)
            return False
        if active:
            XA = Xw[:, active]
            GA = XA.T @ XA + np.diag(ridge[active])
            g = XA.T @ Xw[:, j]
            schur = colsq[j] - g @ np.linalg.solve(GA, g)
        else:
            schur = colsq[j]
        if schur <= SCHUR_TOL * colsq[j]:
            logger.debug("refusing column %d: collinear with the active set", j)
            excluded.add(j)
            return False
        active.append(j)
        signs.append(sign)
        return True

    # entry at lam0; ties broken toward the lowest column index
    first = np.flatnonzero(absc >= lam0 - tie)
    just_changed: dict = {}
    for j in first:
        if try_add(int(j), float(np.sign(c[j]))):
            just_changed[int(j)] = "in"
    lam = lam0

    while len(knots) - 1 < max_steps:
        if not active:
            break
        A = np.array(active)
        s = np.array(signs)
        XA = Xw[:, A]
        GA = XA.T @ XA + np.diag(ridge[A])
        rhs = np.column_stack([c[A], s])
        sol = np.linalg.solve(GA, rhs)
        u, v = sol[:, 0], sol[:, 1]
        # inactive correlations are a + lam * b along this segment
        a = c - Xw.T @ (XA @ u)
        b = Xw.T @ (XA @ v)

        cand_lam = []
        cand_evt = []
        upper = lam - tie
        inactive = np.ones(p, dtype=bool)
        inactive[A] = False
        for j in excluded:
            inactive[j] = False
        idx = np.flatnonzero(inactive)
        if idx.size:
            with np.errstate(divide="ignore", invalid="ignore"):
                lp = a[idx] / (1.0 - b[idx])
                lm = -a[idx] / (1.0 + b[idx])
            for j, x, y_ in zip(idx, lp, lm):
                j = int(j)
                # a column that just left sits on its old boundary; that root is the current knot
                skip = just_changed.get(j)
                if skip != 1.0 and np.isfinite(x) and 0.0 < x < upper:
                    cand_lam.append(x)
                    cand_evt.append(("in", j, 1.0))
                if skip != -1.0 and np.isfinite(y_) and 0.0 < y_ < upper:
                    cand_lam.append(y_)
                    cand_evt.append(("in", j, -1.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            ld = u / v
        for k, x in enumerate(ld):
            # a column that just entered is zero at the current knot, its only root
            if just_changed.get(int(A[k])) == "in":
                continue
            if np.isfinite(x) and 0.0 < x < upper:
                cand_lam.append(x)
                cand_evt.append(("out", int(A[k]), 0.0))

        lam_next = max(cand_lam) if cand_lam else 0.0
        if lam_next <= END_TOL * lam0:
            beta = np.zeros(p)
            beta[A] = u
            knots.append((0.0, beta))
            break

        beta = np.zeros(p)
        beta[A] = u - lam_next * v
        group = sorted(
            (evt for lv, evt in zip(cand_lam, cand_evt) if lv >= lam_next - tie),
            key=lambda e: (e[0] != "out", e[1]),
        )
        changed: dict = {}
        for kind, j, sign in group:
            if kind == "out":
                pos = active.index(j)
                changed[j] = signs[pos]
                del active[pos]
                del signs[pos]
                beta[j] = 0.0
            elif j not in active and j not in changed:
                if try_add(j, sign):
                    changed[j] = "in"
        lam = lam_next
        just_changed = changed
        if changed:
            knots.append((lam, beta))
    return knots


def _fit_path(data, weights, lambda2, max_steps, scheme, fit_intercept):
    n, p = data.X.shape
    w = _check_weights(weights, p)
    if max_steps is None:
        max_steps = default_max_steps(n, p)
    if max_steps < 1:
        raise InputError("max_steps must be >= 1")
    Xc, yc, xm, ym = center(data.X, data.y, fit_intercept)
    Xw = Xc / w
    ridge = lambda2 / w**2
    knots = _homotopy(Xw, yc, ridge, max_steps)
    scale = 1.0 + lambda2 / n
    points = []
    for step, (lam, bw) in enumerate(knots):
        beta = (bw / w) * scale
        beta[bw == 0.0] = 0.0
        b0 = ym - float(xm @ beta) if fit_intercept else 0.0
        coef = CoefficientVector(beta, b0)
        points.append(TransitionPoint(step, float(lam), coef.support, coef))
    return SolutionPath(tuple(points), scheme, int(max_steps), w, scale)


def lars_lasso_path(data: Dataset, weights, max_steps=None, fit_intercept=True) -> SolutionPath:
    """Full (adaptive) LASSO path by homotopy, including variable drops.

    Parameters
    ----------
    data : Dataset
    weights : array_like, shape (p,)
        Strictly positive penalty weights; all ones gives the plain LASSO.
    max_steps : int, optional
        Number of transition points after the empty model. Defaults to
        ``min(p, n - 1)``.
    fit_intercept : bool
        Center the data and report an unpenalized intercept.
    """
    scheme = PenaltySpec("adaptive-lasso" if np.any(np.asarray(weights) != 1) else "lasso")
    return _fit_path(data, weights, 0.0, max_steps, scheme, fit_intercept)


def larsen_path(data: Dataset, lambda2: float, weights, max_steps=None, fit_intercept=True) -> SolutionPath:
    """(Adaptive) Elastic-Net path at fixed ridge level ``lambda2``.

    Coefficients are rescaled by ``1 + lambda2 / n``. With ``lambda2 == 0``
    the computation is the LASSO path, operation for operation.
    """
    if lambda2 < 0:
        raise InputError("lambda2 must be >= 0")
    adaptive = bool(np.any(np.asarray(weights) != 1))
    scheme = PenaltySpec("adaptive-enet" if adaptive else "enet", lambda2=lambda2)
    return _fit_path(data, weights, float(lambda2), max_steps, scheme, fit_intercept)


def fit_path(data: Dataset, penalty: PenaltySpec, weights, max_steps=None, fit_intercept=True):
    """Dispatch on ``penalty.scheme`` to the LASSO or Elastic-Net path."""
    if penalty.scheme in ("lasso", "adaptive-lasso"):
        path = _fit_path(data, weights, 0.0, max_steps, penalty, fit_intercept)
    else:
        path = _fit_path(data, weights, penalty.lambda2, max_steps, penalty, fit_intercept)
    return path


def soft_threshold_orthogonal(data: Dataset, weights, lam: float) -> CoefficientVector:
    """Closed-form adaptive LASSO under an orthonormal design (no intercept)."""
    X = data.X
    if np.max(np.abs(X.T @ X - np.eye(X.shape[1]))) > 1e-8:
        raise NotOrthogonal("XᵀX differs from the identity by more than 1e-8")
    w = _check_weights(weights, X.shape[1])
    z = X.T @ data.y
    beta = np.sign(z) * np.maximum(np.abs(z) - lam * w, 0.0)
    return CoefficientVector(beta)


def cd_solve(data: Dataset, weights, lambda1: float, lambda2: float = 0.0, tol: float = 1e-9,
             max_sweeps: int = 100_000, fit_intercept: bool = True, init=None) -> CoefficientVector:
    """Fixed-level coordinate descent for the weighted Elastic-Net objective.

    Minimizes ``||y - Xb||² + lambda2 ||b||² + 2 lambda1 sum w_j |b_j|`` and
    returns the *unscaled* minimizer. Convergence is declared when the
    largest KKT violation drops to ``tol``.

    Raises
    ------
    NoConvergence
        If ``max_sweeps`` full sweeps do not reach ``tol``.
    """
    if lambda1 < 0 or lambda2 < 0:
        raise InputError("penalty levels must be >= 0")
    if tol <= 0:
        raise InputError("tol must be > 0")
    p = data.p
    w = _check_weights(weights, p)
    Xc, yc, xm, ym = center(data.X, data.y, fit_intercept)
    G = Xc.T @ Xc + lambda2 * np.eye(p)
    c = Xc.T @ yc
    beta = np.zeros(p) if init is None else np.array(init, dtype=float)
    sweeps, kkt = _kernels.cd_gram(G, c, lambda1 * w, beta, tol, max_sweeps)
    if kkt > tol:
        raise NoConvergence(f"coordinate descent stopped at KKT residual {kkt:.3g} after {sweeps} sweeps")
    b0 = ym - float(xm @ beta) if fit_intercept else 0.0
    return CoefficientVector(beta, b0)


def kkt_residual(data: Dataset, weights, coef, lam: float, lambda2: float = 0.0, fit_intercept=True) -> float:
    """Largest KKT violation of unscaled ``coef`` at level ``lam``."""
    w = _check_weights(weights, data.p)
    Xc, yc, _, _ = center(data.X, data.y, fit_intercept)
    b = coef.values if isinstance(coef, CoefficientVector) else np.asarray(coef, float)
    g = Xc.T @ (yc - Xc @ b) - lambda2 * b
    t = lam * w
    viol = np.where(b > 0, np.abs(g - t), np.where(b < 0, np.abs(g + t), np.maximum(np.abs(g) - t, 0.0)))
    return float(viol.max())


def coefficients_at(path: SolutionPath, lam: float) -> CoefficientVector:
    """Exact path coefficients at level ``lam`` by linear interpolation.

    Levels above the entry knot give the empty model. Levels below the last
    knot of a truncated path return the last knot.
    """
    if lam < 0:
        raise InputError("lam must be >= 0")
    pts = path.points
    if lam >= pts[0].lam:
        return pts[0].coefficients
    for k in range(1, len(pts)):
        hi, lo = pts[k - 1], pts[k]
        if lam == lo.lam:
            return lo.coefficients
        if lo.lam < lam < hi.lam:
            t = (lam - lo.lam) / (hi.lam - lo.lam)
            vals = t * hi.coefficients.values + (1.0 - t) * lo.coefficients.values
            b0 = t * hi.coefficients.intercept + (1.0 - t) * lo.coefficients.intercept
            return CoefficientVector(vals, b0)
    return pts[-1].coefficients


def last_model_of_size(path: SolutionPath, k: int):
    """Active set of the last transition point with exactly ``k`` variables."""
    if k < 1:
        raise InputError("k must be >= 1")
    for pt in reversed(path.points):
        if pt.size == k:
            return pt.active_set
    return None


def models_by_size(path: SolutionPath) -> dict:
    """Map each visited size ``k >= 1`` to ``last_model_of_size(path, k)``."""
    out = {}
    for pt in path.points:
        if pt.size >= 1:
            out[pt.size] = pt.active_set
    return out
