"""Compiled coordinate-descent kernels.

Both kernels are written against explicit loops so numba can compile them;
callers in :mod:`wmfselect.paths` and :mod:`wmfselect.glm` own validation.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True)
def gram_kkt(G, c, thresh, beta):
    p = c.shape[0]
    worst = 0.0
    for j in range(p):
        g = c[j]
        for k in range(p):
            g -= G[j, k] * beta[k]
        if beta[j] > 0:
            v = abs(g - thresh[j])
        elif beta[j] < 0:
            v = abs(g + thresh[j])
        else:
            v = abs(g) - thresh[j]
            if v < 0:
                v = 0.0
        if v > worst:
            worst = v
    return worst


@njit(cache=True)
def cd_gram(G, c, thresh, beta, tol, max_sweeps):
    """Minimize 0.5 b'Gb - c'b + sum_j thresh_j |b_j| in place.

    Returns (sweeps, kkt) where kkt is the final maximal KKT violation.
    """
    p = c.shape[0]
    grad = c.copy()
    for j in range(p):
        if beta[j] != 0.0:
            for k in range(p):
                grad[k] -= G[k, j] * beta[j]
    kkt = np.inf
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        for j in range(p):
            gjj = G[j, j]
            if gjj <= 0.0:
                continue
            z = grad[j] + gjj * beta[j]
            new = _soft(z, thresh[j]) / gjj
            delta = new - beta[j]
            if delta != 0.0:
                beta[j] = new
                for k in range(p):
                    grad[k] -= G[k, j] * delta
        # recompute the gradient exactly every so often to stop drift
        if sweeps % 50 == 0:
            for k in range(p):
                g = c[k]
                for m in range(p):
                    g -= G[k, m] * beta[m]
                grad[k] = g
        kkt = 0.0
        for j in range(p):
            if beta[j] > 0:
                v = abs(grad[j] - thresh[j])
            elif beta[j] < 0:
                v = abs(grad[j] + thresh[j])
            else:
                v = abs(grad[j]) - thresh[j]
                if v < 0:
                    v = 0.0
            if v > kkt:
                kkt = v
        if kkt <= tol:
            break
    return sweeps, kkt


@njit(cache=True)
def _log1pexp(t):
    if t > 0:
        return t + np.log1p(np.exp(-t))
    return np.log1p(np.exp(t))


@njit(cache=True)
def _sigmoid(t):
    if t >= 0:
        return 1.0 / (1.0 + np.exp(-t))
    e = np.exp(t)
    return e / (1.0 + e)


@njit(cache=True)
def logistic_objective(X, y, b0, beta, lam, pen, lam2):
    n, p = X.shape
    f = 0.0
    for i in range(n):
        eta = b0
        for j in range(p):
            eta += X[i, j] * beta[j]
        f += _log1pexp(eta) - y[i] * eta
    for j in range(p):
        f += lam2 * beta[j] * beta[j] + lam * pen[j] * abs(beta[j])
    return f


@njit(cache=True)
def logistic_kkt(X, y, b0, beta, lam, pen, lam2):
    """Maximal KKT violation of the penalized logistic objective."""
    n, p = X.shape
    resid = np.empty(n)
    g0 = 0.0
    for i in range(n):
        eta = b0
        for j in range(p):
            eta += X[i, j] * beta[j]
        resid[i] = y[i] - _sigmoid(eta)
        g0 += resid[i]
    worst = abs(g0)
    for j in range(p):
        s = 0.0
        for i in range(n):
            s += X[i, j] * resid[i]
        s -= 2.0 * lam2 * beta[j]
        t = lam * pen[j]
        if beta[j] > 0:
            v = abs(s - t)
        elif beta[j] < 0:
            v = abs(s + t)
        else:
            v = abs(s) - t
            if v < 0:
                v = 0.0
        if v > worst:
            worst = v
    return worst


@njit(cache=True)
def logistic_fit(X, y, b0, beta, lam, pen, lam2, tol, max_newton, max_cd):
    """Proximal Newton with CD inner solver and backtracking, in place.

    Minimizes sum(log(1+e^eta) - y*eta) + lam2*|b|^2 + lam*sum(pen_j |b_j|)
    with an unpenalized intercept. Returns (b0, newton_iters, kkt).
    """
    n, p = X.shape
    eta = np.empty(n)
    w = np.empty(n)
    z = np.empty(n)
    r = np.empty(n)
    xwx = np.empty(p)
    old_beta = np.empty(p)
    f_old = logistic_objective(X, y, b0, beta, lam, pen, lam2)
    kkt = logistic_kkt(X, y, b0, beta, lam, pen, lam2)
    it = 0
    while it < max_newton and kkt > tol:
        it += 1
        for i in range(n):
            e = b0
            for j in range(p):
                e += X[i, j] * beta[j]
            eta[i] = e
            mu = _sigmoid(e)
            wi = mu * (1.0 - mu)
            if wi < 1e-10:
                wi = 1e-10
            w[i] = wi
            z[i] = e + (y[i] - mu) / wi
            r[i] = z[i] - e
        sw = 0.0
        for i in range(n):
            sw += w[i]
        for j in range(p):
            s = 0.0
            for i in range(n):
                s += w[i] * X[i, j] * X[i, j]
            xwx[j] = s
            old_beta[j] = beta[j]
        old_b0 = b0
        nb0 = b0
        # inner accuracy tracks the outer residual; cycle on the active set
        inner_tol = 1e-3 * kkt
        if inner_tol < 1e-12:
            inner_tol = 1e-12
        full = True
        for sweep in range(max_cd):
            maxd = 0.0
            s = 0.0
            for i in range(n):
                s += w[i] * r[i]
            d0 = s / sw
            if d0 != 0.0:
                nb0 += d0
                for i in range(n):
                    r[i] -= d0
                if abs(d0) * sw > maxd:
                    maxd = abs(d0) * sw
            for j in range(p):
                if not full and beta[j] == 0.0:
                    continue
                den = xwx[j] + 2.0 * lam2
                if den <= 0.0:
                    continue
                s = 0.0
                for i in range(n):
                    s += w[i] * X[i, j] * r[i]
                num = s + xwx[j] * beta[j]
                new = _soft(num, lam * pen[j]) / den
                d = new - beta[j]
                if d != 0.0:
                    beta[j] = new
                    for i in range(n):
                        r[i] -= X[i, j] * d
                    v = abs(d) * den
                    if v > maxd:
                        maxd = v
            if maxd < inner_tol:
                if full:
                    break
                full = True
            else:
                full = False
        # backtracking on the true objective
        step = 1.0
        nbeta = beta.copy()
        trial_b0 = nb0
        f_new = logistic_objective(X, y, trial_b0, nbeta, lam, pen, lam2)
        slack = 1e-12 * (1.0 + abs(f_old))
        while f_new > f_old + slack and step > 1e-10:
            step *= 0.5
            for j in range(p):
                nbeta[j] = old_beta[j] + step * (beta[j] - old_beta[j])
            trial_b0 = old_b0 + step * (nb0 - old_b0)
            f_new = logistic_objective(X, y, trial_b0, nbeta, lam, pen, lam2)
        if f_new > f_old + slack:
            # no descent possible: keep the previous iterate and stop
            for j in range(p):
                beta[j] = old_beta[j]
            b0 = old_b0
            kkt = logistic_kkt(X, y, b0, beta, lam, pen, lam2)
            break
        for j in range(p):
            beta[j] = nbeta[j]
        b0 = trial_b0
        f_old = f_new
        kkt = logistic_kkt(X, y, b0, beta, lam, pen, lam2)
    return b0, it, kkt
