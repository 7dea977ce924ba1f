"""Numeric kernels for the simplex-constrained least-squares solver.

Each kernel is written once in plain numpy that numba can compile. At import
time the kernels are wrapped with ``numba.njit`` unless the environment
variable ``VATSCM_DISABLE_NUMBA`` is set to a non-empty value other than
``0``, or numba is not importable; then the same code runs under CPython.
``benchmarks/bench_kernels.py`` times both paths.

Problem solved: minimise ``f(w) = ||y - X w||^2`` over the unit simplex,
``X`` of shape (months, donors). ``XT`` is a contiguous copy of ``X.T``.
"""

from __future__ import annotations

import os

import numpy as np

_flag = os.environ.get("VATSCM_DISABLE_NUMBA", "").strip()
DISABLED_BY_ENV = _flag not in ("", "0")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and not DISABLED_BY_ENV

# Status codes returned by the solvers.
CONVERGED = 0
MAX_ITERS = 1

_KERNELS: list[str] = []


def _kernel(fn):
    _KERNELS.append(fn.__name__)
    return fn


@_kernel
def project_simplex(v):
    """Euclidean projection of ``v`` onto {w >= 0, sum w = 1} (sort-based)."""
    n = v.shape[0]
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    theta = (css[0] - 1.0)
    for i in range(n):
        t = (css[i] - 1.0) / (i + 1)
        if u[i] - t > 0.0:
            theta = t
    w = np.maximum(v - theta, 0.0)
    return w


@_kernel
def residual(X, y, w):
    return np.dot(X, w) - y


@_kernel
def objective(X, y, w):
    r = np.dot(X, w) - y
    return np.dot(r, r)


@_kernel
def gradient(X, XT, y, w):
    r = np.dot(X, w) - y
    return 2.0 * np.dot(XT, r)


@_kernel
def kkt_stats(w, g, support_thr):
    """Return (kkt residual, Frank-Wolfe gap).

    The KKT residual is the largest excess of a supported donor's partial
    derivative over the smallest partial derivative. The gap
    ``g.w - min g`` bounds ``f(w) - f*`` from above.
    """
    gmin = np.min(g)
    kkt = 0.0
    for j in range(w.shape[0]):
        if w[j] > support_thr:
            d = g[j] - gmin
            if d > kkt:
                kkt = d
    gap = np.dot(g, w) - gmin
    if gap < 0.0:
        gap = 0.0
    return kkt, gap


@_kernel
def clamp_renormalize(w, thr):
    out = w.copy()
    for j in range(out.shape[0]):
        if out[j] < thr:
            out[j] = 0.0
    s = np.sum(out)
    if s <= 0.0:
        return w / np.sum(w)
    return out / s


@_kernel
def polish_support(X, y, w, thr):
    """Exact least squares restricted to the support of ``w``.

    Solves min ||y - X_S v||^2 s.t. sum v = 1 by eliminating the last support
    coordinate. Returns (candidate, ok); ok is False when the equality-
    constrained solution leaves the nonnegative orthant.
    """
    n = w.shape[0]
    m = X.shape[0]
    k = 0
    for j in range(n):
        if w[j] > thr:
            k += 1
    idx = np.empty(k, dtype=np.int64)
    p = 0
    for j in range(n):
        if w[j] > thr:
            idx[p] = j
            p += 1
    out = np.zeros(n)
    if k == 0:
        return out, False
    if k == 1:
        out[idx[0]] = 1.0
        return out, True
    last = idx[k - 1]
    A = np.empty((m, k - 1))
    for c in range(k - 1):
        for t in range(m):
            A[t, c] = X[t, idx[c]] - X[t, last]
    rhs = np.empty(m)
    for t in range(m):
        rhs[t] = y[t] - X[t, last]
    z = np.linalg.lstsq(A, rhs, -1.0)[0]
    total = 0.0
    for c in range(k - 1):
        out[idx[c]] = z[c]
        total += z[c]
    out[last] = 1.0 - total
    for c in range(k):
        if out[idx[c]] < -1e-12:
            return out, False
    out = np.maximum(out, 0.0)
    return out / np.sum(out), True


@_kernel
def power_iteration(G, max_iters, rtol):
    """Largest eigenvalue of a symmetric PSD matrix, deterministic start."""
    n = G.shape[0]
    # uneven start so symmetric problems (uniform weights optimal) do not
    # begin inside the null space
    v = 1.0 + 0.5 * np.sin(np.arange(1, n + 1) * 1.0)
    v = v / np.sqrt(np.dot(v, v))
    lam = 0.0
    for _ in range(max_iters):
        u = np.dot(G, v)
        nrm = np.sqrt(np.dot(u, u))
        if nrm == 0.0:
            return 0.0
        v = u / nrm
        new = np.dot(v, np.dot(G, v))
        if abs(new - lam) <= rtol * abs(new):
            return new
        lam = new
    return lam


@_kernel
def _check(X, XT, y, w, clamp_thr, support_thr):
    c = clamp_renormalize(w, clamp_thr)
    g = gradient(X, XT, y, c)
    kkt, gap = kkt_stats(c, g, support_thr)
    return c, objective(X, y, c), kkt, gap


@_kernel
def apg_solve(X, XT, y, w0, L, tol, kkt_tol, max_iters, polish_every, clamp_thr, support_thr):
    """Accelerated projected gradient (FISTA) with gradient-based restart.

    Every ``polish_every`` iterations the current support is solved exactly;
    the polished point is accepted only if it carries a KKT certificate.
    Returns (w, iterations, status, objective, kkt, gap) for the best
    certified or, failing that, lowest-objective iterate.
    """
    step = 1.0 / L
    w = project_simplex(w0)
    z = w.copy()
    t = 1.0
    best, best_f, best_kkt, best_gap = _check(X, XT, y, w, clamp_thr, support_thr)
    if best_kkt <= kkt_tol and best_gap <= tol:
        return best, 0, CONVERGED, best_f, best_kkt, best_gap
    for k in range(1, max_iters + 1):
        g = gradient(X, XT, y, z)
        w_new = project_simplex(z - step * g)
        if np.dot(z - w_new, w_new - w) > 0.0:
            t = 1.0
            z = w_new.copy()
        else:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            z = w_new + ((t - 1.0) / t_new) * (w_new - w)
            t = t_new
        w = w_new
        if k % polish_every == 0 or k == max_iters:
            c, f, kkt, gap = _check(X, XT, y, w, clamp_thr, support_thr)
            if f < best_f:
                best, best_f, best_kkt, best_gap = c, f, kkt, gap
            if kkt <= kkt_tol and gap <= tol:
                return c, k, CONVERGED, f, kkt, gap
            p, ok = polish_support(X, y, c, clamp_thr)
            if ok:
                p, pf, pkkt, pgap = _check(X, XT, y, p, clamp_thr, support_thr)
                if pkkt <= kkt_tol and pgap <= tol:
                    return p, k, CONVERGED, pf, pkkt, pgap
    return best, max_iters, MAX_ITERS, best_f, best_kkt, best_gap


@_kernel
def fw_solve(X, XT, y, w0, tol, kkt_tol, max_iters, polish_every, clamp_thr, support_thr):
    """Pairwise Frank-Wolfe with exact line search; projection-free.

    Each step shifts mass from the supported donor with the largest partial
    derivative to the donor with the smallest one.
    """
    w = w0 / np.sum(w0)
    n = w.shape[0]
    best, best_f, best_kkt, best_gap = _check(X, XT, y, w, clamp_thr, support_thr)
    if best_kkt <= kkt_tol and best_gap <= tol:
        return best, 0, CONVERGED, best_f, best_kkt, best_gap
    for k in range(1, max_iters + 1):
        r = np.dot(X, w) - y
        g = 2.0 * np.dot(XT, r)
        s = np.argmin(g)
        a = -1
        ga = -np.inf
        for j in range(n):
            if w[j] > 0.0 and g[j] > ga:
                ga = g[j]
                a = j
        if a >= 0 and a != s:
            d = XT[s] - XT[a]
            dd = np.dot(d, d)
            gamma = w[a]
            if dd > 0.0:
                gamma = min(max(-np.dot(r, d) / dd, 0.0), w[a])
            w[s] += gamma
            w[a] -= gamma
            if w[a] < 0.0:
                w[a] = 0.0
        if k % polish_every == 0 or k == max_iters:
            c, f, kkt, gap = _check(X, XT, y, w, clamp_thr, support_thr)
            if f < best_f:
                best, best_f, best_kkt, best_gap = c, f, kkt, gap
            if kkt <= kkt_tol and gap <= tol:
                return c, k, CONVERGED, f, kkt, gap
            p, ok = polish_support(X, y, c, clamp_thr)
            if ok:
                p, pf, pkkt, pgap = _check(X, XT, y, p, clamp_thr, support_thr)
                if pkkt <= kkt_tol and pgap <= tol:
                    return p, k, CONVERGED, pf, pkkt, pgap
    return best, max_iters, MAX_ITERS, best_f, best_kkt, best_gap


if USE_NUMBA:
    for _name in _KERNELS:
        globals()[_name] = numba.njit(cache=True, nogil=True)(globals()[_name])
    del _name


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
