"""Reference computations used only by the tests."""

import numpy as np
from scipy.optimize import minimize_scalar


def project_simplex_sort(v):
    """Exact Euclidean projection onto the simplex by sorting (O(n log n))."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u + (1.0 - css) / k > 0)[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def argmin_on_segment(f, step=1e-4):
    """Minimize a convex ``f(a)`` over ``a in [0, 1]``: grid scan, then a bounded polish.

    ``f`` must accept an array of ``a`` values as well as a scalar.
    """
    grid = np.linspace(0.0, 1.0, int(round(1 / step)) + 1)
    vals = np.asarray(f(grid), dtype=float)
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(lambda a: float(f(a)), bounds=(lo, hi), method="bounded",
                          options=dict(xatol=1e-13, maxiter=500))
    best = min([(vals[i], grid[i]), (res.fun, res.x)])
    return best[1], best[0]


def xlogx_minus_x(z):
    """Elementwise ``z (ln z - 1)`` with the convention ``0 ln 0 = 0``."""
    z = np.asarray(z, dtype=float)
    safe = np.where(z > 0, z, 1.0)
    return np.where(z > 0, z * (np.log(safe) - 1.0), 0.0)


def entropy_psi(z):
    return float(np.sum(xlogx_minus_x(z)))


def bregman_literal(psi, grad, u, x):
    return psi(u) - psi(x) - float(grad(x) @ (np.asarray(u) - np.asarray(x)))


def exact_gap_2x2(problem, x, starts=9):
    """max_u <F(u), x - u> over Delta_2 x Delta_2 by multistart bounded optimization.

    The objective is a concave quadratic in (a, b), so any local maximum is global;
    corners are checked explicitly.
    """
    from scipy.optimize import minimize

    def neg(ab):
        a, b = ab
        u = np.array([a, 1 - a, b, 1 - b])
        return -float(problem.F(u) @ (x - u))

    best = max(-neg((a, b)) for a in (0.0, 1.0) for b in (0.0, 1.0))
    for a0 in np.linspace(0.05, 0.95, starts):
        for b0 in (0.1, 0.5, 0.9):
            r = minimize(neg, (a0, b0), bounds=[(0, 1), (0, 1)], method="L-BFGS-B",
                         options=dict(ftol=1e-15, gtol=1e-12))
            best = max(best, -r.fun)
    return best
