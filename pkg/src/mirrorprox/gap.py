"""Dual gap ``G(x) = max_{u in X} <F(u), x - u>`` and the O(1/T) rate bound.

Two estimators are offered. :func:`estimate_gap_sampling` maximizes over
uniform random points of the product of simplices plus the point ``u = x``
itself (where the inner product vanishes); it can only underestimate the
gap. :func:`gap_grid_oracle` scans a regular grid on ``Delta_2 x Delta_2``
and adds the closed-form maximizers of the (concave quadratic) objective.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import chain

import numpy as np

from .core import ContractViolation, MirrorMap, VIProblem

DEFAULT_SAMPLES = 200_000
DEFAULT_GRID_STEP = 1e-3
CHUNK = 50_000


@dataclass(frozen=True)
class GapEstimate:
    """A dual-gap value together with how it was obtained.

    ``method`` is ``"sampling"`` (``n_samples`` and ``seed`` set) or
    ``"grid"`` (``step`` set).
    """

    value: float
    method: str
    argmax_u: np.ndarray
    n_samples: int = None
    seed: int = None
    step: float = None


def _sample_block(rng, n_points, size):
    # exponential spacings: normalized i.i.d. Exp(1) draws are uniform on the simplex
    e = rng.standard_exponential((n_points, size))
    return e / e.sum(axis=1, keepdims=True)


def sample_product_simplex(blocks, n, seed, chunk=CHUNK, workers=1):
    """``n`` uniform points of the product of simplices, shape ``(n, sum(blocks))``.

    Points are produced in fixed chunks with child seeds spawned from
    ``seed``, so the output does not depend on ``workers``.
    """
    n_chunks = -(-n // chunk)
    children = np.random.SeedSequence(seed).spawn(n_chunks)

    def make(i):
        rng = np.random.default_rng(children[i])
        m = min(chunk, n - i * chunk)
        return np.hstack([_sample_block(rng, m, b) for b in blocks])

    if workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(make, range(n_chunks)))
    else:
        parts = [make(i) for i in range(n_chunks)]
    return np.vstack(parts)


class SampledGap:
    """Sampling estimator with the sample set drawn once and reused.

    Evaluating ``<F(u), x - u> = <F(u), x> - <F(u), u>`` for many ``x`` only
    needs one matrix-vector product per call once ``F(u)`` and ``<F(u), u>``
    are cached.
    """

    def __init__(self, problem: VIProblem, n=DEFAULT_SAMPLES, seed=0, workers=1):
        if int(n) < 1:
            raise ContractViolation("number of samples must be positive")
        self.problem = problem
        self.n = int(n)
        self.seed = int(seed)
        self.U = sample_product_simplex(problem.set.blocks, self.n, self.seed, workers=workers)
        self.FU = problem.F_batch(self.U)
        self.FU_dot_U = np.einsum("ij,ij->i", self.FU, self.U)

    def __call__(self, x) -> GapEstimate:
        x = self.problem.set.require(x)
        values = self.FU @ x - self.FU_dot_U
        i = int(np.argmax(values))  # first maximal index wins ties
        if values[i] >= 0.0:
            return GapEstimate(float(values[i]), "sampling", self.U[i].copy(),
                               n_samples=self.n, seed=self.seed)
        # u = x always attains 0; it is ranked after every sample
        return GapEstimate(0.0, "sampling", x.copy(), n_samples=self.n, seed=self.seed)


def estimate_gap_sampling(problem: VIProblem, x, n=DEFAULT_SAMPLES, seed=0,
                          workers=1) -> GapEstimate:
    """Largest ``<F(u), x - u>`` over ``n`` uniform samples ``u``; deterministic in ``seed``."""
    return SampledGap(problem, n, seed, workers)(x)


def _grid_points(step):
    k = int(round(1.0 / step))
    if k < 1 or abs(k * step - 1.0) > 1e-9:
        raise ContractViolation(f"grid step must divide 1, got {step}")
    return np.linspace(0.0, 1.0, k + 1)


def _analytic_candidates(problem: VIProblem, x):
    """Maximizer candidates of ``<F(u), x - u>`` on ``u = (a, 1-a, b, 1-b)``.

    In ``z = (a, b)`` the objective is ``g.z - z^T H z + const`` with ``H``
    positive semidefinite, so its maximum over the unit square is the
    stationary point (if inside), the clipped maximum along one of the four
    edges, or a corner.
    """
    M, c = problem.matrix, problem.offset
    u0 = np.array([0.0, 1.0, 0.0, 1.0])
    E = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    H = E.T @ (0.5 * (M + M.T)) @ E
    g = E.T @ (M.T @ x - (M + M.T) @ u0 - c)

    zs = [np.array([a, b]) for a in (0.0, 1.0) for b in (0.0, 1.0)]
    z, *_ = np.linalg.lstsq(2.0 * H, g, rcond=None)
    if np.all((z >= 0.0) & (z <= 1.0)):
        zs.append(z)
    for i in (0, 1):
        j = 1 - i
        for fixed in (0.0, 1.0):
            # maximize over z_j with z_i held at an edge
            if H[j, j] > 0.0:
                zj = (g[j] - 2.0 * H[i, j] * fixed) / (2.0 * H[j, j])
                z = np.empty(2)
                z[i], z[j] = fixed, min(max(zj, 0.0), 1.0)
                zs.append(z)
    return np.array([u0 + E @ z for z in zs])


def gap_grid_oracle(problem: VIProblem, x, step=DEFAULT_GRID_STEP) -> GapEstimate:
    """Maximize ``<F(u), x - u>`` over ``u = (a, 1-a, b, 1-b)``.

    Scans a regular grid of step ``step`` and adds the analytic maximizer
    candidates of the concave quadratic objective, so the value is the exact
    maximum up to rounding. Only defined for two blocks of size 2.
    """
    if problem.set.blocks != (2, 2):
        raise ContractViolation(f"grid oracle needs blocks (2, 2), got {problem.set.blocks}")
    x = problem.set.require(x)
    grid = _grid_points(step)
    best, best_u = -np.inf, None
    # one row of the grid at a time keeps memory at O(1/step)
    b = grid
    rows = (np.column_stack([np.full_like(b, a), np.full_like(b, 1.0 - a), b, 1.0 - b])
            for a in grid)
    for U in chain(rows, [_analytic_candidates(problem, x)]):
        FU = problem.F_batch(U)
        vals = FU @ x - np.einsum("ij,ij->i", FU, U)
        j = int(np.argmax(vals))
        if vals[j] > best:
            best, best_u = float(vals[j]), U[j].copy()
    return GapEstimate(best, "grid", best_u, step=float(step))


def max_bregman_from(mirror: MirrorMap, feasible, x0) -> float:
    """``max_{u in X} B_psi(u, x0)``.

    ``B_psi(., x0)`` is convex, so the maximum over the polytope is reached
    at one of its vertices.
    """
    return max(mirror.bregman(v, x0) for v in feasible.vertices())


def theorem_bound(problem: VIProblem, mirror: MirrorMap, gamma, T, x0, y0) -> float:
    """Upper bound on ``G(y^(T))`` for Popov mirror-prox after ``T`` steps.

    ``y^(T)`` is the average of ``y_1, ..., y_T``. For ``0 < gamma <= alpha/(2L)``
    the bound is ``max_u B(u, x0) / (T gamma) + 2 gamma L^2 ||y0 - x0||^2 / (T alpha)``,
    which at ``gamma = alpha/(2L)`` reads
    ``2L max_u B(u, x0) / (T alpha) + L ||y0 - x0||^2 / T``.
    """
    L, alpha = problem.lipschitz, mirror.alpha
    if T < 1:
        raise ContractViolation("T must be at least 1")
    if not 0 < gamma <= alpha / (2.0 * L) * (1 + 1e-12):
        raise ContractViolation(f"gamma={gamma} exceeds alpha/(2L)={alpha / (2 * L)}")
    x0 = problem.set.require(x0, "x0")
    y0 = problem.set.require(y0, "y0")
    d = y0 - x0
    return (max_bregman_from(mirror, problem.set, x0) / (T * gamma)
            + 2.0 * gamma * L ** 2 * float(d @ d) / (T * alpha))
