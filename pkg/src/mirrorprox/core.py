"""Domain types for monotone variational inequalities over products of simplices.

Points of the primal space and of its dual are plain 1-d float arrays; every
norm in this package is the Euclidean one.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .geometry import FLOOR, BlockLayout

FEAS_TOL = 1e-9
MONOTONE_TOL = 1e-10
LIPSCHITZ_TOL = 1e-9

ENTROPIC = "entropic"
EUCLIDEAN = "euclidean"


class ContractViolation(ValueError):
    """An argument breaks an operation's precondition."""


class DomainError(ValueError):
    """A point lies outside the domain of the distance-generating function."""


def as_vector(x, dim=None, name="x") -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ContractViolation(f"{name} must be a non-empty 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ContractViolation(f"{name} has non-finite coordinates")
    if dim is not None and v.size != dim:
        raise ContractViolation(f"{name} has dimension {v.size}, expected {dim}")
    return v


@dataclass(frozen=True)
class ProductSimplex:
    """The feasible set ``Delta_{n1} x ... x Delta_{nk}``."""

    blocks: tuple

    def __post_init__(self):
        object.__setattr__(self, "blocks", BlockLayout(tuple(self.blocks)).sizes)

    @property
    def layout(self) -> BlockLayout:
        return BlockLayout(self.blocks)

    @property
    def dim(self) -> int:
        return sum(self.blocks)

    def contains(self, x, tol=FEAS_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            return False
        if np.any(x < -tol):
            return False
        return bool(np.all(np.abs(self.layout.block_sums(x) - 1.0) <= tol))

    def uniform(self) -> np.ndarray:
        return np.concatenate([np.full(n, 1.0 / n) for n in self.blocks])

    def vertices(self):
        """Yield every vertex of the product (one simplex vertex per block)."""
        for choice in itertools.product(*(range(n) for n in self.blocks)):
            v = np.zeros(self.dim)
            for off, i in zip(self.layout.offsets, choice):
                v[off + i] = 1.0
            yield v

    def require(self, x, name="x") -> np.ndarray:
        v = as_vector(x, self.dim, name)
        if not self.contains(v):
            raise ContractViolation(f"{name} is not in the feasible set {self.blocks}")
        return v


def spectral_norm(M, rtol=1e-10, max_iter=1000) -> float:
    """Largest singular value of ``M`` by the power method on ``G = M^T M``.

    Plain power steps stall when the top singular values are nearly equal,
    so ``G`` is first squared repeatedly (normalized each time): after ``k``
    squarings the unwanted components shrink like ``(s2/s1)^(2^(k+1))``. The
    dominant column then seeds ordinary power steps with the Rayleigh
    quotient, stopped once its relative change is below ``rtol``.
    """
    M = np.asarray(M, dtype=float)
    scale = float(np.max(np.abs(M)))
    if scale == 0.0:
        return 0.0
    M = M / scale
    G = M.T @ M
    P = G / np.linalg.norm(G)
    for _ in range(64):
        P2 = P @ P
        P2 /= np.linalg.norm(P2)
        done = np.max(np.abs(P2 - P)) <= 1e-15
        P = P2
        if done:
            break
    v = P[:, int(np.argmax(np.linalg.norm(P, axis=0)))]
    v = v / np.linalg.norm(v)
    lam = float(v @ G @ v)
    for _ in range(max_iter):
        w = G @ v
        v = w / np.linalg.norm(w)
        new = float(v @ G @ v)
        converged = abs(new - lam) <= rtol * abs(new)
        lam = max(lam, new)
        if converged:
            break
    return scale * float(np.sqrt(lam))


@dataclass(frozen=True, eq=False)
class VIProblem:
    """Affine monotone VI ``find x* in X: <M x* + c, x - x*> >= 0 for all x in X``.

    Parameters
    ----------
    set : ProductSimplex
    matrix : ndarray, shape (dim, dim)
        Jacobian of the mapping.
    offset : ndarray, shape (dim,)
    lipschitz : float, optional
        Lipschitz constant of the mapping in the Euclidean norm. Computed by
        power iteration when omitted.
    """

    set: ProductSimplex
    matrix: np.ndarray
    offset: np.ndarray
    lipschitz: float = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float)
        c = as_vector(self.offset, self.set.dim, "offset").copy()
        if M.shape != (self.set.dim, self.set.dim) or not np.all(np.isfinite(M)):
            raise ContractViolation(f"matrix must be finite with shape {(self.set.dim,) * 2}")
        sym_min = float(np.linalg.eigvalsh(0.5 * (M + M.T)).min())
        if sym_min < -MONOTONE_TOL:
            raise ContractViolation(
                f"mapping is not monotone: symmetric part has eigenvalue {sym_min:.3e}")
        L = spectral_norm(M) if self.lipschitz is None else float(self.lipschitz)
        if L <= 0.0:
            # any positive constant certifies a constant mapping
            L = 1.0
        if L < np.linalg.norm(M, 2) - LIPSCHITZ_TOL:
            raise ContractViolation(f"lipschitz={L} is below the spectral norm of the matrix")
        M.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "offset", c)
        object.__setattr__(self, "lipschitz", L)

    @property
    def dim(self) -> int:
        return self.set.dim

    def F(self, x) -> np.ndarray:
        return self.matrix @ x + self.offset

    def F_batch(self, U: np.ndarray) -> np.ndarray:
        """Evaluate the mapping at every row of ``U``."""
        return U @ self.matrix.T + self.offset


def eval_mapping(problem: VIProblem, x) -> np.ndarray:
    """Return ``F(x) = M x + c``."""
    return problem.F(as_vector(x, problem.dim))


@dataclass(frozen=True)
class MirrorMap:
    """Distance-generating function on a product of simplices.

    ``kind="entropic"`` uses ``psi(x) = sum x (ln x - 1)``, whose Bregman
    divergence is the blockwise KL divergence; ``kind="euclidean"`` uses
    ``psi(x) = ||x||^2 / 2``. Both are 1-strongly convex on the product of
    simplices in the Euclidean norm.
    """

    kind: str
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in (ENTROPIC, EUCLIDEAN):
            raise ValueError(f"unknown mirror map {self.kind!r}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    def _floored(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(~(x >= 0.0)):
            raise DomainError("entropic mirror map needs nonnegative coordinates")
        return np.maximum(x, FLOOR)

    def psi(self, x) -> float:
        if self.kind == EUCLIDEAN:
            x = np.asarray(x, dtype=float)
            return 0.5 * float(x @ x)
        x = self._floored(x)
        return float(np.sum(x * (np.log(x) - 1.0)))

    def grad(self, x) -> np.ndarray:
        if self.kind == EUCLIDEAN:
            return np.array(x, dtype=float)
        return np.log(self._floored(x))

    def bregman(self, u, x) -> float:
        if self.kind == EUCLIDEAN:
            d = np.asarray(u, dtype=float) - np.asarray(x, dtype=float)
            return 0.5 * float(d @ d)
        u = self._floored(u)
        x = self._floored(x)
        # psi(u) - psi(x) - <ln x, u - x>, rearranged to avoid cancellation
        return float(np.sum(u * np.log(u / x) - u + x))

    def step(self, x, g, gamma, layout: BlockLayout) -> np.ndarray:
        """Closed-form prox step ``argmin_z <gamma*g - grad psi(x), z> + psi(z)``."""
        if self.kind == EUCLIDEAN:
            return geometry.euclidean_update(x, g, gamma, layout)
        return geometry.entropic_update(x, g, gamma, layout)


def grad_psi(mirror: MirrorMap, x) -> np.ndarray:
    return mirror.grad(as_vector(x))


def bregman(mirror: MirrorMap, u, x) -> float:
    """Bregman divergence ``psi(u) - psi(x) - <grad psi(x), u - x>``."""
    u = as_vector(u, name="u")
    return mirror.bregman(u, as_vector(x, u.size))


def prox_map(mirror: MirrorMap, feasible: ProductSimplex, x, xi) -> np.ndarray:
    """Prox-mapping ``P_x(xi) = argmin_{y in X} psi(y) + <y, xi - grad psi(x)>``."""
    x = feasible.require(x)
    xi = as_vector(xi, feasible.dim, "xi")
    return mirror.step(x, xi, 1.0, feasible.layout)


def h_u(mirror: MirrorMap, feasible: ProductSimplex, u, x) -> float:
    """Closed form of ``Omega_u(grad psi(x))`` for ``x`` in the feasible set.

    The maximizer of ``<grad psi(x), z> - psi(z)`` over the set is ``x``
    itself, giving ``<grad psi(x), x - u> - psi(x)``.
    """
    u = feasible.require(u, "u")
    x = feasible.require(x)
    return float(mirror.grad(x) @ (x - u)) - mirror.psi(x)
