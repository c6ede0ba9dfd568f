"""Update rules on products of probability simplices.

Two mirror steps are provided: the entropic (multiplicative) update with
per-block normalization, and the Euclidean step, which projects onto each
simplex block with a bisection search on the soft-threshold level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BISECTION_TOL = 1e-12
BISECTION_MAX_ITER = 200
# Positivity floor for entropic coordinates, also applied before every log.
FLOOR = 1e-100


class NumericalDegeneracyError(ArithmeticError):
    """Raised when a normalization constant underflows to zero."""


@dataclass(frozen=True)
class BlockLayout:
    """Contiguous simplex blocks inside a flat vector.

    Parameters
    ----------
    sizes : tuple of int
        Length of each block, in order.
    """

    sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise ValueError(f"block sizes must be positive, got {self.sizes!r}")
        object.__setattr__(self, "sizes", sizes)

    @property
    def dim(self) -> int:
        return sum(self.sizes)

    @property
    def offsets(self) -> tuple:
        return tuple(int(o) for o in np.concatenate(([0], np.cumsum(self.sizes)[:-1])))

    def slices(self):
        return [slice(o, o + s) for o, s in zip(self.offsets, self.sizes)]

    def block_sums(self, v: np.ndarray) -> np.ndarray:
        return np.add.reduceat(v, self.offsets)

    def expand(self, per_block: np.ndarray) -> np.ndarray:
        """Broadcast one value per block to every coordinate of that block."""
        return np.repeat(per_block, self.sizes)


def entropic_update(x, g, gamma, layout: BlockLayout) -> np.ndarray:
    """Multiplicative-weights step ``x * exp(-gamma * g)``, renormalized per block.

    This is the closed-form minimizer of ``<gamma*g - grad psi(x), z> + psi(z)``
    over the product of simplices when ``psi(z) = sum z (ln z - 1)``.
    Coordinates are floored at ``FLOOR`` afterwards so that logarithms of the
    result stay finite even if a weight underflows.
    """
    x = np.asarray(x, dtype=float)
    w = x * np.exp(-gamma * np.asarray(g, dtype=float))
    sums = layout.block_sums(w)
    if not np.all(sums > 0.0) or not np.all(np.isfinite(sums)):
        raise NumericalDegeneracyError(
            f"entropic normalization degenerate, block sums {sums.tolist()}")
    out = w / layout.expand(sums)
    return np.maximum(out, FLOOR)


def project_simplex_bisection(z) -> np.ndarray:
    """Euclidean projection of ``z`` onto the probability simplex.

    Finds the level ``tau`` with ``sum(max(z - tau, 0)) = 1`` by bisection on
    ``[min(z) - 1, max(z)]``, stopping once the bracket is narrower than
    ``BISECTION_TOL`` (at most ``BISECTION_MAX_ITER`` halvings). The
    thresholded vector is divided by its sum so that it lies exactly on the
    simplex.

    Parameters
    ----------
    z : array_like, shape (n,)

    Returns
    -------
    ndarray, shape (n,)
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size == 0:
        raise ValueError("expected a non-empty 1-d block")
    return _project_blocks(z, BlockLayout((z.size,)))


def _bisect_small(block):
    # plain floats: numpy call overhead dominates for game-sized blocks
    lo, hi = min(block) - 1.0, max(block)
    for _ in range(BISECTION_MAX_ITER):
        if hi - lo < BISECTION_TOL:
            break
        mid = 0.5 * (lo + hi)
        mass = 0.0
        for v in block:
            if v > mid:
                mass += v - mid
        if mass > 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _bisect_large(block):
    lo, hi = block.min() - 1.0, block.max()
    for _ in range(BISECTION_MAX_ITER):
        if hi - lo < BISECTION_TOL:
            break
        mid = 0.5 * (lo + hi)
        if np.maximum(block - mid, 0.0).sum() > 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _project_blocks(z: np.ndarray, layout: BlockLayout) -> np.ndarray:
    out = np.empty_like(z)
    for sl in layout.slices():
        block = z[sl]
        tau = _bisect_small(block.tolist()) if block.size <= 32 else _bisect_large(block)
        p = np.maximum(block - tau, 0.0)
        # tau is within 1e-12 of the exact level, so the block keeps positive mass
        out[sl] = p / p.sum()
    return out


def euclidean_update(x, g, gamma, layout: BlockLayout) -> np.ndarray:
    """Projected step ``Pi_X[x - gamma * g]`` on the product of simplices."""
    z = np.asarray(x, dtype=float) - gamma * np.asarray(g, dtype=float)
    return _project_blocks(z, layout)
