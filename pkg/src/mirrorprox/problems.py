"""Two-player matrix games on ``Delta_2 x Delta_2`` as affine monotone VIs.

Player 1 minimizes ``<x1, A x1> + <x1, B x2> + <p, x1>`` and player 2
minimizes ``<x2, C x2> + <x1, D x2> + <q, x2>``. Stacking both partial
gradients gives the mapping

    F(x) = [[A + A^T, B], [D^T, C + C^T]] x + [p; q].

Problem files (``.vigame``) are JSON objects with the keys ``a``, ``b``,
``c``, ``d`` (row-major 2x2), ``p``, ``q``, ``seed``, ``eig_lo``, ``eig_hi``
and ``l_computed``; floats are written with 17 significant digits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ProductSimplex, VIProblem, spectral_norm

SUFFIX = ".vigame"
EIG_TOL = 1e-8
NORM_TOL = 1e-8
MONOTONE_TOL = 1e-10

_MATRIX_KEYS = ("a", "b", "c", "d")
_VECTOR_KEYS = ("p", "q")
_SCALAR_KEYS = ("eig_lo", "eig_hi", "l_computed")


class SpecParseError(ValueError):
    """A problem file is malformed; ``field`` names the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class SpecValidationError(ValueError):
    """A problem is well-formed but violates a structural invariant."""


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    p: np.ndarray
    q: np.ndarray
    seed: int
    eig_range: tuple
    L_computed: float

    def jacobian(self) -> np.ndarray:
        return np.block([[self.A + self.A.T, self.B],
                         [self.D.T, self.C + self.C.T]])

    def offset(self) -> np.ndarray:
        return np.concatenate([self.p, self.q])

    def to_problem(self) -> VIProblem:
        return VIProblem(ProductSimplex((2, 2)), self.jacobian(), self.offset(),
                         lipschitz=self.L_computed if self.L_computed > 0 else None)

    def player_losses(self, x1, x2):
        """Loss of each player at the joint strategy ``(x1, x2)``."""
        l1 = x1 @ self.A @ x1 + x1 @ self.B @ x2 + self.p @ x1
        l2 = x2 @ self.C @ x2 + x1 @ self.D @ x2 + self.q @ x2
        return float(l1), float(l2)

    def validate(self):
        """Raise :class:`SpecValidationError` unless every invariant holds."""
        J = self.jacobian()
        eigs = np.linalg.eigvalsh(0.5 * (J + J.T))
        lo, hi = self.eig_range
        if eigs.min() < -MONOTONE_TOL:
            raise SpecValidationError(
                f"mapping is not monotone: min eigenvalue of symmetric part {eigs.min():.6g}")
        if not (lo - EIG_TOL <= eigs.min() and eigs.max() <= hi + EIG_TOL):
            raise SpecValidationError(
                f"symmetric-part spectrum [{eigs.min():.6g}, {eigs.max():.6g}] "
                f"outside eig range [{lo}, {hi}]")
        norm = np.linalg.norm(J, 2)
        if not abs(norm - self.L_computed) <= NORM_TOL:
            raise SpecValidationError(
                f"l_computed={self.L_computed!r} differs from spectral norm {norm!r}")
        return self

    def __eq__(self, other):
        if not isinstance(other, ProblemSpec):
            return NotImplemented
        arrays = ("A", "B", "C", "D", "p", "q")
        return (all(np.array_equal(getattr(self, k), getattr(other, k)) for k in arrays)
                and self.seed == other.seed
                and tuple(self.eig_range) == tuple(other.eig_range)
                and self.L_computed == other.L_computed)


def _haar_orthogonal(rng, n):
    Z = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    return Q * np.sign(np.diag(R))


def generate_game(seed: int, eig_range=(0.0, 100.0)) -> ProblemSpec:
    """Random monotone 2x2 game whose Jacobian has a controlled symmetric part.

    The Jacobian is ``J = Q diag(lam) Q^T + K``: ``Q`` is Haar-orthogonal,
    ``lam`` is uniform on ``eig_range`` and ``K`` is skew-symmetric with
    zero diagonal blocks and ``||K||_2 <= hi / 2``. Since ``K`` only couples
    the two players, ``J`` splits exactly into ``A = J11 / 2``, ``B = J12``,
    ``D = J21^T`` and ``C = J22 / 2``. ``p`` and ``q`` are standard normal.
    """
    lo, hi = (float(v) for v in eig_range)
    if not (0.0 <= lo <= hi) or not np.isfinite(hi):
        raise ValueError(f"eig_range must satisfy 0 <= lo <= hi, got {eig_range!r}")
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    rng = np.random.default_rng(seed)

    Q = _haar_orthogonal(rng, 4)
    lam = rng.uniform(lo, hi, size=4)
    S = Q @ np.diag(lam) @ Q.T
    S = 0.5 * (S + S.T)

    coupling = rng.standard_normal((2, 2))
    cnorm = np.linalg.norm(coupling, 2)
    scale = 0.0 if cnorm == 0.0 else rng.uniform(0.0, 1.0) * (hi / 2.0) / cnorm
    coupling = coupling * scale
    K = np.block([[np.zeros((2, 2)), coupling], [-coupling.T, np.zeros((2, 2))]])

    J = S + K
    A = 0.5 * J[:2, :2]
    B = J[:2, 2:].copy()
    D = J[2:, :2].T.copy()
    C = 0.5 * J[2:, 2:]
    p = rng.standard_normal(2)
    q = rng.standard_normal(2)

    spec = ProblemSpec(A, B, C, D, p, q, seed, (lo, hi), 0.0)
    L = spectral_norm(spec.jacobian())
    return ProblemSpec(A, B, C, D, p, q, seed, (lo, hi), L)


def matching_pennies() -> ProblemSpec:
    """Zero-sum bilinear game with its unique equilibrium at the uniform point."""
    B = np.array([[1.0, -1.0], [-1.0, 1.0]])
    Z = np.zeros((2, 2))
    spec = ProblemSpec(Z, B, Z.copy(), -B, np.zeros(2), np.zeros(2), 0, (0.0, 0.0), 0.0)
    return ProblemSpec(Z, B, Z.copy(), -B, np.zeros(2), np.zeros(2), 0, (0.0, 0.0),
                       spectral_norm(spec.jacobian()))


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def dumps(spec: ProblemSpec) -> str:
    def mat(M):
        return "[" + ", ".join("[" + ", ".join(_fmt(v) for v in row) + "]" for row in M) + "]"

    def vec(v):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"

    lines = [f'  "{k}": {mat(getattr(spec, k.upper()))}' for k in _MATRIX_KEYS]
    lines += [f'  "{k}": {vec(getattr(spec, k))}' for k in _VECTOR_KEYS]
    lines += [f'  "seed": {int(spec.seed)}',
              f'  "eig_lo": {_fmt(spec.eig_range[0])}',
              f'  "eig_hi": {_fmt(spec.eig_range[1])}',
              f'  "l_computed": {_fmt(spec.L_computed)}']
    return "{\n" + ",\n".join(lines) + "\n}\n"


def _reject_constant(token):
    raise ValueError(f"non-finite number {token}")


def loads(text: str) -> ProblemSpec:
    try:
        raw = json.loads(text, parse_constant=_reject_constant)
    except ValueError as exc:
        raise SpecParseError("<file>", f"not a valid problem file ({exc})") from None
    if not isinstance(raw, dict):
        raise SpecParseError("<file>", "top level must be an object")

    def get(key):
        if key not in raw:
            raise SpecParseError(key, "missing field")
        return raw[key]

    def array(key, shape):
        value = get(key)
        try:
            arr = np.array(value, dtype=float)
        except (TypeError, ValueError):
            raise SpecParseError(key, "expected numbers") from None
        if arr.shape != shape or isinstance(value, (int, float)):
            raise SpecParseError(key, f"expected shape {shape}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise SpecParseError(key, "non-finite entry")
        return arr

    def scalar(key):
        value = get(key)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SpecParseError(key, "expected a number")
        return float(value)

    mats = {k: array(k, (2, 2)) for k in _MATRIX_KEYS}
    vecs = {k: array(k, (2,)) for k in _VECTOR_KEYS}
    seed = get("seed")
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise SpecParseError("seed", "expected an integer")
    lo, hi, L = (scalar(k) for k in _SCALAR_KEYS)
    spec = ProblemSpec(mats["a"], mats["b"], mats["c"], mats["d"], vecs["p"], vecs["q"],
                       seed, (lo, hi), L)
    return spec.validate()


def save_spec(spec: ProblemSpec, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(spec))
    return path


def load_spec(path) -> ProblemSpec:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
