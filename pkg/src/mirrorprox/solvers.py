"""Popov and Korpelevich mirror-prox methods with optional per-step diagnostics.

Both methods share the two-step update from a base point ``x``::

    y~ = argmin_z <gamma*xi  - grad psi(x), z> + psi(z)
    x~ = argmin_z <gamma*eta - grad psi(x), z> + psi(z)

Korpelevich takes ``xi = F(x_t)`` and spends two fresh mapping evaluations
per step. Popov takes ``xi = F(y_t)``, reusing the evaluation made during the
previous step, so only ``eta = F(y_{t+1})`` is new.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .core import MirrorMap, VIProblem, ContractViolation

POPOV = "popov"
KORPELEVICH = "korpelevich"
METHODS = (POPOV, KORPELEVICH)

DELTA_TOL = 1e-9
DIST_TOL = 1e-8
EPS_TOL = 1e-8
RESIDUAL_TOL = 1e-6
EPS_SUM_TOL = 1e-6
H_TOL = 1e-8


class DiagnosticViolation(RuntimeError):
    """A per-step inequality failed during a strict run."""

    def __init__(self, report):
        super().__init__(report)
        self.report = report


def auto_gamma(method: str, alpha: float, L: float) -> float:
    """Step size prescribed for each method: ``alpha/(2L)`` or ``alpha/(sqrt(2) L)``."""
    if method == POPOV:
        return alpha / (2.0 * L)
    if method == KORPELEVICH:
        return alpha / (math.sqrt(2.0) * L)
    raise ValueError(f"unknown method {method!r}")


@dataclass
class SolverConfig:
    """Settings of one solver run.

    ``gamma="auto"`` resolves to :func:`auto_gamma`. ``x0``/``y0`` default to
    the uniform point of the feasible set. With ``strict=True`` (implies
    ``diagnostics=True``) the run stops at the first failed inequality.
    """

    method: str = POPOV
    mirror: str = "entropic"
    gamma: object = "auto"
    max_iters: int = 1000
    x0: np.ndarray = None
    y0: np.ndarray = None
    diagnostics: bool = False
    strict: bool = False
    timing: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ContractViolation(f"method must be one of {METHODS}, got {self.method!r}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 0:
            raise ContractViolation("max_iters must be a nonnegative integer")
        if self.gamma != "auto" and not float(self.gamma) > 0:
            raise ContractViolation("gamma must be positive or 'auto'")

    def resolve_gamma(self, mirror: MirrorMap, problem: VIProblem) -> float:
        if self.gamma == "auto":
            return auto_gamma(self.method, mirror.alpha, problem.lipschitz)
        return float(self.gamma)


@dataclass
class StepDiagnostics:
    """Quantities of the two-step analysis at iteration ``t``.

    ``*_bound`` fields hold the right-hand side of the matching inequality;
    ``h_slack`` is the smallest slack of
    ``<gamma*eta, y~ - u> <= H_u(x) - H_u(x~) + delta`` over the test points
    ``u`` (vertices of the set and ``x``).
    """

    t: int
    delta_t: float
    eps_t: float
    eps_bound: float
    dist_yx: float
    dist_yx_bound: float
    dist_yxprev: float
    opt_residual_y: float
    opt_residual_x: float
    h_slack: float

    def violations(self):
        out = []
        if self.dist_yx > self.dist_yx_bound + DIST_TOL:
            out.append(("step_distance", self.dist_yx - self.dist_yx_bound))
        if self.delta_t > self.eps_t + DELTA_TOL:
            out.append(("delta_le_eps", self.delta_t - self.eps_t))
        if self.eps_t > self.eps_bound + EPS_TOL:
            out.append(("eps_bound", self.eps_t - self.eps_bound))
        if self.opt_residual_y < -RESIDUAL_TOL:
            out.append(("opt_y", self.opt_residual_y))
        if self.opt_residual_x < -RESIDUAL_TOL:
            out.append(("opt_x", self.opt_residual_x))
        if self.h_slack < -H_TOL:
            out.append(("h_descent", self.h_slack))
        return out


def _min_linear(r, y, feasible, extra):
    """``min <r, z - y>`` over the vertices of the set and the points ``extra``."""
    layout = feasible.layout
    vertex_min = float(np.sum(np.minimum.reduceat(r, layout.offsets))) - float(r @ y)
    return min([vertex_min] + [float(r @ (z - y)) for z in extra])


def compute_step_diagnostics(x_t, y_t, y_next, x_next, problem: VIProblem,
                             mirror: MirrorMap, gamma: float, xi=None, eta=None,
                             t: int = 0) -> StepDiagnostics:
    """Evaluate delta, epsilon, distances and optimality residuals for one step.

    ``xi`` and ``eta`` default to the Popov identification
    ``xi = F(y_t)``, ``eta = F(y_next)``.
    """
    xi = problem.F(y_t) if xi is None else xi
    eta = problem.F(y_next) if eta is None else eta
    alpha = mirror.alpha
    psi = mirror.psi
    g_x, g_y = mirror.grad(x_t), mirror.grad(y_next)
    psi_x, psi_xn = psi(x_t), psi(x_next)

    delta = (gamma * float(eta @ (y_next - x_next))
             + psi_x + float(g_x @ (x_next - x_t)) - psi_xn)
    eps = (gamma * float((eta - xi) @ (y_next - x_next))
           + psi_x + float(g_x @ (y_next - x_t)) + float(g_y @ (x_next - y_next)) - psi_xn)

    dxi = float(np.linalg.norm(xi - eta))
    d_yx = float(np.linalg.norm(y_next - x_next))
    d_yxp = float(np.linalg.norm(y_next - x_t))
    eps_bound = gamma ** 2 / alpha * dxi ** 2 - 0.5 * alpha * (d_yxp ** 2 + d_yx ** 2)

    feasible = problem.set
    r_y = gamma * xi - g_x + g_y
    r_x = gamma * eta - g_x + mirror.grad(x_next)
    res_y = _min_linear(r_y, y_next, feasible, [x_t, x_next])
    res_x = _min_linear(r_x, x_next, feasible, [x_t, y_next])

    # H_u(x) - H_u(x~) is affine in u, so checking vertices and x covers the set's corners
    h_x0 = float(g_x @ x_t) - psi_x
    h_x1 = float(mirror.grad(x_next) @ x_next) - psi_xn
    slack = math.inf
    for u in list(feasible.vertices()) + [x_t]:
        lhs = gamma * float(eta @ (y_next - u))
        rhs = (h_x0 - float(g_x @ u)) - (h_x1 - float(mirror.grad(x_next) @ u)) + delta
        slack = min(slack, rhs - lhs)

    return StepDiagnostics(int(t), delta, eps, eps_bound, d_yx, gamma / alpha * dxi, d_yxp,
                           res_y, res_x, slack)


def popov_step(x_t, F_y_t, problem: VIProblem, mirror: MirrorMap, gamma: float):
    """One Popov mirror-prox step from ``x_t`` reusing the cached ``F(y_t)``.

    Returns ``(y_next, x_next, F(y_next))``; the mapping is evaluated once.
    """
    layout = problem.set.layout
    y_next = mirror.step(x_t, F_y_t, gamma, layout)
    F_y_next = problem.F(y_next)
    x_next = mirror.step(x_t, F_y_next, gamma, layout)
    return y_next, x_next, F_y_next


def korpelevich_step(x_t, problem: VIProblem, mirror: MirrorMap, gamma: float):
    """One extragradient mirror-prox step; evaluates the mapping twice.

    Returns ``(y_next, x_next, F(x_t), F(y_next))``.
    """
    layout = problem.set.layout
    F_x = problem.F(x_t)
    y_next = mirror.step(x_t, F_x, gamma, layout)
    F_y_next = problem.F(y_next)
    x_next = mirror.step(x_t, F_y_next, gamma, layout)
    return y_next, x_next, F_x, F_y_next


class _CountingProblem:
    """Forwards to a problem while counting calls to ``F``."""

    def __init__(self, problem):
        self._problem = problem
        self.evals = 0

    def __getattr__(self, name):
        return getattr(self._problem, name)

    def F(self, x):
        self.evals += 1
        return self._problem.F(x)


@dataclass
class Trace:
    """Record of a run.

    Row ``t`` of ``xs``/``ys`` holds ``x_t``/``y_t``. Row ``t >= 1`` of
    ``y_avg`` is the running average ``(y_1 + ... + y_t) / t``; row 0 repeats
    ``y_0``. ``map_evals[t]`` counts fresh mapping evaluations made once
    ``t`` steps are complete (Popov includes the warm-up evaluation of
    ``F(y_0)``). ``wall_ms`` is all zeros unless timing was requested.
    """

    config: dict
    gamma: float
    lipschitz: float
    alpha: float
    xs: np.ndarray
    ys: np.ndarray
    y_avg: np.ndarray
    map_evals: np.ndarray
    wall_ms: np.ndarray
    diagnostics: list = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.xs) - 1

    def averaged(self, t=None) -> np.ndarray:
        """The averaged iterate ``y^(t)`` (defaults to the last one)."""
        return self.y_avg[self.iterations if t is None else t]

    def eps_partial_sums(self) -> np.ndarray:
        return np.cumsum([d.eps_t for d in self.diagnostics])


def eps_sum_bound(gamma, L, alpha, x0, y0) -> float:
    """Right-hand side ``(2 gamma^2 L^2 / alpha) ||y0 - x0||^2`` of the epsilon-sum bound."""
    d = np.asarray(y0) - np.asarray(x0)
    return 2.0 * gamma ** 2 * L ** 2 / alpha * float(d @ d)


def run(config: SolverConfig, problem: VIProblem) -> Trace:
    """Run ``config.max_iters`` steps of the configured method.

    Raises
    ------
    DiagnosticViolation
        In strict mode, when an inequality of the step analysis fails, or,
        for Popov with ``gamma <= alpha/(2L)``, when a partial sum of the
        epsilons exceeds the bound on their sum.
    """
    mirror = MirrorMap(config.mirror)
    feasible = problem.set
    x = feasible.require(feasible.uniform() if config.x0 is None else config.x0, "x0")
    y = feasible.require(feasible.uniform() if config.y0 is None else config.y0, "y0")
    gamma = config.resolve_gamma(mirror, problem)
    T = int(config.max_iters)
    diagnose = config.diagnostics or config.strict
    counted = _CountingProblem(problem)

    n = feasible.dim
    xs = np.empty((T + 1, n))
    ys = np.empty((T + 1, n))
    y_avg = np.empty((T + 1, n))
    evals = np.zeros(T + 1, dtype=np.int64)
    wall = np.zeros(T + 1)
    xs[0], ys[0], y_avg[0] = x, y, y
    diags = []

    eps_sum_rhs = None
    if config.method == POPOV and gamma <= mirror.alpha / (2.0 * problem.lipschitz):
        eps_sum_rhs = eps_sum_bound(gamma, problem.lipschitz, mirror.alpha, x, y)

    F_y = counted.F(y) if config.method == POPOV else None
    evals[0] = counted.evals
    y_sum = np.zeros(n)
    eps_sum = 0.0
    clock = time.perf_counter
    for t in range(T):
        start = clock() if config.timing else 0.0
        if config.method == POPOV:
            y_next, x_next, F_y_next = popov_step(x, F_y, counted, mirror, gamma)
            xi, eta = F_y, F_y_next
        else:
            y_next, x_next, xi, eta = korpelevich_step(x, counted, mirror, gamma)
        if config.timing:
            wall[t + 1] = 1e3 * (clock() - start)

        if diagnose:
            d = compute_step_diagnostics(x, y, y_next, x_next, problem, mirror, gamma,
                                         xi=xi, eta=eta, t=t)
            diags.append(d)
            eps_sum += d.eps_t
            if config.strict:
                bad = d.violations()
                if eps_sum_rhs is not None and eps_sum > eps_sum_rhs + EPS_SUM_TOL:
                    bad.append(("eps_sum", eps_sum - eps_sum_rhs))
                if bad:
                    raise DiagnosticViolation(_format_report(t, bad))

        y_sum += y_next
        xs[t + 1], ys[t + 1] = x_next, y_next
        y_avg[t + 1] = y_sum / (t + 1)
        evals[t + 1] = counted.evals
        x, y = x_next, y_next
        if config.method == POPOV:
            F_y = F_y_next

    snapshot = asdict(config)
    snapshot["x0"] = xs[0].tolist()
    snapshot["y0"] = ys[0].tolist()
    return Trace(snapshot, gamma, problem.lipschitz, mirror.alpha, xs, ys, y_avg, evals,
                 wall, diags)


def _format_report(t, bad):
    parts = [f"{name} violated by {amount:.3e}" for name, amount in bad]
    return f"step {t}: " + "; ".join(parts)
