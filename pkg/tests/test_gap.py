import math

import numpy as np
import pytest

from mirrorprox import (ContractViolation, MirrorMap, ProductSimplex, SolverConfig, VIProblem,
                        estimate_gap_sampling, gap_grid_oracle, run, theorem_bound)
from mirrorprox.gap import SampledGap, max_bregman_from, sample_product_simplex
from conftest import X22, random_point
from oracles import exact_gap_2x2

UNIFORM = np.full(4, 0.5)
ENT = MirrorMap("entropic")
EUC = MirrorMap("euclidean")


def test_zero_mapping_has_zero_gap(zero_problem):
    x = np.array([0.2, 0.8, 0.4, 0.6])
    assert estimate_gap_sampling(zero_problem, x, n=1000).value == 0.0
    assert gap_grid_oracle(zero_problem, x, step=0.01).value == 0.0


def test_matching_pennies_gap():
    from mirrorprox import matching_pennies
    problem = matching_pennies().to_problem()
    assert gap_grid_oracle(problem, UNIFORM).value == pytest.approx(0.0, abs=1e-12)
    x = np.array([1.0, 0.0, 1.0, 0.0])
    assert gap_grid_oracle(problem, x).value == pytest.approx(exact_gap_2x2(problem, x),
                                                              abs=1e-9)
    assert gap_grid_oracle(problem, x).value > 0.5


def test_estimators_are_nonnegative_lower_bounds(game42, rng):
    problem = game42.to_problem()
    est = SampledGap(problem, n=20000, seed=3)
    for _ in range(30):
        x = random_point(rng)
        ref = exact_gap_2x2(problem, x)
        assert 0.0 <= est(x).value <= ref + 1e-9
        assert 0.0 <= gap_grid_oracle(problem, x, step=0.01).value <= ref + 1e-9


def test_gap_at_equilibrium_vertex_is_zero(game42):
    problem = game42.to_problem()
    x = np.array([1.0, 0.0, 1.0, 0.0])
    est = estimate_gap_sampling(problem, x, n=5000)
    assert est.value == 0.0
    np.testing.assert_array_equal(est.argmax_u, x)
    assert gap_grid_oracle(problem, x).value == pytest.approx(0.0, abs=1e-12)


def test_grid_oracle_matches_continuous_maximum(game42, rng):
    problem = game42.to_problem()
    for _ in range(20):
        x = random_point(rng)
        ref = exact_gap_2x2(problem, x)
        for step in (0.5, 1e-3):
            assert gap_grid_oracle(problem, x, step=step).value == pytest.approx(ref, abs=1e-9)


def test_pennies_grid_matches_vertex_enumeration():
    from mirrorprox import ProductSimplex, matching_pennies
    problem = matching_pennies().to_problem()
    x = np.array([1.0, 0.0, 0.5, 0.5])
    by_vertex = max(float(problem.F(u) @ (x - u)) for u in ProductSimplex((2, 2)).vertices())
    assert gap_grid_oracle(problem, x).value == pytest.approx(by_vertex, abs=1e-9)


def test_sampling_never_exceeds_grid(game42, rng):
    problem = game42.to_problem()
    est = SampledGap(problem, n=200_000, seed=0)
    points = [random_point(rng) for _ in range(100)]
    tr = run(SolverConfig(max_iters=1000, y0=[0.9, 0.1, 0.1, 0.9]), problem)
    points += [tr.averaged(t) for t in (1, 10, 100, 1000)]
    for x in points:
        assert est(x).value <= gap_grid_oracle(problem, x, step=1e-3).value + 1e-9


def test_sampling_is_deterministic_and_worker_invariant(game42):
    problem = game42.to_problem()
    x = np.array([0.3, 0.7, 0.6, 0.4])
    a = estimate_gap_sampling(problem, x, n=120000, seed=11, workers=1)
    b = estimate_gap_sampling(problem, x, n=120000, seed=11, workers=4)
    assert a.value == b.value
    np.testing.assert_array_equal(a.argmax_u, b.argmax_u)
    U1 = sample_product_simplex((2, 3), 120001, 5, workers=1)
    U4 = sample_product_simplex((2, 3), 120001, 5, workers=3)
    assert U1.tobytes() == U4.tobytes()
    c = estimate_gap_sampling(problem, x, n=120000, seed=12)
    assert c.seed == 12 and c.n_samples == 120000


def test_samples_are_uniform_on_each_block():
    U = sample_product_simplex((2, 3), 60000, 0)
    assert U.shape == (60000, 5)
    np.testing.assert_allclose(U[:, :2].sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(U[:, 2:].sum(axis=1), 1.0, atol=1e-12)
    assert np.all(U >= 0)
    # first coordinate of a uniform point of Delta_2 is U[0, 1]; of Delta_3 it is Beta(1, 2)
    hist, _ = np.histogram(U[:, 0], bins=10, range=(0, 1))
    np.testing.assert_allclose(hist / 60000, 0.1, atol=0.01)
    assert U[:, 2].mean() == pytest.approx(1 / 3, abs=5e-3)
    assert np.mean(U[:, 2] ** 2) == pytest.approx(1 / 6, abs=5e-3)


def test_max_bregman_values():
    assert max_bregman_from(ENT, X22, UNIFORM) == pytest.approx(2 * math.log(2), abs=1e-14)
    assert max_bregman_from(EUC, X22, UNIFORM) == pytest.approx(0.5, abs=1e-15)


def test_max_bregman_matches_dense_grid(rng):
    a = np.linspace(0, 1, 201)
    A, B = np.meshgrid(a, a)
    U = np.column_stack([A.ravel(), 1 - A.ravel(), B.ravel(), 1 - B.ravel()])
    for _ in range(5):
        x0 = random_point(rng)
        for m in (ENT, EUC):
            ref = max(m.bregman(u, x0) for u in U)
            assert max_bregman_from(m, X22, x0) == pytest.approx(ref, abs=1e-12)


def test_theorem_bound_example():
    problem = VIProblem(X22, 100.0 * np.eye(4), np.zeros(4))
    assert problem.lipschitz == pytest.approx(100.0, abs=1e-12)
    b = theorem_bound(problem, ENT, 1 / 200, 1000, UNIFORM, UNIFORM)
    assert b == pytest.approx(2 * 100 * 2 * math.log(2) / 1000, rel=1e-12)
    assert round(b, 4) == 0.2773
    b_euc = theorem_bound(problem, EUC, 1 / 200, 1000, UNIFORM, UNIFORM)
    assert b_euc == pytest.approx(0.1, rel=1e-12)


def test_theorem_bound_second_term(game42):
    problem = game42.to_problem()
    L = problem.lipschitz
    y0 = np.array([0.9, 0.1, 0.1, 0.9])
    b = theorem_bound(problem, ENT, 1 / (2 * L), 10, UNIFORM, y0)
    assert b == pytest.approx(2 * L * 2 * math.log(2) / 10 + L * 0.64 / 10, rel=1e-12)


def test_theorem_bound_decreases_in_T(game42):
    problem = game42.to_problem()
    gamma = 1 / (2 * problem.lipschitz)
    vals = [theorem_bound(problem, ENT, gamma, T, UNIFORM, UNIFORM) for T in (1, 10, 100)]
    assert vals[0] > vals[1] > vals[2] > 0


def test_theorem_bound_contract(game42):
    problem = game42.to_problem()
    gamma = 1 / (2 * problem.lipschitz)
    with pytest.raises(ContractViolation):
        theorem_bound(problem, ENT, 2 * gamma, 10, UNIFORM, UNIFORM)
    with pytest.raises(ContractViolation):
        theorem_bound(problem, ENT, gamma, 0, UNIFORM, UNIFORM)


@pytest.mark.parametrize("y0", [UNIFORM, np.array([0.9, 0.1, 0.1, 0.9])])
def test_rate_bound_holds_along_run(mirror, game42, y0):
    problem = game42.to_problem()
    tr = run(SolverConfig(mirror=mirror.kind, max_iters=1000, y0=y0), problem)
    for T in (1, 10, 100, 1000):
        bound = theorem_bound(problem, mirror, tr.gamma, T, UNIFORM, y0)
        assert gap_grid_oracle(problem, tr.averaged(T), step=0.01).value <= bound


def test_grid_oracle_contract():
    problem = VIProblem(ProductSimplex((3,)), np.eye(3), np.zeros(3))
    with pytest.raises(ContractViolation):
        gap_grid_oracle(problem, np.full(3, 1 / 3))
    square = VIProblem(X22, np.eye(4), np.zeros(4))
    with pytest.raises(ContractViolation):
        gap_grid_oracle(square, UNIFORM, step=0.3)
    with pytest.raises(ContractViolation):
        gap_grid_oracle(square, [0.9, 0.9, 0.5, 0.5])
    with pytest.raises(ContractViolation):
        SampledGap(square, n=0)
