import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from mirrorprox.geometry import (BlockLayout, NumericalDegeneracyError, entropic_update,
                                 euclidean_update, project_simplex_bisection)
from oracles import argmin_on_segment, project_simplex_sort, xlogx_minus_x

L22 = BlockLayout((2, 2))


def test_layout_offsets_cover_dimension():
    lay = BlockLayout((2, 3, 1))
    assert lay.offsets == (0, 2, 5)
    assert lay.dim == 6
    assert [s.indices(6) for s in lay.slices()] == [(0, 2, 1), (2, 5, 1), (5, 6, 1)]
    with pytest.raises(ValueError):
        BlockLayout((2, 0))


@pytest.mark.parametrize("z, expected", [
    ((0.3, 0.7), (0.3, 0.7)),
    ((2.0, 0.0), (1.0, 0.0)),
    ((0.6, 0.6), (0.5, 0.5)),
])
def test_projection_examples(z, expected):
    np.testing.assert_allclose(project_simplex_bisection(z), expected, atol=1e-12)


def test_projection_vertex_matches_sort_oracle():
    np.testing.assert_allclose(project_simplex_bisection([2.0, 0.0]),
                               project_simplex_sort([2.0, 0.0]), atol=1e-12)


@pytest.mark.parametrize("n", [2, 3, 10, 50])
def test_projection_agrees_with_sort_oracle(n, rng):
    for _ in range(1000 if n <= 10 else 100):
        z = rng.normal(scale=rng.choice([0.1, 1.0, 10.0]), size=n)
        np.testing.assert_allclose(project_simplex_bisection(z), project_simplex_sort(z),
                                   atol=1e-8)


@pytest.mark.parametrize("n", [2, 3, 10])
def test_projection_idempotent_and_optimal(n, rng):
    for _ in range(100):
        z = rng.normal(scale=3.0, size=n)
        p = project_simplex_bisection(z)
        np.testing.assert_allclose(project_simplex_bisection(p), p, atol=1e-10)
        dist = np.linalg.norm(p - z)
        others = rng.dirichlet(np.ones(n), size=100)
        assert np.all(dist <= np.linalg.norm(others - z, axis=1) + 1e-10)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 12),
              elements=st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)))
def test_projection_lands_on_simplex(z):
    p = project_simplex_bisection(z)
    assert np.all(p >= 0.0)
    assert abs(p.sum() - 1.0) <= 1e-12
    np.testing.assert_allclose(p, project_simplex_sort(z), atol=1e-8)


def test_entropic_update_zero_direction_is_identity():
    x = np.array([0.2, 0.8, 0.6, 0.4])
    np.testing.assert_allclose(entropic_update(x, np.zeros(4), 0.3, L22), x, rtol=0, atol=1e-15)


def test_entropic_update_halving_example():
    # 0.5 e^{-ln 2} = 0.25 and 0.5 e^0 = 0.5, normalized to (1/3, 2/3)
    out = entropic_update([0.5, 0.5], [np.log(2.0), 0.0], 1.0, BlockLayout((2,)))
    np.testing.assert_allclose(out, [1 / 3, 2 / 3], atol=1e-15)


def test_entropic_update_positive_and_normalized(rng):
    lay = BlockLayout((2, 3, 4))
    for _ in range(200):
        x = np.concatenate([rng.dirichlet(np.ones(n)) for n in lay.sizes])
        g = rng.normal(scale=50.0, size=lay.dim)
        out = entropic_update(x, g, 0.05, lay)
        assert np.all(out > 0)
        np.testing.assert_allclose(lay.block_sums(out), 1.0, atol=1e-12)


def test_entropic_update_degenerate_block_raises():
    with pytest.raises(NumericalDegeneracyError):
        entropic_update([0.0, 0.0, 0.5, 0.5], np.zeros(4), 1.0, L22)


def entropic_grid_argmin(x, g, gamma):
    """Blockwise minimizer of <gamma g - grad psi(x), z> + psi(z) on Delta_2 x Delta_2."""
    out = []
    for sl in (slice(0, 2), slice(2, 4)):
        c = gamma * g[sl] - np.log(x[sl])

        def f(a, c=c):
            return c[0] * a + c[1] * (1.0 - a) + xlogx_minus_x(a) + xlogx_minus_x(1.0 - a)

        a, _ = argmin_on_segment(f)
        out += [a, 1.0 - a]
    return np.array(out)


def test_entropic_update_matches_grid_argmin(rng):
    for _ in range(100):
        x = np.concatenate([rng.dirichlet(np.ones(2)) for _ in range(2)])
        x = np.clip(x, 1e-3, None)
        x /= np.repeat(L22.block_sums(x), 2)
        g = rng.normal(scale=20.0, size=4)
        gamma = rng.uniform(0.001, 0.1)
        np.testing.assert_allclose(entropic_update(x, g, gamma, L22),
                                   entropic_grid_argmin(x, g, gamma), atol=1e-6)


def test_euclidean_update_examples():
    x = np.array([0.3, 0.7, 0.5, 0.5])
    np.testing.assert_allclose(euclidean_update(x, np.zeros(4), 0.7, L22), x, atol=1e-12)
    out = euclidean_update([0.5, 0.5], [1.0, 0.0], 1.0, BlockLayout((2,)))
    np.testing.assert_allclose(out, [0.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(out, project_simplex_sort([-0.5, 0.5]), atol=1e-12)


def test_euclidean_update_is_blockwise_projection(rng):
    lay = BlockLayout((3, 2, 10))
    for _ in range(50):
        x = rng.normal(size=lay.dim)
        g = rng.normal(size=lay.dim)
        out = euclidean_update(x, g, 0.4, lay)
        z = x - 0.4 * g
        expected = np.concatenate([project_simplex_bisection(z[s]) for s in lay.slices()])
        np.testing.assert_array_equal(out, expected)
