import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import hermite_e, legendre

from bayesreg.basis import (
    IndexSet,
    apply_rescale,
    enumerate_total_degree,
    evaluate_design,
    grlex_key,
    rescale_bounds,
)
from bayesreg.errors import DataError


def test_degree_zero_is_constant_only():
    s = enumerate_total_degree(2, 0)
    assert s.indices == ((0, 0),)
    assert len(s) == 1


def test_univariate_ladder():
    assert enumerate_total_degree(1, 3).indices == ((0,), (1,), (2,), (3,))


@pytest.mark.parametrize("d,k", [(1, 0), (2, 2), (3, 3), (4, 2), (2, 5)])
def test_cardinality_matches_brute_force(d, k):
    brute = [a for a in itertools.product(range(k + 1), repeat=d) if sum(a) <= k]
    s = enumerate_total_degree(d, k)
    assert len(s) == len(brute) == math.comb(d + k, d)
    assert set(s.indices) == set(brute)


def test_grlex_order():
    s = enumerate_total_degree(2, 2)
    assert s.indices == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
    keys = [grlex_key(a) for a in s.indices]
    assert keys == sorted(keys)


@given(st.integers(1, 4), st.integers(0, 4))
def test_nested_by_degree(d, k):
    assert set(enumerate_total_degree(d, k).indices) <= set(enumerate_total_degree(d, k + 1).indices)


def test_index_set_rejects_duplicates_and_sorts():
    with pytest.raises(DataError):
        IndexSet(((1, 0), (1, 0)))
    s = IndexSet(((0, 2), (0, 0), (1, 0)))
    assert s.indices == ((0, 0), (1, 0), (0, 2))
    with pytest.raises(DataError):
        IndexSet(((1,), (0, 1)))
    with pytest.raises(DataError):
        IndexSet(((0,),), family="chebyshev")


def test_monomial_product():
    x = np.array([[2.0, 3.0]])
    dm = evaluate_design(x, IndexSet(((1, 2),)))
    assert dm.values[0, 0] == 18.0


@pytest.mark.parametrize("family", ["monomial", "legendre", "hermite"])
def test_zero_index_is_ones(family, rng):
    x = rng.uniform(-1, 1, size=(7, 3))
    dm = evaluate_design(x, IndexSet(((0, 0, 0),), family))
    assert np.array_equal(dm.values, np.ones((7, 1)))


def test_legendre_p2_at_half():
    # three-term recurrence: P2 = (3 x P1 - P0) / 2
    p0, p1 = 1.0, 0.5
    p2 = (3 * 0.5 * p1 - 1 * p0) / 2
    dm = evaluate_design(np.array([[0.5]]), IndexSet(((2,),), "legendre"))
    assert dm.values[0, 0] == pytest.approx(p2) == pytest.approx(-0.125)


@pytest.mark.parametrize(
    "family,oracle",
    [("legendre", legendre.legval), ("hermite", hermite_e.hermeval)],
)
def test_families_match_numpy_series(family, oracle, rng):
    x = rng.uniform(-1, 1, size=(20, 2))
    s = enumerate_total_degree(2, 5, family)
    dm = evaluate_design(x, s)
    for j, (a1, a2) in enumerate(s.indices):
        c1 = np.zeros(a1 + 1)
        c1[-1] = 1
        c2 = np.zeros(a2 + 1)
        c2[-1] = 1
        expected = oracle(x[:, 0], c1) * oracle(x[:, 1], c2)
        np.testing.assert_allclose(dm.values[:, j], expected, rtol=1e-12, atol=1e-12)


def test_independent_of_unused_inputs(rng):
    s = IndexSet(((2, 0, 1),), "legendre")
    x = rng.uniform(-1, 1, size=(5, 3))
    x2 = x.copy()
    x2[:, 1] = rng.uniform(-1, 1, size=5)
    np.testing.assert_array_equal(evaluate_design(x, s).values, evaluate_design(x2, s).values)


def test_binary_monomial_is_column_product(rng):
    x = rng.normal(size=(9, 3))
    dm = evaluate_design(x, IndexSet(((1, 0, 1), (1, 1, 1))))
    np.testing.assert_allclose(dm.values[:, 0], x[:, 0] * x[:, 2])
    np.testing.assert_allclose(dm.values[:, 1], x[:, 0] * x[:, 1] * x[:, 2])


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_row_permutation_commutes(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, size=(8, 2))
    perm = rng.permutation(8)
    s = enumerate_total_degree(2, 3, "hermite")
    np.testing.assert_array_equal(evaluate_design(x[perm], s).values, evaluate_design(x, s).values[perm])


def test_errors():
    s = enumerate_total_degree(2, 1)
    with pytest.raises(DataError):
        evaluate_design(np.zeros((3, 3)), s)
    with pytest.raises(DataError):
        evaluate_design(np.array([[0.0, np.nan]]), s)
    with pytest.raises(DataError):
        enumerate_total_degree(0, 2)


def test_rescale_maps_to_unit_box(rng):
    x = rng.normal(size=(30, 2)) * 5 + 3
    b = rescale_bounds(x)
    z = apply_rescale(x, b)
    np.testing.assert_allclose(z.min(axis=0), -1)
    np.testing.assert_allclose(z.max(axis=0), 1)
