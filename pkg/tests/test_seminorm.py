import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ac2cd.exceptions import ContractError
from ac2cd.seminorm import inner_j, reduced_product_identity, seminorm_j

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def vec_and_index(min_n=2, max_n=12):
    return st.integers(min_n, max_n).flatmap(
        lambda n: st.tuples(arrays(float, n, elements=finite), arrays(float, n, elements=finite),
                            st.integers(0, n - 1)))


def test_inner_j_examples():
    e = np.eye(3)
    assert inner_j(e[1], e[1], 1) == 0.0
    assert inner_j([1, 2, 3], [1, 1, 1], 1) == 4.0
    assert inner_j(np.ones(3), np.ones(3), 0) == 2.0


def test_seminorm_examples():
    assert seminorm_j(np.eye(4)[2], 2) == 0.0
    assert seminorm_j([3.0, 4.0, 0.0], 2) == 5.0


def test_index_out_of_range():
    with pytest.raises(ContractError):
        inner_j([1, 2], [1, 2], 2)
    with pytest.raises(ContractError):
        seminorm_j([1, 2], -1)


def test_reduced_product_examples():
    xp = np.array([0.2, 0.3, 0.5])
    xpp = np.array([0.6, 0.1, 0.3])
    lhs, rhs = reduced_product_identity(np.full(3, 2.5), xp, xpp, 1)
    assert lhs == pytest.approx(0.0, abs=1e-15) and rhs == pytest.approx(0.0, abs=1e-15)
    assert reduced_product_identity([1.0, -2.0, 3.0], xp, xp, 0) == (0.0, 0.0)
    with pytest.raises(ContractError):
        reduced_product_identity([1.0, 1.0, 1.0], xp, xpp + 0.1, 0)


def test_reduced_product_random_simplex_pair():
    rng = np.random.default_rng(11)
    for _ in range(200):
        xp = rng.dirichlet(np.ones(5))
        xpp = rng.dirichlet(np.ones(5))
        v = rng.normal(size=5)
        lhs, rhs = reduced_product_identity(v, xp, xpp, int(rng.integers(5)))
        assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))


@settings(max_examples=200, deadline=None)
@given(vec_and_index())
def test_seminorm_inequalities(data):
    x, y, j = data
    n = x.shape[0]
    sx, sy = seminorm_j(x, j), seminorm_j(y, j)
    slack = 1e-12 * (1.0 + sx * sy)
    assert abs(inner_j(x, y, j)) <= sx * sy + slack
    others = np.abs(np.delete(x, j))
    assert others.max() <= sx * (1 + 1e-15)
    assert others.sum() <= math.sqrt(n - 1) * sx * (1 + 1e-12)
    assert sx <= math.hypot(*x.tolist()) * (1 + 1e-15)


@settings(max_examples=200, deadline=None)
@given(vec_and_index(), st.floats(-10, 10))
def test_reduced_product_property(data, b):
    v, x, j = data
    n = x.shape[0]
    xp = x / max(1.0, np.abs(x).max())
    xpp = xp[::-1].copy()
    xp += (b - xp.sum()) / n
    xpp += (b - xpp.sum()) / n
    lhs, rhs = reduced_product_identity(v, xp, xpp, j)
    # both sides are exact up to summation rounding of the terms involved
    scale = np.abs(v) @ np.abs(xp - xpp) + abs(v[j]) * np.abs(xp - xpp).sum()
    assert abs(lhs - rhs) <= 1e-12 * (1 + scale)
