import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpdens import polybasis


@pytest.mark.parametrize("d,m,expected", [(2, 0, 1), (2, 2, 6), (3, 1, 4), (1, 5, 6)])
def test_dim(d, m, expected):
    assert polybasis.dim(d, m) == expected


def test_dim_rejects_huge_orders():
    with pytest.raises(ValueError):
        polybasis.dim(2, 59)


def test_enumerate_examples():
    assert polybasis.enumerate(2, 1).indices == [(0, 0), (0, 1), (1, 0)]
    assert polybasis.enumerate(1, 2).indices == [(0,), (1,), (2,)]
    assert polybasis.enumerate(2, 2).indices == [(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0)]


def _precedes(a, b):
    if sum(a) != sum(b):
        return sum(a) < sum(b)
    for x, y in zip(a, b):
        if x != y:
            return x < y
    return False


@given(st.integers(1, 4), st.integers(0, 6))
@settings(max_examples=40, deadline=None)
def test_order_and_prefix(d, m):
    idx = polybasis.enumerate(d, m).indices
    assert len(idx) == math.comb(m + d, d)
    assert idx[0] == (0,) * d
    assert all(_precedes(a, b) for a, b in zip(idx, idx[1:]))
    for mp in range(m):
        assert idx[:polybasis.dim(d, mp)] == polybasis.enumerate(d, mp).indices


def test_eval_phi_examples():
    b2 = polybasis.enumerate(2, 2)
    np.testing.assert_array_equal(polybasis.eval_phi(b2, [0.0, 0.0], 0.3), [1, 0, 0, 0, 0, 0])
    b1 = polybasis.enumerate(2, 1)
    np.testing.assert_allclose(polybasis.eval_phi(b1, [0.2, 0.2], 0.2), [1, 1, 1])
    np.testing.assert_allclose(polybasis.eval_phi(b2, [0.2, 0.4], 0.4), [1, 1, 0.5, 1, 0.5, 0.25], rtol=1e-15)


@given(st.lists(st.floats(-1, 1), min_size=2, max_size=2), st.floats(0.01, 2.0))
@settings(max_examples=60, deadline=None)
def test_eval_phi_bounded_and_scale_free(v, h):
    basis = polybasis.enumerate(2, 4)
    u = np.array(v) * h
    phi = polybasis.eval_phi(basis, u, h)
    assert np.all(np.abs(phi) <= 1 + 1e-12)
    np.testing.assert_allclose(phi, polybasis.eval_phi(basis, u / h, 1.0), rtol=1e-12, atol=1e-15)


def test_eval_phi_batch_matches_single(rng):
    basis = polybasis.enumerate(3, 3)
    U = rng.uniform(-1, 1, (7, 3))
    batch = polybasis.eval_phi(basis, U, 0.7)
    for i in range(7):
        np.testing.assert_array_equal(batch[i], polybasis.eval_phi(basis, U[i], 0.7))
