
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chiral_anomaly.clifford import (
    EPSILON,
    TRACE_SIGN,
    Gamma,
    Gamma5,
    Slash,
    epsilon,
    gamma,
    gamma5,
    identity,
    trace_product,
    trace_tensor,
)

idx = st.integers(0, 3)
rat = st.fractions(min_value=-5, max_value=5, max_denominator=7)
vec = st.tuples(rat, rat, rat, rat)
factor = st.one_of(idx.map(Gamma), st.just(Gamma5()), vec.map(Slash))


def test_gamma_squares_to_minus_identity():
    for mu in range(4):
        assert gamma(mu) @ gamma(mu) == identity().scale(-1)


@given(idx, idx)
def test_anticommutator(mu, nu):
    lhs = gamma(mu) @ gamma(nu) + gamma(nu) @ gamma(mu)
    assert lhs == identity().scale(-2 if mu == nu else 0)


def test_gamma5_properties():
    g5 = gamma5()
    assert g5 == (gamma(0) @ gamma(1) @ gamma(2) @ gamma(3)).scale(-1)
    assert g5 @ g5 == identity()
    assert g5.trace() == 0
    for mu in range(4):
        assert g5 @ gamma(mu) == (gamma(mu) @ g5).scale(-1)
        assert gamma(mu).trace() == 0


def test_index_out_of_range():
    with pytest.raises(IndexError):
        gamma(4)
    with pytest.raises(IndexError):
        epsilon(0, 1, 2, 5)


def test_trace_examples():
    assert trace_product([]) == 4
    assert trace_product([Gamma(0)]) == 0
    for mu in range(4):
        for nu in range(4):
            assert trace_product([Gamma(mu), Gamma(nu)]) == (-4 if mu == nu else 0)
    assert TRACE_SIGN in (1, -1)
    assert trace_product([Gamma5(), Gamma(0), Gamma(1), Gamma(2), Gamma(3)]) == 4 * TRACE_SIGN


def test_epsilon_examples():
    assert epsilon(0, 1, 2, 3) == 1
    assert epsilon(1, 0, 2, 3) == -1
    assert epsilon(0, 0, 2, 3) == 0
    assert EPSILON.sum() == 0 and np.abs(EPSILON).sum() == 24


@given(idx, idx, idx, idx)
def test_epsilon_matches_gamma5_trace(a, b, c, d):
    t = trace_product([Gamma5(), Gamma(a), Gamma(b), Gamma(c), Gamma(d)])
    assert t == 4 * TRACE_SIGN * epsilon(a, b, c, d)


@given(st.lists(idx, min_size=1, max_size=7).filter(lambda l: len(l) % 2 == 1))
def test_odd_traces_vanish(mus):
    assert trace_product([Gamma(m) for m in mus]) == 0


@given(st.lists(idx, min_size=0, max_size=3))
def test_gamma5_with_few_gammas_vanishes(mus):
    assert trace_product([Gamma5()] + [Gamma(m) for m in mus]) == 0


@given(st.lists(factor, min_size=1, max_size=6), st.integers(0, 5))
def test_cyclicity(fs, k):
    k %= len(fs)
    assert trace_product(fs) == trace_product(fs[k:] + fs[:k])


@given(vec, vec, rat, rat, st.lists(factor, min_size=1, max_size=4))
def test_linearity_in_slash(p, q, a, b, rest):
    mix = tuple(a * x + b * y for x, y in zip(p, q))
    lhs = trace_product([Slash(mix)] + rest)
    rhs = a * trace_product([Slash(p)] + rest) + b * trace_product([Slash(q)] + rest)
    assert lhs == rhs


def test_trace_tensor_matches_trace_product():
    t4 = trace_tensor(4)
    for a, b, c, d in [(0, 1, 2, 3), (1, 0, 3, 2), (0, 0, 1, 1)]:
        expected = trace_product([Gamma5(), Gamma(a), Gamma(b), Gamma(c), Gamma(d)])
        assert t4[a, b, c, d] == expected
