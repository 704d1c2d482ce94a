from itertools import combinations, product
from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from formvar.algebra import ExteriorForm, FormTuple, wedge
from formvar.errors import DegreeMismatch, DegreeOverflow
from formvar.oracles import all_minors, brute_force_tau, dict_form, dict_power
from formvar.wedge_powers import (
    MultiIndexAlpha,
    big_n,
    enumerate_alphas,
    is_nontrivial,
    t_batch,
    t_layout,
    t_vector,
    tau,
    wedge_power,
)


def test_nontriviality_examples():
    assert not is_nontrivial(3, (1,), (2,))
    assert is_nontrivial(4, (2,), (2,))
    assert not is_nontrivial(3, (2, 2), (1, 1))
    xi = FormTuple((ExteriorForm.from_coeffs(4, 2, {(1, 2): 1.0, (3, 4): 1.0}),))
    assert wedge_power(xi, (2,)).coeffs == {(1, 2, 3, 4): 2.0}


def test_enumeration_examples():
    got = [a.alpha for a in enumerate_alphas(2, (1, 1), (1, 2))]
    assert got == [(1, 0), (0, 1), (1, 1)]
    assert [a.alpha for a in enumerate_alphas(2, (2,), (1, 2))] == [(1,)]


def test_enumeration_order_is_by_order_then_reverse_lex():
    alphas = enumerate_alphas(5, (2, 1, 2), (1, 5))
    keys = [(a.order, tuple(-v for v in a.alpha)) for a in alphas]
    assert keys == sorted(keys)


@pytest.mark.parametrize("n,k,expected", [(3, (1,), 1), (6, (1,), 1), (4, (2,), 2), (4, (1, 1, 1, 1), 4)])
def test_big_n(n, k, expected):
    assert big_n(n, k) == expected


@pytest.mark.parametrize("n,k,expected", [(2, (1, 1), 5), (3, (3,), 1), (4, (2,), 7)])
def test_tau_examples(n, k, expected):
    assert tau(n, k) == expected


@pytest.mark.parametrize("m,n", [(1, 1), (2, 2), (2, 3), (3, 2), (3, 3), (3, 4)])
def test_tau_all_ones_matches_binomial(m, n):
    assert tau(n, (1,) * m) == comb(m + n, n) - 1


def test_t_vector_of_identity_and_zero(rng):
    xi = FormTuple((ExteriorForm.basis_form(2, [1]), ExteriorForm.basis_form(2, [2])))
    T = t_vector(xi)
    assert T[(1, 1)].vector.tolist() == [1.0]
    assert T.component_count == 5
    zero = FormTuple.zeros(3, (1, 2))
    assert np.all(t_vector(zero).flat() == 0.0)
    a, b, c, d = rng.normal(size=4)
    xi = FormTuple((ExteriorForm(2, 1, [a, b]), ExteriorForm(2, 1, [c, d])))
    assert t_vector(xi)[(1, 1)].vector[0] == pytest.approx(a * d - b * c, rel=1e-14)


def test_wedge_power_errors():
    xi = FormTuple((ExteriorForm.basis_form(3, [1, 2]),))
    with pytest.raises(DegreeOverflow):
        wedge_power(xi, (2,))
    with pytest.raises(DegreeMismatch):
        wedge_power(xi, (1, 1))
    with pytest.raises(ValueError):
        MultiIndexAlpha((1, -1))


@pytest.mark.parametrize("n,k", [(3, (1, 1)), (4, (2, 1)), (5, (2, 2)), (4, (1, 3)), (5, (3, 1, 1))])
def test_tau_against_brute_force(n, k, rng):
    assert tau(n, k) == brute_force_tau(n, k, rng)


@pytest.mark.parametrize("m,n", [(1, 3), (2, 2), (2, 3), (3, 3)])
def test_t_matches_minors(m, n, rng):
    X = rng.integers(-4, 5, (m, n))
    T = t_vector(FormTuple(tuple(ExteriorForm(n, 1, row) for row in X)))
    minors = all_minors(X)
    for alpha, form in T.entries:
        rows = tuple(i for i, a in enumerate(alpha) if a)
        for cols, val in zip(combinations(range(n), len(rows)), form.vector):
            assert val == minors[(rows, cols)]


def test_t_batch_agrees_with_dict_oracle(rng):
    n, k = 5, (2, 1)
    vecs = [rng.integers(-3, 4, comb(n, ki)) for ki in k]
    arrays = [v[None, :].astype(float) for v in vecs]
    flat = t_batch(arrays, n, k)[0]
    lay = t_layout(n, k)
    forms = [dict_form(n, ki, v.tolist()) for ki, v in zip(k, vecs)]
    for j, a in enumerate(lay.alphas):
        ref = dict_power(forms, a.alpha)
        got = flat[lay.slice(j)]
        for val, I in zip(got, combinations(range(n), a.weight(k))):
            assert val == ref.get(I, 0)


@given(st.integers(0, 2**32 - 1))
def test_power_is_multiplicative(seed):
    rng = np.random.default_rng(seed)
    n, k = 6, (2, 1)
    xi = FormTuple.random(n, k, rng)
    a = wedge_power(xi, (2, 1))
    b = wedge(wedge_power(xi, (1, 0)), wedge_power(xi, (1, 1)))
    assert np.allclose(a.vector, b.vector, atol=1e-13)


@given(st.integers(2, 5), st.lists(st.integers(1, 3), min_size=1, max_size=3), st.integers(0, 2**32 - 1))
def test_nontrivial_iff_some_sample_is_nonzero(n, k, seed):
    k = tuple(min(v, n) for v in k)
    rng = np.random.default_rng(seed)
    samples = [FormTuple.random(n, k, rng) for _ in range(5)]
    for alpha in product(*[range(0, n // ki + 2) for ki in k]):
        if sum(alpha) == 0 or sum(a * ki for a, ki in zip(alpha, k)) > n:
            continue
        nonzero = any(np.any(np.abs(wedge_power(x, alpha).vector) > 1e-12) for x in samples)
        assert nonzero == is_nontrivial(n, k, alpha)
