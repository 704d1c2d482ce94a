import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from formvar.algebra import (
    ExteriorForm,
    FormTuple,
    format_form,
    hodge_star,
    interior_product,
    parse_form,
    scalar_product,
    wedge,
)
from formvar.errors import DegreeMismatch, DegreeOverflow, DegreeUnderflow, DimensionMismatch

e = ExteriorForm.basis_form


def test_basis_wedges():
    assert wedge(e(2, [1]), e(2, [2])) == e(2, [1, 2])
    assert wedge(e(2, [2]), e(2, [1])) == -e(2, [1, 2])
    vol = wedge(e(4, [1, 2]), e(4, [3, 4]))
    assert vol.coeffs == {(1, 2, 3, 4): 1.0}


def test_one_form_squares_to_zero(rng):
    xi = ExteriorForm.random(5, 1, rng)
    assert np.all(wedge(xi, xi).vector == 0.0)


def test_star_examples():
    assert hodge_star(e(3, [1])) == e(3, [2, 3])
    assert hodge_star(ExteriorForm.scalar(4, 1.0)) == ExteriorForm.volume(4)


def test_interior_examples():
    assert interior_product(e(2, [1]), e(2, [1, 2])) == e(2, [2])
    assert interior_product(e(2, [2]), e(2, [1])).vector.tolist() == [0.0]


def test_scalar_products(rng):
    assert scalar_product(e(3, [1, 2]), e(3, [1, 2])) == 1.0
    assert scalar_product(e(3, [1, 2]), e(3, [1, 3])) == 0.0
    xi = ExteriorForm.random(5, 2, rng)
    assert scalar_product(xi, xi) == pytest.approx(np.sum(xi.vector**2), rel=1e-14)


def test_errors():
    with pytest.raises(DegreeOverflow):
        wedge(e(3, [1, 2]), e(3, [1, 3]))
    with pytest.raises(DimensionMismatch):
        wedge(e(3, [1]), e(4, [1]))
    with pytest.raises(DegreeUnderflow):
        interior_product(e(3, [1, 2]), e(3, [1]))
    with pytest.raises(DegreeMismatch):
        scalar_product(e(3, [1]), e(3, [1, 2]))
    with pytest.raises(DimensionMismatch):
        ExteriorForm(9, 1)


def test_immutable():
    f = e(2, [1])
    with pytest.raises(AttributeError):
        f.k = 2
    with pytest.raises(ValueError):
        f.vector[0] = 3.0


def test_literals_round_trip():
    f = parse_form("2*e[1,3] - 0.5*e[2,4]")
    assert (f.n, f.k) == (4, 2)
    assert f.coeffs == {(1, 3): 2.0, (2, 4): -0.5}
    assert parse_form(format_form(f), n=4) == f
    assert parse_form("e[2,1]", n=2) == -e(2, [1, 2])
    assert parse_form("3").k == 0
    with pytest.raises(DegreeMismatch):
        parse_form("e[1] + e[1,2]")
    with pytest.raises(ValueError):
        parse_form("2*e[1] e[2]")


def test_form_tuple_checks():
    with pytest.raises(DimensionMismatch):
        FormTuple((e(2, [1]), e(3, [1])))
    xi = FormTuple((e(3, [1]), e(3, [2, 3])))
    assert xi.degrees == (1, 2) and xi.m == 2


degrees = st.tuples(st.integers(2, 6), st.integers(0, 6), st.integers(0, 6), st.integers(0, 6))


@given(degrees, st.integers(0, 2**32 - 1))
def test_associativity_and_anticommutativity(dims, seed):
    n, p, q, r = dims
    p, q, r = p % (n + 1), q % (n + 1), r % (n + 1)
    if p + q + r > n:
        return
    rng = np.random.default_rng(seed)
    a, b, c = (ExteriorForm.random(n, d, rng) for d in (p, q, r))
    lhs = wedge(wedge(a, b), c).vector
    rhs = wedge(a, wedge(b, c)).vector
    assert np.max(np.abs(lhs - rhs), initial=0.0) <= 1e-12 * (1 + a.norm() * b.norm() * c.norm())
    ab, ba = wedge(a, b).vector, wedge(b, a).vector
    assert np.allclose(ab, (-1) ** (p * q) * ba, rtol=0, atol=1e-13)


@given(st.integers(1, 6), st.integers(0, 6), st.integers(0, 2**32 - 1))
def test_star_identities(n, k, seed):
    k = k % (n + 1)
    rng = np.random.default_rng(seed)
    a = ExteriorForm.random(n, k, rng)
    b = ExteriorForm.random(n, k, rng)
    assert np.allclose(hodge_star(hodge_star(a)).vector, (-1) ** (k * (n - k)) * a.vector, atol=1e-14)
    vol = wedge(a, hodge_star(b))
    assert vol.vector[0] == pytest.approx(scalar_product(a, b), abs=1e-13)
    assert wedge(a, hodge_star(a)).vector[0] == pytest.approx(a.norm() ** 2, rel=1e-12)


@given(st.integers(1, 6), st.integers(0, 6), st.integers(0, 6), st.integers(0, 2**32 - 1))
def test_interior_is_adjoint_of_wedge(n, p, q, seed):
    p, q = p % (n + 1), q % (n + 1)
    if p + q > n:
        return
    rng = np.random.default_rng(seed)
    a, c = ExteriorForm.random(n, p, rng), ExteriorForm.random(n, q, rng)
    b = ExteriorForm.random(n, p + q, rng)
    assert scalar_product(wedge(a, c), b) == pytest.approx(scalar_product(c, interior_product(a, b)), abs=1e-13)
