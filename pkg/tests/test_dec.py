import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from formvar.algebra import ExteriorForm
from formvar.dec import (
    RES_CAP,
    Cochain,
    CubicalGrid,
    cell_values,
    coboundary,
    codifferential,
    coexact_part,
    coexact_stability,
    cup,
    hodge_decompose,
    interior_codifferential,
    lp_norm,
    sample_form,
)
from formvar.errors import BadExponent, DegreeZero, EvalError, GridMismatch, TopDegree


def test_grid_limits():
    with pytest.raises(GridMismatch):
        CubicalGrid(3, RES_CAP[3] + 1)
    g = CubicalGrid(2, 4)
    assert g.count(0) == 25 and g.count(1) == 40 and g.count(2) == 16


def test_constant_function_is_closed():
    g = CubicalGrid(2, 6)
    c = Cochain(g, 0, np.full(g.count(0), 3.0))
    assert np.all(coboundary(c).values == 0.0)


@pytest.mark.parametrize("n,res", [(2, 7), (3, 5), (4, 3)])
def test_d_and_delta_square_to_zero_exactly(n, res, rng):
    g = CubicalGrid(n, res)
    for k in range(n - 1):
        assert np.all((g.d(k + 1) @ g.d(k)).data == 0)
        w = Cochain(g, k, rng.integers(-9, 10, g.count(k)))
        assert np.all(coboundary(coboundary(w)).values == 0.0)
    for k in range(2, n + 1):
        w = Cochain.random(g, k, rng)
        dd = codifferential(codifferential(w))
        assert np.max(np.abs(dd.values)) <= 1e-12 * np.max(np.abs(w.values)) * res**4


def test_constant_top_form_is_coclosed_inside():
    g = CubicalGrid(2, 8)
    w = sample_form(g, ExteriorForm.volume(2) * 2.5)
    assert np.max(np.abs(interior_codifferential(w).values)) <= 1e-12
    with pytest.raises(DegreeZero):
        codifferential(Cochain.zeros(g, 0))


@given(st.integers(2, 3), st.integers(0, 2), st.integers(0, 2**32 - 1))
def test_integration_by_parts(n, k, seed):
    if k >= n:
        return
    rng = np.random.default_rng(seed)
    g = CubicalGrid(n, 5)
    a = Cochain.random(g, k, rng)
    b = Cochain.random(g, k + 1, rng)
    assert coboundary(a).dot(b) == pytest.approx(a.dot(codifferential(b, "free")), rel=1e-10, abs=1e-12)
    a0 = Cochain.random(g, k, rng, tangential_zero=True)
    lhs, rhs = coboundary(a0).dot(b), a0.dot(codifferential(b, "tangential-zero"))
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("bc", ["tangential-zero", "free"])
def test_decomposition_residuals(n, bc, rng):
    g = CubicalGrid(n, 16 if n == 2 else 8)
    for k in range(n + 1):
        split = hodge_decompose(Cochain.random(g, k, rng), bc)
        for key in ("reconstruction", "exact_coexact", "exact_harmonic", "coexact_harmonic"):
            assert split.residuals[key] <= 1e-9, (k, key)


def test_exact_input_round_trips(rng):
    g = CubicalGrid(2, 12)
    w = coboundary(Cochain.random(g, 0, rng, tangential_zero=True))
    split = hodge_decompose(w)
    assert split.coexact.norm() <= 1e-9 * w.norm()
    assert split.harmonic.norm() <= 1e-9 * w.norm()


def test_coexact_input_round_trips(rng):
    g = CubicalGrid(2, 12)
    beta = Cochain.random(g, 2, rng, tangential_zero=True)
    w = codifferential(beta, "tangential-zero")
    split = hodge_decompose(w)
    assert (split.coexact - w).norm() <= 1e-9 * w.norm()


def test_zero_and_closed_inputs(rng):
    g = CubicalGrid(3, 5)
    split = hodge_decompose(Cochain.zeros(g, 1))
    assert all(part.norm() == 0.0 for part in split.parts())
    # forms with boundary values are only closed in the free complex
    closed = coboundary(Cochain.random(g, 0, rng))
    assert coexact_part(closed, "free").norm() <= 1e-9 * closed.norm()
    const = sample_form(g, ExteriorForm(3, 1, [1.0, -2.0, 0.5]))
    assert coexact_part(const, "free").norm() <= 1e-9 * const.norm()
    closed0 = coboundary(Cochain.random(g, 0, rng, tangential_zero=True))
    assert coexact_part(closed0).norm() <= 1e-9 * closed0.norm()


def test_coexact_stability_bounded(rng):
    g = CubicalGrid(2, 16)
    w = sample_form(g, {"1": "sin(pi*x2)*x1", "2": "x1**2"}, 1)
    c = coexact_stability(w)
    assert 0 < c < 10
    with pytest.raises(TopDegree):
        coexact_stability(Cochain.random(g, 2, rng))


def test_single_cell_norm():
    g = CubicalGrid(2, 8)
    v = np.zeros(g.count(1))
    j = int(np.flatnonzero(~g.touch_mask(1))[0])
    v[j] = 0.3
    w = Cochain(g, 1, v)
    h = g.h
    for p in (1.0, 2.0, 3.5):
        assert lp_norm(w, p) == pytest.approx((abs(0.3 / h) ** p * h**2) ** (1 / p), rel=1e-14)
    with pytest.raises(BadExponent):
        lp_norm(w, 0.5)


def test_unit_form_has_unit_norm():
    norms = [lp_norm(sample_form(CubicalGrid(2, r), {"1": "1"}, 1), 3) for r in (4, 16, 64)]
    assert norms[-1] == pytest.approx(1.0, abs=1e-12)


def test_constant_sampling_is_exact():
    g = CubicalGrid(3, 4)
    f = ExteriorForm(3, 2, [1.0, 2.0, -3.0])
    w = sample_form(g, f)
    assert np.allclose(cell_values(w), f.vector[None, :], rtol=0, atol=1e-14)
    w2 = sample_form(g, {"1,2": "1", "1,3": "2", "2,3": "-3"}, 2)
    assert np.allclose(w.values, w2.values, atol=1e-15)


def test_sine_sampling_matches_antiderivative():
    g = CubicalGrid(2, 32)
    w = sample_form(g, {"2": "sin(2*pi*x1)"}, 1)
    off = g.offsets(1)[(1,)]
    shape = g.block_shape((1,))
    vals = w.values[off: off + int(np.prod(shape))].reshape(shape)
    x = np.arange(shape[0]) * g.h
    exact = np.sin(2 * np.pi * x) * g.h
    assert np.max(np.abs(vals - exact[:, None])) < 1e-6


def test_bad_expressions():
    g = CubicalGrid(2, 4)
    with pytest.raises(EvalError):
        sample_form(g, {"1": "log(x1 - 2)"}, 1)
    with pytest.raises(EvalError):
        sample_form(g, {"1": "x1"})


def test_json_round_trip(rng):
    w = Cochain.random(CubicalGrid(3, 3), 2, rng)
    back = Cochain.from_json(w.to_json())
    assert np.array_equal(back.values, w.values) and back.k == 2
    with pytest.raises(ValueError):
        Cochain.from_dict({**w.to_dict(), "extra": 0})


@given(st.integers(0, 2), st.integers(0, 2), st.integers(0, 2**32 - 1))
def test_cup_leibniz(k, l, seed):
    n = 3
    if k + l + 1 > n:
        return
    rng = np.random.default_rng(seed)
    g = CubicalGrid(n, 3)
    a, b = Cochain.random(g, k, rng), Cochain.random(g, l, rng)
    lhs = coboundary(cup(a, b))
    rhs = cup(coboundary(a), b) + (-1) ** k * cup(a, coboundary(b))
    assert np.allclose(lhs.values, rhs.values, atol=1e-12)


def test_integral_of_perturbed_power_is_constant(rng):
    # int (xi + d omega)^alpha = xi^alpha for zero-boundary omega, every nontrivial alpha
    from formvar.convexity import bump_fields
    from formvar.wedge_powers import enumerate_alphas, power_batch

    n, k = 3, (1, 2)
    g = CubicalGrid(n, 8)
    xi = [rng.uniform(-1, 1, (1, 3)) for _ in k]
    for fields in bump_fields(g, k, rng, count=2):
        arrays = [cell_values(coboundary(phi)) + x for phi, x in zip(fields, xi)]
        for a in enumerate_alphas(n, k, (1, n)):
            avg = power_batch(arrays, n, k, a).mean(axis=0)
            assert np.allclose(avg, power_batch(xi, n, k, a)[0], atol=5 * g.h)
