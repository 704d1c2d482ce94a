import numpy as np
import pytest

from formvar.algebra import ExteriorForm, FormTuple
from formvar.errors import DegreeMismatch, DimensionMismatch, NotConvex
from formvar.integrands import (
    Growth,
    NormPower,
    PolyconvexComposite,
    QuasiaffineCombo,
    Sampled,
    SumOf,
    evaluate,
    gradient,
    spec_from_dict,
    spec_to_dict,
)

e = ExteriorForm.basis_form


def identity_rows():
    return FormTuple((e(2, [1]), e(2, [2])))


def test_evaluate_examples():
    assert evaluate(QuasiaffineCombo(2, (1, 1), 3.0), FormTuple.zeros(2, (1, 1))) == 3.0
    det = QuasiaffineCombo(2, (1, 1), 0.0, {(1, 1): [1.0]})
    assert evaluate(det, identity_rows()) == 1.0
    assert evaluate(NormPower(2, (1, 1), (1.0, 2.0), (3.0, 1.5)), FormTuple.zeros(2, (1, 1))) == 0.0


def test_evaluate_checks_shapes():
    spec = NormPower(3, (1, 2))
    with pytest.raises(DegreeMismatch):
        evaluate(spec, FormTuple.zeros(3, (1, 1)))
    with pytest.raises(DimensionMismatch):
        evaluate(spec, FormTuple.zeros(2, (1, 2)))
    with pytest.raises(DegreeMismatch):
        QuasiaffineCombo(3, (1,), 0.0, {(2,): [1.0, 0, 0]})


def test_psd_rejected():
    t = 5
    with pytest.raises(NotConvex):
        PolyconvexComposite(2, (1, 1), Q=-np.eye(t))


@pytest.mark.parametrize("spec", [
    NormPower(3, (1, 2), (1.0, 0.5), (2.0, 3.0)),
    QuasiaffineCombo.random(4, (2, 1), np.random.default_rng(0)),
    PolyconvexComposite.random_quadratic(3, (1, 1), np.random.default_rng(1)),
])
def test_gradient_matches_finite_differences(spec, rng):
    xi = FormTuple.random(spec.n, spec.k, rng)
    grads = gradient(spec, xi)
    num = Sampled(spec.n, spec.k, spec.evaluate_batch).gradient_batch(xi.arrays())
    for g, ng in zip(grads, num):
        assert np.allclose(g, ng[0], atol=1e-6)


def test_max_of_affine_is_a_max(rng):
    A = rng.normal(size=(4, 5))
    b = rng.normal(size=4)
    spec = PolyconvexComposite(2, (1, 1), A=A, b=b)
    xi = FormTuple.random(2, (1, 1), rng)
    from formvar.wedge_powers import t_vector
    T = t_vector(xi).flat()
    assert evaluate(spec, xi) == pytest.approx(np.max(A @ T + b))


def test_arithmetic_builds_sums(rng):
    f = NormPower(2, (1,))
    g = QuasiaffineCombo(2, (1,), 1.0, {(1,): [1.0, 2.0]})
    xi = FormTuple.random(2, (1,), rng)
    assert evaluate(f - g, xi) == pytest.approx(evaluate(f, xi) - evaluate(g, xi))
    assert evaluate(2.0 * f + g, xi) == pytest.approx(2 * evaluate(f, xi) + evaluate(g, xi))
    assert evaluate(-f, xi) == pytest.approx(-evaluate(f, xi))
    with pytest.raises(DegreeMismatch):
        SumOf((f, NormPower(2, (2,))))


def test_json_round_trip(rng):
    specs = [
        QuasiaffineCombo.random(3, (1, 1), rng),
        PolyconvexComposite.random_quadratic(2, (1, 1), rng, growth=Growth((2.0, 2.0), lower=0.1)),
        PolyconvexComposite(2, (1, 1), A=rng.normal(size=(3, 5)), b=rng.normal(size=3)),
        NormPower(3, (2,), (0.5,), (3.0,)),
    ]
    specs.append(SumOf((specs[1], specs[2]), (1.0, 2.0)))
    xi = [FormTuple.random(s.n, s.k, rng) for s in specs]
    for s, x in zip(specs, xi):
        back = spec_from_dict(spec_to_dict(s))
        assert evaluate(back, x) == pytest.approx(evaluate(s, x), rel=1e-14)


def test_json_literals_and_unknown_fields():
    d = {"type": "quasiaffine", "n": 4, "k": [2], "coeffs": {"1": "e[1,2] - e[3,4]", "2": [2.0]}}
    spec = spec_from_dict(d)
    assert spec.coeffs[(1,)].tolist() == [1.0, 0, 0, 0, 0, -1.0]
    with pytest.raises(ValueError):
        spec_from_dict({**d, "extra": 1})
    with pytest.raises(ValueError):
        spec_from_dict({"type": "mystery", "n": 2, "k": [1]})
