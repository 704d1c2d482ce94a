import numpy as np
import pytest

from formvar.dec import Cochain, CubicalGrid, coboundary, lp_norm
from formvar.errors import BadDegree, BoundaryTrace, FrequencyVsResolution, InadmissibleExponents
from formvar.integrands import NormPower, QuasiaffineCombo, Sampled
from formvar.weakcont import (
    SequenceRecipe,
    all_slots,
    bump_test_form,
    closed_nonconvergent_recipe,
    determinant_pairing,
    direct_wedge_eval,
    div_curl_recipe,
    div_curl_weight,
    generate,
    pairing,
    semicontinuity_counterexample,
    slot_sign,
    slot_spread,
    telescopic_terms,
    very_weak_wedge_eval,
    weak_continuity_experiment,
    weak_wedge_eval,
    weight_values,
)


def smooth_recipe(n=2, res=16, k=(1, 1), amplitude=0.7, axis=1):
    base = {1: [{"": "x1*x2 + x2**2"}, {"": f"sin(x1) + x{n}**3"}, {"": "x1**2 - x2"}],
            2: [{"1": "x2**2", "2": "x1*x2"}, {"1": "x1*x2", "2": "x1"}]}
    pots = []
    for t, ki in enumerate(k):
        pots.append(base[ki][t] if ki == 1 or n == 2 else {"1": "x2*x3", "3": "x1**2"})
    return SequenceRecipe("laminate", n, res, k, tuple(pots), amplitude=amplitude, axis=axis)


def test_recipe_validation():
    with pytest.raises(BadDegree):
        SequenceRecipe("closed-nonconvergent", 2, 16, (1,))
    with pytest.raises(ValueError):
        SequenceRecipe("spiral", 2, 16, (1,))
    with pytest.raises(ValueError):
        SequenceRecipe.from_dict({"kind": "laminate", "n": 2, "res": 8, "k": [1], "colour": "red"})
    r = smooth_recipe()
    assert SequenceRecipe.from_dict(r.to_dict()) == r


def test_zero_amplitude_gives_constant_sequence():
    r = smooth_recipe(amplitude=0.0)
    base = generate(r, 0).omegas
    for nu in (1, 2, 3):
        assert all(np.array_equal(a.values, b.values) for a, b in zip(generate(r, nu).omegas, base))


def test_frequency_cap():
    with pytest.raises(FrequencyVsResolution):
        generate(smooth_recipe(res=16), 4)


def test_closed_sequence_does_not_converge_strongly():
    r = closed_nonconvergent_recipe(res=64, amplitude=0.8)
    w0 = generate(r, 0).omegas[0]
    assert np.max(np.abs(coboundary(generate(r, 3).omegas[0]).values)) <= 1e-12
    for nu in (2, 4, 8):
        diff = generate(r, nu).omegas[0] - w0
        assert lp_norm(diff, 2) ** 2 == pytest.approx(0.8**2 / 2, rel=0.1)


def test_slot_signs():
    assert slot_sign((1, 1), (1, 1), (1, 1)) == 1
    assert slot_sign((1, 1), (1, 1), (2, 1)) == -1
    assert slot_sign((2, 1), (1, 1), (2, 1)) == 1
    assert all_slots((2, 1)) == [(1, 1), (1, 2), (2, 1)]


def test_zero_forms_pair_to_zero():
    g = CubicalGrid(2, 8)
    om = (Cochain.zeros(g, 0), Cochain.zeros(g, 0))
    psi = bump_test_form(g, 2)
    assert weak_wedge_eval(om, (1, 1), psi) == 0.0
    assert very_weak_wedge_eval(om, (1, 1), psi) == 0.0


def test_test_form_must_vanish_on_boundary(rng):
    g = CubicalGrid(2, 8)
    om = (Cochain.random(g, 0, rng), Cochain.random(g, 0, rng))
    with pytest.raises(BoundaryTrace):
        weak_wedge_eval(om[:1], (1,), Cochain(g, 1, np.ones(g.count(1))))
    with pytest.raises(InadmissibleExponents):
        weak_wedge_eval(om, (1, 1), bump_test_form(g, 2), p=("11/10", "11/10"))


@pytest.mark.parametrize("n,k,alpha", [(2, (1, 1), (1, 1)), (3, (1, 1, 1), (1, 1, 1)), (3, (1, 2), (1, 1))])
def test_slot_independence(n, k, alpha):
    r = smooth_recipe(n=n, res=16 if n == 2 else 8, k=k, axis=2)
    om = generate(r, 1).omegas
    psi = bump_test_form(r.grid, sum(a * ki for a, ki in zip(alpha, k)))
    spread, vals = slot_spread(om, alpha, psi)
    assert spread <= 1e-9 * max(1.0, max(abs(v) for v in vals))
    vw_spread, _ = slot_spread(om, alpha, psi, very_weak=True)
    assert vw_spread <= 1e-9 * max(1.0, max(abs(v) for v in vals))


def test_weak_very_weak_and_direct_agree_to_first_order():
    errs = []
    for res in (16, 32):
        r = smooth_recipe(res=res, amplitude=0.0)
        om = generate(r, 0).omegas
        psi = bump_test_form(r.grid, 2)
        w = weak_wedge_eval(om, (1, 1), psi)
        assert very_weak_wedge_eval(om, (1, 1), psi) == pytest.approx(w, abs=1e-10)
        errs.append(abs(w - direct_wedge_eval(om, (1, 1), psi)))
    assert errs[1] <= 0.6 * errs[0]


def test_telescopic_terms_edge_cases():
    r = smooth_recipe(res=16)
    xi = generate(r, 1).omegas
    psi = bump_test_form(r.grid, 2)
    lhs, rhs = telescopic_terms(xi, xi, (1, 1), psi, (2, 2))
    assert lhs == 0.0 and rhs == 0.0
    zero = tuple(Cochain.zeros(r.grid, 0) for _ in xi)
    lhs, rhs = telescopic_terms(xi, zero, (1, 1), psi, (2, 2))
    assert lhs == pytest.approx(abs(weak_wedge_eval(xi, (1, 1), psi)))
    assert lhs <= rhs


def test_div_curl_gap_shrinks():
    rep = weak_continuity_experiment(div_curl_recipe(64), determinant_pairing(), div_curl_weight)
    assert rep.gaps[-1] <= rep.gaps[0] / 4
    assert rep.verdict == "converges"


def test_constant_integrand_has_no_gap():
    rep = weak_continuity_experiment(div_curl_recipe(32), QuasiaffineCombo(2, (1, 1), 2.0), nus=(1, 2, 4))
    assert max(rep.gaps) <= 1e-12


def test_square_norm_keeps_a_gap():
    amp = 1.0
    rep = weak_continuity_experiment(div_curl_recipe(64, amp), NormPower(2, (1, 1), (1.0, 0.0)), div_curl_weight)
    expected = amp**2 / 2 * 4 / 9  # mean of cos^2 times the integral of the weight
    # at nu = 8 on 64 cells the cross term (~0.4/nu^2) and sinc attenuation cost about 8%
    assert rep.gaps[-1] == pytest.approx(expected, rel=0.1)
    assert rep.verdict == "does-not-converge"


def test_random_quasiaffine_gaps_decrease(rng):
    spec = QuasiaffineCombo.random(2, (1, 1), rng)
    rep = weak_continuity_experiment(div_curl_recipe(64), spec, div_curl_weight)
    assert all(b <= 1.1 * a for a, b in zip(rep.gaps, rep.gaps[1:]))


def test_power_stays_bounded_in_l_theta():
    # p = (3, 3) gives 1/theta = 2/3 < 1, so int |d u1 ^ d u2|^(3/2) must stay bounded
    spec = Sampled(2, (1, 1), lambda a: np.abs(a[0][:, 0] * a[1][:, 1] - a[0][:, 1] * a[1][:, 0]) ** 1.5)
    r = div_curl_recipe(64)
    w = weight_values(r.grid, None)
    vals = [pairing(generate(r, nu), spec, w) for nu in (1, 2, 4, 8)]
    assert max(vals) <= 1.5 * min(vals)


def test_zero_amplitude_has_no_semicontinuity_gap():
    rep = semicontinuity_counterexample(2.0, closed_nonconvergent_recipe(32, 0.0), nus=(1, 2, 4))
    assert rep.delta == 0.0 and rep.verdict == "no-gap"
