import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from formvar import convexity as cx
from formvar.algebra import FormTuple
from formvar.dec import CubicalGrid
from formvar.errors import IllConditioned
from formvar.integrands import NormPower, PolyconvexComposite, QuasiaffineCombo, Sampled

CFG = cx.SamplerConfig(seed=3, samples=400)


def test_norm_power_is_ext_one_convex():
    assert cx.test_ext_one_convexity(NormPower(3, (1, 2)), CFG).passes


def test_quasiaffine_and_negation_are_affine(rng):
    f = QuasiaffineCombo.random(3, (1, 1), rng)
    for spec in (f, -f):
        rep = cx.test_ext_one_affinity(spec, cx.SamplerConfig(seed=1, samples=1000))
        assert rep.passes and rep.worst_violation <= 1e-9


def test_concave_fails_with_witness():
    rep = cx.test_ext_one_convexity(-NormPower(2, (1,)), CFG)
    assert rep.verdict == "fails"
    assert rep.witness["second_difference"] < 0


def test_self_wedge_of_even_form_is_affine(rng):
    # <c ; xi_1 ^ xi_1> with k_1 = 2 is nonzero yet affine along exterior directions
    f2 = QuasiaffineCombo(4, (2, 1), 0.0, {(2, 0): [1.0]})
    assert cx.test_ext_one_affinity(f2, CFG).passes
    f1 = QuasiaffineCombo(4, (2, 1), 0.5, {(1, 1): rng.normal(size=4), (0, 1): rng.normal(size=4)})
    assert cx.test_ext_one_affinity(f1 + f2, CFG).passes
    assert not cx.test_ext_one_affinity(NormPower(4, (2, 1)), CFG).passes


@pytest.mark.parametrize("n,k,size", [(2, (1, 1), 6), (2, (2,), 2), (3, (1, 1), 10)])
def test_basis_sizes(n, k, size):
    assert len(cx.quasiaffine_basis(n, k)) == size


def test_projection_recovers_coefficients(rng):
    f = QuasiaffineCombo.random(3, (2, 1), rng)
    proj = cx.project_quasiaffine(f, seed=5)
    assert np.max(np.abs(proj.coefficients - f.vector())) <= 1e-8
    assert proj.residual <= 1e-10


def test_projection_of_square_norm_and_zero():
    sq = NormPower(2, (1, 1), (1.0, 0.0), (2.0, 2.0))
    assert cx.project_quasiaffine(sq).residual > 0.1
    zero = QuasiaffineCombo(2, (1, 1))
    proj = cx.project_quasiaffine(zero)
    assert np.all(np.abs(proj.coefficients) <= 1e-14) and proj.residual <= 1e-14
    with pytest.raises(IllConditioned):
        cx.project_quasiaffine(zero, sample_count=3)


def test_polyconvex_support(rng):
    spec = PolyconvexComposite.random_quadratic(2, (1, 1), rng)
    rep = cx.polyconvex_support_test(spec, cx.SamplerConfig(seed=0, samples=10_000))
    assert rep.passes
    affine = PolyconvexComposite(2, (1, 1), Q=np.zeros((5, 5)), b=rng.normal(size=5), c=1.0)
    rep = cx.polyconvex_support_test(affine, CFG)
    assert rep.passes and rep.worst_violation <= 1e-12
    pieces = PolyconvexComposite(2, (1, 1), A=rng.normal(size=(4, 5)), b=rng.normal(size=4))
    assert cx.polyconvex_support_test(pieces, CFG).passes


def test_polyconvex_is_ext_one_convex(rng):
    spec = PolyconvexComposite.random_quadratic(3, (1, 2), rng)
    assert cx.test_ext_one_convexity(spec, CFG).passes


def _fields(n, k, res, seed, count=4, amplitude=1.0):
    grid = CubicalGrid(n, res)
    return cx.bump_fields(grid, k, np.random.default_rng(seed), count, amplitude)


def test_quasiaffine_integrates_to_constant(rng):
    f = QuasiaffineCombo.random(2, (1, 1), rng)
    xi = FormTuple.random(2, (1, 1), rng)
    rep = cx.quasiconvexity_inequality_test(f, xi, _fields(2, (1, 1), 16, 0), mode="equality")
    assert rep.passes and rep.worst_violation <= 1e-12


def test_convex_norm_power_has_nonnegative_gaps(rng):
    f = NormPower(3, (1, 2), (1.0, 2.0), (2.0, 3.0))
    xi = FormTuple.random(3, (1, 2), rng)
    assert cx.quasiconvexity_inequality_test(f, xi, _fields(3, (1, 2), 8, 1)).passes


def test_saddle_fails_quasiconvexity():
    # -(xi_1[1] xi_2[2])^2 is concave along the rank-one line t (1,1) x (1,1)
    f = Sampled(2, (1, 1), lambda a: -(a[0][:, 0] * a[1][:, 1]) ** 2)
    xi = FormTuple.zeros(2, (1, 1))
    rep = cx.quasiconvexity_inequality_test(f, xi, _fields(2, (1, 1), 16, 2))
    assert rep.verdict == "fails" and rep.witness["gap"] < 0
    assert not cx.test_ext_one_convexity(f, CFG).passes


def test_nonzero_boundary_field_rejected():
    from formvar.dec import Cochain
    from formvar.errors import GridMismatch

    g = CubicalGrid(2, 4)
    bad = [[Cochain(g, 0, np.ones(g.count(0))), Cochain.zeros(g, 0)]]
    with pytest.raises(GridMismatch):
        cx.quasiconvexity_inequality_test(NormPower(2, (1, 1)), FormTuple.zeros(2, (1, 1)), bad)


def test_p_lipschitz_stable_for_norm_powers():
    rep = cx.p_lipschitz_check(NormPower(2, (1, 1), (1.0, 1.0), (2.0, 3.0)), (2.0, 3.0), cfg=CFG)
    assert rep.passes


def test_p_lipschitz_affine_holds_with_coefficient_norms(rng):
    c1, c2 = np.array([3.0, -4.0]), np.array([1.0, 2.0])
    f = QuasiaffineCombo(2, (1, 1), 0.7, {(1, 0): c1, (0, 1): c2})
    p = (2.0, 2.0)
    rep = cx.p_lipschitz_check(f, p, cfg=CFG)
    assert rep.witness["full_inequality_worst_ratio"] <= 1.0
    norms = np.array([np.linalg.norm(c1), np.linalg.norm(c2)])
    # fitted constants are the smallest that work, so |c_i| works as well
    assert np.all(np.array(rep.witness["beta"]) <= norms + 1e-12)
    x = [rng.uniform(-3, 3, (500, 2)) for _ in range(2)]
    z = [rng.uniform(-3, 3, (500, 2)) for _ in range(2)]
    W = cx._lipschitz_weights(x, z, p, 2)
    rhs = sum(b * w * np.linalg.norm(a - c, axis=1) for b, w, a, c in zip(norms, W, x, z))
    assert np.all(np.abs(f.evaluate_batch(x) - f.evaluate_batch(z)) <= rhs)


def test_wedge_pairing_has_no_single_constant():
    fit = cx.single_constant_lipschitz_fit(4, 2, (1.0, 10.0, 100.0))
    assert fit["loglog_slope"] == pytest.approx(1.0, abs=0.05)


def _matrix_spec(fn, m, n):
    return Sampled(n, (1,) * m, lambda arrays: fn(np.stack(arrays, axis=1)))


@pytest.mark.parametrize("fn,convex", [
    (lambda X: np.einsum("nij,nij->n", X, X), True),
    (lambda X: np.linalg.det(X[:, :2, :2]) ** 2 + np.einsum("nij,nij->n", X, X), True),
    (lambda X: -np.linalg.det(X[:, :2, :2]) ** 2, False),
])
def test_agrees_with_classical_rank_one_tester(fn, convex):
    m, n = 2, 3
    cfg = cx.SamplerConfig(seed=2, samples=300, rescaled_fraction=0.0)
    ours = cx.test_ext_one_convexity(_matrix_spec(fn, m, n), cfg, tol=1e-6)
    classical = cx.rank_one_second_differences(fn, m, n, cfg)
    assert ours.passes == convex
    assert bool(np.min(classical) >= -1e-6) == convex


@given(st.integers(0, 2**32 - 1))
def test_lipschitz_probe_bounded_under_step_refinement(seed):
    rng = np.random.default_rng(seed)
    spec = PolyconvexComposite.random_quadratic(2, (1, 1), rng)
    x = [rng.uniform(-1, 1, (200, 2)) for _ in range(2)]
    d = [rng.normal(size=(200, 2)) for _ in range(2)]
    est = []
    for h in (1e-2, 1e-3, 1e-4):
        moved = [a + h * b for a, b in zip(x, d)]
        est.append(np.max(np.abs(spec.evaluate_batch(moved) - spec.evaluate_batch(x)) / h))
    assert max(est) <= 1.1 * min(est)
