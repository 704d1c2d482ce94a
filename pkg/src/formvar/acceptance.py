"""Runners for the ten acceptance criteria.

Each runner returns a ``Criterion`` with the measured quantity, the threshold
and a pass flag.  ``run_all`` is what ``formvar verify-all`` executes.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from itertools import combinations, product
from math import comb

import numpy as np

from . import exponents as ex
from .algebra import ExteriorForm, hodge_star, interior_product, scalar_product, wedge
from .convexity import (
    SamplerConfig,
    bump_fields,
    project_quasiaffine,
    quasiconvexity_inequality_test,
    test_ext_one_affinity,
)
from .dec import (
    Cochain,
    CubicalGrid,
    codifferential,
    coboundary,
    hodge_decompose,
    sample_form,
    symbolic_components,
    symbolic_d,
)
from .integrands import NormPower, QuasiaffineCombo
from .oracles import all_minors, brute_force_tau
from .wedge_powers import power_batch, t_layout, tau


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    measured: dict
    threshold: dict
    seconds: float = 0.0
    notes: list[str] = field(default_factory=list)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number}: {self.name} ({self.seconds:.1f}s)"

    def to_dict(self) -> dict:
        return asdict(self)


def _timed(fn):
    def wrapper(*args, **kwargs):
        t = time.perf_counter()
        c = fn(*args, **kwargs)
        c.seconds = time.perf_counter() - t
        return c

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _rel(x, y, scale) -> float:
    d = float(np.max(np.abs(np.asarray(x) - np.asarray(y)), initial=0.0))
    return d / max(scale, np.finfo(float).tiny)


# 1 ---------------------------------------------------------------------------------


@_timed
def algebra_suite(cases: int = 10_000, max_n: int = 6, seed: int = 0, tol: float = 1e-12) -> Criterion:
    """Wedge associativity and anticommutativity, star involution, a ^ *b = <a,b> vol,
    interior product adjointness.  Errors are relative to the product of input norms."""
    rng = np.random.default_rng(seed)
    worst = dict.fromkeys(["associativity", "anticommutativity", "star_involution", "wedge_star_inner", "interior_adjoint"], 0.0)
    for _ in range(cases):
        n = int(rng.integers(1, max_n + 1))
        p, q = (int(v) for v in rng.integers(0, n + 1, 2))
        r = int(rng.integers(0, n + 1))
        a, b = ExteriorForm.random(n, p, rng), ExteriorForm.random(n, q, rng)
        if p + q + r <= n:
            c = ExteriorForm.random(n, r, rng)
            lhs, rhs = wedge(wedge(a, b), c), wedge(a, wedge(b, c))
            worst["associativity"] = max(worst["associativity"], _rel(lhs.vector, rhs.vector, a.norm() * b.norm() * c.norm()))
        if p + q <= n:
            s = (-1) ** (p * q)
            err = _rel(wedge(a, b).vector, s * wedge(b, a).vector, a.norm() * b.norm())
            worst["anticommutativity"] = max(worst["anticommutativity"], err)
        s = (-1) ** (p * (n - p))
        worst["star_involution"] = max(worst["star_involution"], _rel(hodge_star(hodge_star(a)).vector, s * a.vector, a.norm()))
        b2 = ExteriorForm.random(n, p, rng)
        lhs = wedge(a, hodge_star(b2)).vector[0]
        worst["wedge_star_inner"] = max(worst["wedge_star_inner"], _rel(lhs, scalar_product(a, b2), a.norm() * b2.norm()))
        if p <= q:
            c = ExteriorForm.random(n, q - p, rng)
            lhs = scalar_product(interior_product(a, b), c)
            rhs = scalar_product(b, wedge(a, c))
            worst["interior_adjoint"] = max(worst["interior_adjoint"], _rel(lhs, rhs, a.norm() * b.norm() * c.norm()))
    ok = all(v <= tol for v in worst.values())
    return Criterion(1, "exterior algebra identities", ok, worst, {"max_relative_error": tol})


# 2 ---------------------------------------------------------------------------------


@_timed
def combinatorics(seed: int = 0) -> Criterion:
    rng = np.random.default_rng(seed)
    mismatches = []
    checked = 0
    for n in range(1, 6):
        for m in range(1, 4):
            for k in product(range(1, n + 1), repeat=m):
                checked += 1
                brute = brute_force_tau(n, k, rng, trials=3)
                if brute != tau(n, k):
                    mismatches.append({"n": n, "k": list(k), "tau": tau(n, k), "brute": brute})
    minor_fail = 0
    minor_cases = 0
    for m in range(1, 4):
        for n in range(1, 4):
            for _ in range(5):
                X = rng.integers(-5, 6, (m, n))
                arrays = [X[i].astype(float)[None, :] for i in range(m)]
                k = (1,) * m
                ref = all_minors(X)
                lay = t_layout(n, k)
                got = {}
                for a in lay.alphas:
                    rows = tuple(i for i, ai in enumerate(a.alpha) if ai)
                    vals = power_batch(arrays, n, k, a)[0]
                    for C, v in zip(combinations(range(n), len(rows)), vals):
                        got[(rows, C)] = v
                minor_cases += 1
                if set(got) != set(ref) or any(Fraction(got[key]) != ref[key] for key in ref):
                    minor_fail += 1
    ok = not mismatches and minor_fail == 0
    return Criterion(2, "wedge power combinatorics", ok,
                     {"tau_cases": checked, "tau_mismatches": mismatches, "minor_cases": minor_cases, "minor_failures": minor_fail},
                     {"mismatches": 0})


# 3 ---------------------------------------------------------------------------------

QUASIAFFINE_SHAPES = [(2, (1,)), (2, (2,)), (2, (1, 1)), (2, (1, 2)), (2, (1, 1, 1)),
                      (3, (1,)), (3, (2,)), (3, (1, 1)), (3, (1, 2)), (3, (1, 1, 1))]
QC_RES = {2: 16, 3: 8}


@_timed
def quasiaffine_characterization(instances: int = 200, seed: int = 0, samples: int = 1000,
                                 eps: float = 0.5, fields: int = 4) -> Criterion:
    rng = np.random.default_rng(seed)
    false_pos, false_neg = [], []
    worst_aff, worst_gap, worst_coef = 0.0, 0.0, 0.0
    min_pert_aff, min_pert_gap = np.inf, np.inf
    from .algebra import FormTuple

    for j in range(instances):
        n, k = QUASIAFFINE_SHAPES[j % len(QUASIAFFINE_SHAPES)]
        grid = CubicalGrid(n, QC_RES[n])
        cfg = SamplerConfig(seed=seed * 100_003 + j, samples=samples)
        q = QuasiaffineCombo.random(n, k, rng)
        xi = FormTuple.random(n, k, rng)
        tf = bump_fields(grid, k, rng, count=fields, amplitude=2.0)
        aff = test_ext_one_affinity(q, cfg)
        qc = quasiconvexity_inequality_test(q, xi, tf, mode="equality")
        proj = project_quasiaffine(q, seed=j)
        coef_err = float(np.max(np.abs(proj.coefficients - q.vector())))
        worst_aff = max(worst_aff, aff.worst_violation)
        worst_gap = max(worst_gap, qc.worst_violation)
        worst_coef = max(worst_coef, coef_err)
        if not (aff.passes and qc.passes and coef_err <= 1e-8):
            false_neg.append(j)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        pert = q + (sign * eps) * NormPower(n, k)
        aff_p = test_ext_one_affinity(pert, cfg)
        qc_p = quasiconvexity_inequality_test(pert, xi, tf, mode="equality")
        min_pert_aff = min(min_pert_aff, aff_p.worst_violation)
        min_pert_gap = min(min_pert_gap, qc_p.worst_violation)
        if aff_p.passes or qc_p.passes:
            false_pos.append(j)
    ok = not false_pos and not false_neg
    return Criterion(3, "quasiaffine characterization", ok, {
        "instances": instances,
        "worst_affinity_violation": worst_aff,
        "worst_equality_gap": worst_gap,
        "worst_coefficient_error": worst_coef,
        "perturbed_min_affinity_violation": float(min_pert_aff),
        "perturbed_min_equality_gap": float(min_pert_gap),
        "false_verdicts_on_quasiaffine": false_neg,
        "false_verdicts_on_perturbed": false_pos,
    }, {"affinity": 1e-9, "equality_gap": "5h", "coefficients": 1e-8, "false_verdicts": 0})


# 4 ---------------------------------------------------------------------------------


@_timed
def exponent_boundaries() -> Criterion:
    rows = {}
    ok = True
    for n in (2, 3, 4):
        p = Fraction(n * n, n + 1)
        r = ex.sobolev_admissible(n, (1,) * n, (1,) * n, [p] * n)
        good = bool(r.sobolev_admissible and r.theta_equality)
        rows[f"jacobian_n{n}"] = {"p": ex.fmt(p), "theta_inv": ex.fmt(r.theta_inv), "admissible": r.sobolev_admissible,
                                  "equality": r.theta_equality}
        ok &= good
    for n in (3, 4):
        r = ex.very_weak_admissible(n, (1,) * n, [n - 1] * n, ["inf"] * n)
        rows[f"brezis_nguyen_n{n}"] = {"admissible": r.very_weak_admissible, "equality": r.very_weak_equality}
        ok &= bool(r.very_weak_admissible and r.very_weak_equality)
    for n in range(2, 7):
        r = ex.sobolev_admissible(n, (1, 1), (1, 1), (2, 2))
        rows[f"div_curl_n{n}"] = {"admissible": r.sobolev_admissible, "theta_inv": ex.fmt(r.theta_inv)}
        ok &= bool(r.sobolev_admissible)
    return Criterion(4, "exponent boundary cases", ok, rows, {"exact": True},
                     notes=["Brezis-Nguyen scale needs p = n - 1 > 1, so n >= 3"])


# 5 ---------------------------------------------------------------------------------


def _dd_exact(grid: CubicalGrid) -> dict:
    out = {}
    for k in range(grid.n - 1):
        P = (grid.d(k + 1) @ grid.d(k)).tocsr()
        P.eliminate_zeros()
        out[f"dd_{k}"] = int(P.nnz)
    for bc in ("free", "tangential-zero"):
        for k in range(2, grid.n + 1):
            P = (grid.delta(k - 1, bc) @ grid.delta(k, bc)).tocsr()
            P.eliminate_zeros()
            out[f"deltadelta_{bc}_{k}"] = int(P.nnz)
    return out


COMMUTATION_FORM = {"1": "sin(6*pi*x1)*cos(4*pi*x2)", "2": "x1**2*exp(x2)"}


def commutation_errors(resolutions=(8, 16, 32)) -> list[float]:
    """max |d(sample w) - sample(dw)| per cell, scaled by h^-2, for a smooth 1-form on the square."""
    sym = symbolic_components(COMMUTATION_FORM, 2, 1)
    dsym = symbolic_d(sym, 2)
    errs = []
    for res in resolutions:
        g = CubicalGrid(2, res)
        w = sample_form(g, {tuple(i + 1 for i in I): e for I, e in sym.items()}, 1)
        dw = sample_form(g, {tuple(i + 1 for i in I): e for I, e in dsym.items()}, 2)
        errs.append(float(np.max(np.abs(coboundary(w).values - dw.values))) / g.h**2)
    return errs


@_timed
def discrete_hodge(res: int = 16, seed: int = 0, tol: float = 1e-9) -> Criterion:
    rng = np.random.default_rng(seed)
    measured = {}
    ok = True
    for n in (2, 3):
        g = CubicalGrid(n, res)
        nnz = _dd_exact(g)
        measured[f"n{n}_nonzeros"] = nnz
        ok &= all(v == 0 for v in nnz.values())
        for bc in ("tangential-zero", "free"):
            for k in range(n + 1):
                w = Cochain.random(g, k, rng)
                split = hodge_decompose(w, bc)
                r = {key: split.residuals[key] for key in ("reconstruction", "exact_coexact", "exact_harmonic", "coexact_harmonic")}
                measured[f"n{n}_{bc}_k{k}"] = r
                ok &= max(r.values()) <= tol
    errs = commutation_errors()
    slopes = [float(np.log2(a / b)) for a, b in zip(errs, errs[1:])]
    measured["commutation_errors"] = errs
    measured["commutation_slope"] = min(slopes)
    ok &= min(slopes) >= 1.8
    return Criterion(5, "discrete Hodge decomposition", ok, measured,
                     {"dd_nonzeros": 0, "residual": tol, "commutation_slope": 1.8})


# 6 ---------------------------------------------------------------------------------


@_timed
def weak_continuity_positive(res: int = 64, slot_res: int = 32, seed: int = 0) -> Criterion:
    from .weakcont import (
        SequenceRecipe,
        bump_test_form,
        determinant_pairing,
        div_curl_recipe,
        div_curl_weight,
        generate,
        slot_spread,
        weak_continuity_experiment,
    )

    rep = weak_continuity_experiment(div_curl_recipe(res), determinant_pairing(), div_curl_weight, nus=(1, 2, 4, 8))
    decay_ok = all(f >= 3.0 for f in rep.decay_factors)
    extrap_ok = rep.verdict == "converges"
    rng = np.random.default_rng(seed)
    spreads = []
    g = CubicalGrid(2, slot_res)
    psi = bump_test_form(g, 2)
    for trial in range(3):
        c = rng.uniform(-1, 1, 4)
        recipe = SequenceRecipe("laminate", 2, slot_res, (1, 1),
                                base=({"": f"{c[0]:.6f}*x1*x2 + x2**2"}, {"": f"sin({c[1]:.6f} + x1) + {c[2]:.6f}*x2**3"}),
                                beta=((1.0,), (float(c[3]),)), amplitude=0.8, axis=1 + trial % 2)
        term = generate(recipe, 1 + trial)
        spreads.append(slot_spread(term.omegas, (1, 1), psi)[0])
    slot_ok = max(spreads) <= 1e-6
    return Criterion(6, "weak continuity of the determinant pairing", decay_ok and extrap_ok and slot_ok, {
        "nus": rep.nus, "values": rep.values, "gaps": rep.gaps, "decay_factors": rep.decay_factors,
        "extrapolated": rep.extrapolated, "target": rep.target,
        "relative_extrapolation_error": rep.gap / abs(rep.target), "slot_spreads": spreads,
    }, {"decay_per_doubling": 3.0, "extrapolation_relative": 0.1, "slot_spread": 1e-6, "slot_res": slot_res})


# 7 ---------------------------------------------------------------------------------


@_timed
def weak_continuity_negative(res: int = 64) -> Criterion:
    from .weakcont import amplitude_slope, closed_nonconvergent_recipe, semicontinuity_counterexample

    rep = semicontinuity_counterexample(2.0, closed_nonconvergent_recipe(res, 1.0))
    slope, deltas = amplitude_slope(2.0, (0.25, 0.5, 1.0), res)
    rel = abs(rep.delta - 0.25) / 0.25
    ok = rel <= 0.1 and abs(slope - 2.0) <= 0.1
    return Criterion(7, "semicontinuity counterexample", ok,
                     {"delta": rep.delta, "relative_error": rel, "energies": rep.energies, "base_energy": rep.base_energy,
                      "amplitude_deltas": deltas, "slope": slope},
                     {"delta": 0.25, "relative": 0.1, "slope": "2 +- 0.1"})


# 8 ---------------------------------------------------------------------------------


def _pairs(recipes):
    from .weakcont import generate

    out = []
    for ra, na, rb, nb in recipes:
        out.append((generate(ra, na).omegas, generate(rb, nb).omegas))
    return out


@_timed
def telescopic(res: int = 32, train: int = 30, held_out: int = 100, seed: int = 0) -> Criterion:
    from .weakcont import bump_test_form, random_pair_recipes, telescopic_check

    g = CubicalGrid(2, res)
    psi = bump_test_form(g, 2)
    rng = np.random.default_rng(seed)
    training = _pairs(random_pair_recipes(rng, 2, res, (1, 1), train))
    calib = telescopic_check(training[:1], (1, 1), psi, (2, 2), training=training)
    test = _pairs(random_pair_recipes(np.random.default_rng(seed + 1), 2, res, (1, 1), held_out))
    rep = telescopic_check(test, (1, 1), psi, (2, 2), constant=calib.constant)
    return Criterion(8, "telescopic estimate", rep.violations == 0, {
        "constant": rep.constant, "max_training_ratio": max(calib.training_ratios),
        "max_held_out_ratio": max(rep.ratios), "violations": rep.violations, "held_out": held_out,
    }, {"violations": 0})


# 9 ---------------------------------------------------------------------------------


@_timed
def minimization_suite(res: int = 10, seed: int = 0) -> Criterion:
    from .integrands import Growth, PolyconvexComposite, SumOf
    from .minimization import (
        DiscreteEnergy,
        VariationalProblem,
        absorb_linear_term,
        check_coclosed,
        gauge_fix,
        minimize,
    )

    rng = np.random.default_rng(seed)
    g = CubicalGrid(2, res)
    gr = Growth((2.0,), lower=0.5)
    w0 = sample_form(g, {"1": "x2**2", "2": "x1*(1 - x1) + x2"}, 1)
    G = Cochain.random(g, 2, rng, tangential_zero=True) * 0.1
    lin = codifferential(G, "free")
    coclosed, cres = check_coclosed([lin])

    quad = SumOf((NormPower(2, (2,), (0.5,), (2.0,)), PolyconvexComposite.random_quadratic(2, (2,), rng)), growth=gr)
    pb = VariationalProblem(g, quad, (w0,), g=(lin,))
    r_lin = minimize(pb, "linear")
    r_des = minimize(pb, "descent")
    agree = abs(r_lin.energy - r_des.energy)

    r_gauge = minimize(pb, "linear", gauge=True)
    mdt_quad = abs(r_gauge.energy - r_lin.energy) / max(abs(r_lin.energy), 1.0)
    conv = SumOf((NormPower(2, (2,), (0.5,), (2.0,)), PolyconvexComposite.random_quadratic(2, (2,), rng),
                  NormPower(2, (2,), (0.25,), (3.0,))), growth=gr)
    pc = VariationalProblem(g, conv, (w0,), g=(lin,))
    r_c = minimize(pc, "descent")
    r_cg = minimize(pc, "descent", gauge=True)
    mdt_conv = abs(r_cg.energy - r_c.energy) / max(abs(r_c.energy), 1.0)

    gauge_res = 0.0
    for _ in range(5):
        w = Cochain.random(g, 1, rng)
        fix = gauge_fix(w, w0)
        gauge_res = max(gauge_res, fix.d_residual, fix.gauge_residual)

    absorbed = absorb_linear_term(pb)
    E1, E2 = DiscreteEnergy(pb), DiscreteEnergy(absorbed)
    free = ~pb.pinned_mask(0)
    worst_abs = 0.0
    for _ in range(20):
        v = w0.values.copy()
        v[free] += rng.normal(size=free.sum())
        worst_abs = max(worst_abs, abs(E1.value(v) - E2.value(v)))
    ok = coclosed and agree <= 1e-7 and mdt_quad <= 1e-7 and mdt_conv <= 1e-7 and gauge_res <= 1e-9 and worst_abs <= 1e-8
    return Criterion(9, "minimization", ok, {
        "coclosed_residual": cres, "descent_vs_linear": agree, "m_gauge_vs_m_quadratic": mdt_quad,
        "m_gauge_vs_m_convex": mdt_conv, "gauge_residual": gauge_res, "absorb_energy_gap": worst_abs,
        "energies": {"linear": r_lin.energy, "descent": r_des.energy, "convex": r_c.energy, "convex_gauge": r_cg.energy},
    }, {"descent_vs_linear": 1e-7, "m_gauge_relative": 1e-7, "gauge_residual": 1e-9, "absorb": 1e-8})


# 10 --------------------------------------------------------------------------------


@_timed
def nonexistence(resolutions=(8, 16, 32)) -> Criterion:
    from .minimization import nonexistence_probe

    rep = nonexistence_probe(resolutions, k=2)
    ctrl = nonexistence_probe(resolutions, k=1)
    m = ctrl.interior_mass
    spread = (max(m) - min(m)) / max(m)
    ok = rep.relaxed_norm <= 1e-9 and rep.decreasing and spread <= 0.05
    return Criterion(10, "nonexistence mechanism", ok, {
        "relaxed_norm": rep.relaxed_norm, "interior_mass": rep.interior_mass, "control_interior_mass": m,
        "control_spread": spread, "energies": rep.energies, "interior_codifferential": rep.interior_codifferential,
    }, {"relaxed_norm": 1e-9, "interior_mass": "strictly decreasing", "control_spread": 0.05},
        notes=[rep.note])


RUNNERS = {
    1: algebra_suite,
    2: combinatorics,
    3: quasiaffine_characterization,
    4: exponent_boundaries,
    5: discrete_hodge,
    6: weak_continuity_positive,
    7: weak_continuity_negative,
    8: telescopic,
    9: minimization_suite,
    10: nonexistence,
}


def run_all(only=None) -> list[Criterion]:
    return [RUNNERS[i]() for i in sorted(RUNNERS) if only is None or i in only]
