"""Oscillating sequences of discrete forms and weak wedge products.

The weak product of exact forms is computed through the discrete identity

    <psi, A u d(w_i) u B> = (-1)^N <delta psi, A u w_i u B>,

with u the cubical cup product, A and B closed and N = deg A.  Because the
cup product obeys Leibniz exactly and delta is the exact adjoint of d, the
slot-wise formulas agree up to the accuracy of the Hodge solve.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from math import comb
from typing import Callable, Mapping, Sequence

import numpy as np

from . import exponents as ex
from .dec import (
    Cochain,
    CubicalGrid,
    cell_values,
    coboundary,
    codifferential,
    coexact_part,
    cup,
    lp_norm,
    sample_form,
)
from .errors import BadDegree, BoundaryTrace, DegreeMismatch, FrequencyVsResolution, InadmissibleExponents
from .integrands import Integrand
from .wedge_powers import MultiIndexAlpha, power_batch

KINDS = ("laminate", "closed-nonconvergent", "boundary-layer")


@dataclass(frozen=True)
class SequenceRecipe:
    """How to build the nu-th term of a sequence.

    ``base`` holds one component mapping per factor, each describing the
    potential (a form of degree k_i - 1, or k - 2 for closed-nonconvergent).
    Keys are 1-based index strings such as "1,2" ("" for functions); values are
    expressions in x1..xn.  ``beta`` is the constant form multiplying the profile,
    as a coefficient list per factor.
    """

    kind: str
    n: int
    res: int
    k: tuple[int, ...]
    base: tuple[dict, ...] = ()
    beta: tuple[tuple[float, ...], ...] = ()
    amplitude: float = 1.0
    axis: int = 1
    zero_boundary: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown recipe kind {self.kind!r}; expected one of {KINDS}")
        k = tuple(int(v) for v in self.k)
        object.__setattr__(self, "k", k)
        if self.kind == "closed-nonconvergent":
            if len(k) != 1:
                raise DegreeMismatch("closed-nonconvergent recipes have a single factor")
            if k[0] < 2:
                raise BadDegree("an exact sequence converging weakly but not strongly needs k >= 2")
        if not 1 <= self.axis <= self.n:
            raise ValueError(f"axis must lie in 1..{self.n}")
        pot = self.potential_degrees
        base = tuple(dict(b) for b in self.base) or tuple({} for _ in k)
        beta = tuple(tuple(float(v) for v in b) for b in self.beta) or tuple((1.0,) * comb(self.n, d) for d in pot)
        if len(base) != len(k) or len(beta) != len(k):
            raise DegreeMismatch("one base and one beta per factor")
        for b, d in zip(beta, pot):
            if len(b) != comb(self.n, d):
                raise DegreeMismatch(f"beta of degree {d} needs {comb(self.n, d)} entries")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "beta", beta)

    @property
    def grid(self) -> CubicalGrid:
        return CubicalGrid(self.n, self.res)

    @property
    def potential_degrees(self) -> tuple[int, ...]:
        if self.kind == "closed-nonconvergent":
            return (self.k[0] - 2,)
        return tuple(ki - 1 for ki in self.k)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["k"] = list(self.k)
        d["base"] = [dict(b) for b in self.base]
        d["beta"] = [list(b) for b in self.beta]
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "SequenceRecipe":
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise ValueError(f"unknown recipe fields {sorted(extra)}")
        d = dict(d)
        d["k"] = tuple(d["k"])
        d["base"] = tuple(d.get("base", ()))
        d["beta"] = tuple(tuple(b) for b in d.get("beta", ()))
        return cls(**d)


@dataclass(frozen=True)
class SequenceTerm:
    nu: float
    omegas: tuple[Cochain, ...]
    d_omegas: tuple[Cochain, ...]


def _profile(kind: str, nu: float) -> Callable:
    if kind == "boundary-layer":
        # concentrates in a layer of width 1/(2 pi nu) at x_a = 0
        return lambda t: np.exp(-2 * np.pi * nu * t) / (2 * np.pi * nu)
    return lambda t: np.sin(2 * np.pi * nu * t) / (2 * np.pi * nu)


def _basis_keys(n: int, d: int) -> list[str]:
    from .algebra import basis

    return [",".join(str(i + 1) for i in I) for I in basis(n, d)]


def generate(recipe: SequenceRecipe, nu: float) -> SequenceTerm:
    """Term nu of the sequence; nu = 0 returns the unperturbed base."""
    g = recipe.grid
    if nu < 0:
        raise ValueError("nu must be >= 0")
    if nu > 0 and nu >= recipe.res / 4:
        raise FrequencyVsResolution(f"nu={nu} is too fine for res={recipe.res} (need nu < res/4)")
    amp = recipe.amplitude if nu > 0 else 0.0
    prof = _profile(recipe.kind, nu) if nu > 0 else None
    a = recipe.axis - 1
    potentials = []
    for base, beta, d in zip(recipe.base, recipe.beta, recipe.potential_degrees):
        phi = sample_form(g, base, d) if base else Cochain.zeros(g, d)
        if amp != 0.0:
            comps = {}
            for key, b in zip(_basis_keys(g.n, d), beta):
                if b != 0.0:
                    comps[key] = (lambda *x, b=b: amp * b * prof(x[a]))
            osc = sample_form(g, comps, d)
            if recipe.zero_boundary:
                osc = osc.masked(g.boundary_mask(d))
            phi = phi + osc
        potentials.append(phi)
    if recipe.kind == "closed-nonconvergent":
        omegas = (coboundary(potentials[0]),)
    else:
        omegas = tuple(potentials)
    return SequenceTerm(float(nu), omegas, tuple(coboundary(w) for w in omegas))


# weak wedge products ----------------------------------------------------------------


def slot_sign(k: Sequence[int], alpha: Sequence[int], slot: tuple[int, int]) -> int:
    """(-1)^N with N = k_i (j_i - 1) + sum_{j<i} k_j alpha_j, slots 1-based."""
    i, j = slot
    N = k[i - 1] * (j - 1) + sum(k[t] * alpha[t] for t in range(i - 1))
    return -1 if N % 2 else 1


def all_slots(alpha: Sequence[int]) -> list[tuple[int, int]]:
    return [(i + 1, j + 1) for i, a in enumerate(alpha) for j in range(a)]


def _check_psi(omegas, alpha, psi: Cochain):
    g = omegas[0].grid
    k = tuple(w.k + 1 for w in omegas)
    if len(alpha) != len(omegas):
        raise DegreeMismatch(f"multiindex {tuple(alpha)} has {len(alpha)} entries for {len(omegas)} factors")
    deg = MultiIndexAlpha(tuple(alpha)).weight(k)
    if deg > g.n:
        raise DegreeMismatch(f"|k alpha| = {deg} exceeds n = {g.n}")
    if psi.grid != g or psi.k != deg:
        raise DegreeMismatch(f"test form must be a degree-{deg} cochain on the same grid")
    if np.any(psi.tangential_trace() != 0.0):
        raise BoundaryTrace("test form must vanish on boundary cells")
    return k


def _slot_product(omegas, d_omegas, alpha, slot, replacement: Cochain) -> Cochain:
    i, j = slot
    out = None
    for t, (a, dw) in enumerate(zip(alpha, d_omegas)):
        for s in range(a):
            piece = replacement if (t + 1, s + 1) == (i, j) else dw
            out = piece if out is None else cup(out, piece)
    return out


def _wedge_eval(omegas, alpha, psi, slot, use_coexact: bool) -> float:
    k = _check_psi(omegas, alpha, psi)
    i, j = slot
    if not (1 <= i <= len(alpha) and 1 <= j <= alpha[i - 1]):
        raise ValueError(f"slot {slot} is outside the multiindex {tuple(alpha)}")
    d_omegas = [coboundary(w) for w in omegas]
    w = omegas[i - 1]
    rep = coexact_part(w, "free") if use_coexact else w
    Z = _slot_product(omegas, d_omegas, alpha, slot, rep)
    return slot_sign(k, alpha, slot) * codifferential(psi, "free").dot(Z)


def weak_wedge_eval(omegas: Sequence[Cochain], alpha: Sequence[int], psi: Cochain, slot: tuple[int, int] = (1, 1),
                    p=None) -> float:
    """(d omega^alpha)_weak(psi) using the coexact part of the slot factor.

    ``p``, when given, must be an admissible Sobolev exponent for (k, alpha).
    """
    if p is not None:
        k = tuple(w.k + 1 for w in omegas)
        if not ex.sobolev_admissible(omegas[0].grid.n, k, alpha, p).sobolev_admissible:
            raise InadmissibleExponents(f"p={p} is not admissible for alpha={tuple(alpha)}")
    return _wedge_eval(omegas, tuple(alpha), psi, slot, use_coexact=True)


def very_weak_wedge_eval(omegas: Sequence[Cochain], alpha: Sequence[int], psi: Cochain, slot: tuple[int, int] = (1, 1),
                         p=None, q=None) -> float:
    """Same pairing with omega_i itself in the slot."""
    if p is not None and q is not None:
        if not ex.very_weak_admissible(omegas[0].grid.n, alpha, p, q).very_weak_admissible:
            raise InadmissibleExponents(f"(p, q) = ({p}, {q}) is not admissible for the very weak product")
    return _wedge_eval(omegas, tuple(alpha), psi, slot, use_coexact=False)


def direct_wedge_eval(omegas: Sequence[Cochain], alpha: Sequence[int], psi: Cochain) -> float:
    """Midpoint quadrature of int <psi, d omega^alpha> from cell-centre reconstructions."""
    k = _check_psi(omegas, alpha, psi)
    g = psi.grid
    arrays = [cell_values(coboundary(w)) for w in omegas]
    prod = power_batch(arrays, g.n, k, tuple(alpha))
    return float(g.h**g.n * np.sum(cell_values(psi) * prod))


def slot_spread(omegas, alpha, psi, very_weak: bool = False) -> tuple[float, list[float]]:
    fn = very_weak_wedge_eval if very_weak else weak_wedge_eval
    vals = [fn(omegas, alpha, psi, s) for s in all_slots(alpha)]
    return max(vals) - min(vals), vals


def bump_test_form(grid: CubicalGrid, deg: int, coeffs: Sequence[float] | None = None, power: int = 1) -> Cochain:
    """psi = (prod_a x_a (1 - x_a))^power * constant form, zeroed on boundary cells."""
    keys = _basis_keys(grid.n, deg)
    coeffs = coeffs if coeffs is not None else [1.0] * len(keys)
    scale = 4.0**grid.n

    def bump(*x):
        v = scale
        for xa in x:
            v = v * xa * (1 - xa)
        return v**power

    comps = {key: (lambda *x, c=c: c * bump(*x)) for key, c in zip(keys, coeffs) if c != 0.0}
    return sample_form(grid, comps, deg).masked(grid.boundary_mask(deg))


# telescopic estimate -----------------------------------------------------------------


def _norm(w: Cochain, mu) -> float:
    return lp_norm(w, float("inf") if mu is ex.INF else float(mu))


def telescopic_terms(xi: Sequence[Cochain], zeta: Sequence[Cochain], alpha, psi: Cochain, p) -> tuple[float, float]:
    """(LHS, RHS without the constant) of the telescopic estimate."""
    alpha = tuple(alpha)
    mu = ex.mu_vector(alpha, p)
    pf = [float(v) for v in ex.parse_vector(p)]
    lhs = abs(weak_wedge_eval(xi, alpha, psi) - weak_wedge_eval(zeta, alpha, psi))
    dpsi = lp_norm(codifferential(psi, "free"), float("inf"))
    dn = [lp_norm(coboundary(a), pi) + lp_norm(coboundary(b), pi) for a, b, pi in zip(xi, zeta, pf)]
    rhs = 0.0
    for i, a in enumerate(alpha):
        if a == 0:
            continue
        diff = coexact_part(xi[i], "free") - coexact_part(zeta[i], "free")
        term = a * dpsi * _norm(diff, mu[i]) * dn[i] ** (a - 1)
        for j, aj in enumerate(alpha):
            if j != i:
                term *= dn[j] ** aj
        rhs += term
    return lhs, rhs


@dataclass
class TelescopicReport:
    constant: float
    ratios: list[float]
    violations: int
    verdict: str
    training_ratios: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def random_pair_recipes(rng: np.random.Generator, n: int, res: int, k: Sequence[int], count: int) -> list[tuple[SequenceRecipe, float, SequenceRecipe, float]]:
    """Random laminate pairs: polynomial bases, random amplitudes, axes and frequencies."""
    out = []
    nus = [v for v in (1, 2, 3, 4, 6) if v < res / 4]
    for _ in range(count):
        pair = []
        for _side in range(2):
            base, beta = [], []
            for ki in k:
                d = ki - 1
                keys = _basis_keys(n, d)
                c = rng.uniform(-1, 1, (len(keys), 3))
                base.append({key: f"{c[j, 0]:.6f}*x1*x2 + {c[j, 1]:.6f}*x{n}**2 + {c[j, 2]:.6f}*x1"
                             for j, key in enumerate(keys)})
                beta.append(tuple(rng.uniform(-1, 1, len(keys))))
            r = SequenceRecipe("laminate", n, res, tuple(k), tuple(base), tuple(beta),
                               amplitude=float(rng.uniform(0.2, 1.5)), axis=int(rng.integers(1, n + 1)))
            pair.extend([r, float(rng.choice(nus))])
        out.append(tuple(pair))
    return out


def telescopic_check(pairs, alpha, psi: Cochain, p, constant: float | None = None,
                     training=None, safety: float = 1.5) -> TelescopicReport:
    """Check LHS <= C * RHS on every pair.

    ``pairs`` and ``training`` are lists of (xi, zeta) cochain tuples.  When
    ``constant`` is None it is calibrated as ``safety`` times the largest
    training ratio and then held fixed for ``pairs``.
    """
    train = []
    if constant is None:
        if not training:
            raise ValueError("need either a constant or a training batch")
        for xi, zeta in training:
            lhs, rhs = telescopic_terms(xi, zeta, alpha, psi, p)
            train.append(lhs / rhs if rhs > 0 else 0.0)
        constant = safety * max(train)
    ratios, bad = [], 0
    for xi, zeta in pairs:
        lhs, rhs = telescopic_terms(xi, zeta, alpha, psi, p)
        r = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf)
        ratios.append(float(r))
        bad += r > constant
    return TelescopicReport(float(constant), ratios, int(bad), "passes" if bad == 0 else "fails", train)


# experiments ---------------------------------------------------------------------


@dataclass
class ConvergenceReport:
    nus: list[float]
    values: list[float]
    gaps: list[float]
    extrapolated: float
    target: float
    gap: float
    tolerance: float
    verdict: str
    decay_factors: list[float] = field(default_factory=list)
    rate: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def table(self) -> list[dict]:
        return [{"nu": n, "value": v, "gap": g} for n, v, g in zip(self.nus, self.values, self.gaps)]


def weight_values(grid: CubicalGrid, psi) -> np.ndarray:
    """Scalar weight psi at the n-cell centres (callable of x1..xn, constant, or array)."""
    if psi is None:
        return np.ones(grid.n_cells)
    if callable(psi):
        c = grid.cell_centers()
        return np.broadcast_to(np.asarray(psi(*c.T), dtype=float), (grid.n_cells,))
    arr = np.asarray(psi, dtype=float)
    return np.broadcast_to(arr, (grid.n_cells,))


def pairing(term: SequenceTerm, spec: Integrand, weights: np.ndarray) -> float:
    g = term.d_omegas[0].grid
    arrays = [cell_values(dw) for dw in term.d_omegas]
    return float(g.h**g.n * np.sum(weights * spec.evaluate_batch(arrays)))


def weak_continuity_experiment(recipe: SequenceRecipe, spec: Integrand, psi=None,
                               nus: Sequence[float] = (1, 2, 4, 8), tol: float = 0.1) -> ConvergenceReport:
    """int psi f(d omega_nu) over the frequency ladder against int psi f(d omega).

    The limit is Richardson-extrapolated from the two finest frequencies as
    2 P(nu_max) - P(nu_prev); the verdict is "converges" when it lands within
    ``tol`` (relative) of the target.
    """
    if tuple(spec.k) != tuple(recipe.k) or spec.n != recipe.n:
        raise DegreeMismatch("integrand and recipe disagree on n or degrees")
    w = weight_values(recipe.grid, psi)
    target = pairing(generate(recipe, 0), spec, w)
    vals = [pairing(generate(recipe, nu), spec, w) for nu in nus]
    gaps = [abs(v - target) for v in vals]
    L = 2 * vals[-1] - vals[-2] if len(vals) > 1 else vals[-1]
    gap = abs(L - target)
    ok = gap <= tol * abs(target) + 1e-12
    decay = [gaps[j] / gaps[j + 1] if gaps[j + 1] > 0 else np.inf for j in range(len(gaps) - 1)]
    rate = None
    if len(gaps) > 1 and gaps[-1] > 0 and gaps[-2] > 0:
        rate = float(np.log(gaps[-2] / gaps[-1]) / np.log(nus[-1] / nus[-2]))
    return ConvergenceReport([float(v) for v in nus], vals, gaps, float(L), float(target), float(gap), tol,
                             "converges" if ok else "does-not-converge", [float(v) for v in decay], rate)


def div_curl_recipe(res: int = 64, amplitude: float = 1.0) -> SequenceRecipe:
    """Two scalar potentials oscillating along x1 (n = 2, k = (1, 1))."""
    return SequenceRecipe(
        "laminate", 2, res, (1, 1),
        base=({"": "x1 + x1*x2"}, {"": "x2 + x1**2/2"}),
        beta=((1.0,), (1.0,)),
        amplitude=amplitude, axis=1,
    )


def determinant_pairing():
    from .integrands import QuasiaffineCombo

    return QuasiaffineCombo(2, (1, 1), 0.0, {(1, 1): np.array([1.0])})


def div_curl_weight(x1, x2):
    return 16.0 * x1 * (1 - x1) * x2 * (1 - x2)


@dataclass
class SemicontinuityReport:
    p: float
    amplitude: float
    nus: list[float]
    energies: list[float]
    base_energy: float
    delta: float
    expected: float
    verdict: str

    def to_dict(self) -> dict:
        return asdict(self)


def closed_nonconvergent_recipe(res: int = 64, amplitude: float = 1.0, n: int = 2, k: int = 2) -> SequenceRecipe:
    """theta_nu = theta + a sin(2 pi nu x1)/(2 pi nu) beta, sequence d theta_nu (degree k - 1)."""
    d = k - 2
    keys = _basis_keys(n, d)
    base = {keys[-1]: "x1 + x2**2/2"} if d == 0 else {keys[-1]: "x1*x2"}
    return SequenceRecipe("closed-nonconvergent", n, res, (k,), (base,), ((1.0,) + (0.0,) * (len(keys) - 1),),
                          amplitude=amplitude, axis=1)


def semicontinuity_energy(omega: Cochain, p: float) -> float:
    """I(omega) = (1/p) ||d omega||_p^p - (1/p) ||omega||_p^p with lumped norms."""
    dw = coboundary(omega) if omega.k < omega.grid.n else Cochain.zeros(omega.grid, omega.k)
    return (lp_norm(dw, p) ** p - lp_norm(omega, p) ** p) / p


def semicontinuity_counterexample(p: float = 2.0, recipe: SequenceRecipe | None = None,
                                  nus: Sequence[float] = (1, 2, 4, 8)) -> SemicontinuityReport:
    """Measure delta = I(d theta) - I(d theta_nu) at the finest nu.

    A weakly lower semicontinuous I would force delta <= 0 in the limit.  For the
    sine profile the expected value is (1/p) * amplitude^p * mean|cos|^p.
    """
    recipe = recipe or closed_nonconvergent_recipe()
    if recipe.kind != "closed-nonconvergent":
        raise ValueError("semicontinuity_counterexample needs a closed-nonconvergent recipe")
    if recipe.k[0] == 1:
        raise BadDegree("no such sequence exists for k = 1")
    base = semicontinuity_energy(generate(recipe, 0).omegas[0], p)
    energies = [semicontinuity_energy(generate(recipe, nu).omegas[0], p) for nu in nus]
    delta = base - energies[-1]
    from math import gamma, pi, sqrt

    mean_cos_p = gamma((p + 1) / 2) / (sqrt(pi) * gamma(p / 2 + 1))
    beta_norm = float(np.linalg.norm(recipe.beta[0]))
    expected = (recipe.amplitude * beta_norm) ** p * mean_cos_p / p
    return SemicontinuityReport(float(p), recipe.amplitude, [float(v) for v in nus], energies, base, float(delta),
                                float(expected), "fails-lsc" if delta > 0 else "no-gap")


def amplitude_slope(p: float = 2.0, amplitudes: Sequence[float] = (0.25, 0.5, 1.0), res: int = 64,
                    nus: Sequence[float] = (1, 2, 4, 8)) -> tuple[float, list[float]]:
    deltas = [semicontinuity_counterexample(p, closed_nonconvergent_recipe(res, a), nus).delta for a in amplitudes]
    slope = float(np.polyfit(np.log(amplitudes), np.log(deltas), 1)[0])
    return slope, deltas
