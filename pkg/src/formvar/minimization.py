"""Discrete direct method for I(omega) = int f(x, d omega) + <g, omega> with pinned boundary data.

Unknowns are the cochain values on cells that are not pinned.  Boundary data
omega0 supplies the pinned values.  ``tangential`` pinning fixes cells lying in
the boundary (the condition nu ^ omega = nu ^ omega0); ``full`` pinning fixes
every cell touching the boundary, a discrete stand-in for omega = omega0 on the
boundary.

Quadrature: NormPower terms use the lumped per-cell rule of ``lp_norm`` (this
is the mass inner product at p = 2, so the quadratic part is coercive on
cochains); every other term uses cell-centre reconstructions of d omega.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import comb
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg, factorized

from .dec import (
    CG_RTOL,
    Cochain,
    CubicalGrid,
    cell_values,
    coboundary,
    interior_codifferential,
    lp_norm,
    sample_form,
    solve_psd,
    w1p_norm,
)
from .errors import DegreeMismatch, GridMismatch, MaxIterations, NotCoercive, SolverDiverged
from .integrands import Growth, Integrand, NormPower, SumOf

PINNING = ("tangential", "full")


@dataclass(frozen=True, eq=False)
class VariationalProblem:
    grid: CubicalGrid
    integrand: Integrand
    omega0: tuple[Cochain, ...] = ()
    g: tuple[Cochain, ...] | None = None
    coefficient: np.ndarray | None = None  # per n-cell multiplier of f
    G: tuple[Cochain, ...] | None = None  # adds <G_i, d omega_i>
    zeroth_order: float = 0.0  # adds (z/2) <omega_i, omega_i>
    constant: float = 0.0
    pinning: str = "tangential"
    p: tuple[float, ...] | None = None

    def __post_init__(self):
        k = self.k
        g = self.grid
        if self.integrand.n != g.n:
            raise GridMismatch(f"integrand on R^{self.integrand.n}, grid of dimension {g.n}")
        if self.pinning not in PINNING:
            raise ValueError(f"pinning must be one of {PINNING}")
        om = tuple(self.omega0) or tuple(Cochain.zeros(g, ki - 1) for ki in k)
        object.__setattr__(self, "omega0", om)
        for name, deg_shift in (("omega0", 1), ("g", 1), ("G", 0)):
            val = getattr(self, name)
            if val is None:
                continue
            if len(val) != len(k):
                raise DegreeMismatch(f"{name} needs one cochain per factor")
            for w, ki in zip(val, k):
                if w.grid != g or w.k != ki - deg_shift:
                    raise DegreeMismatch(f"{name} factor must be a degree-{ki - deg_shift} cochain on the problem grid")
        if self.coefficient is not None:
            c = np.asarray(self.coefficient, dtype=float).reshape(-1)
            if c.size != g.n_cells:
                raise GridMismatch("coefficient field needs one value per n-cell")
            object.__setattr__(self, "coefficient", c)

    @property
    def k(self) -> tuple[int, ...]:
        return tuple(self.integrand.k)

    @property
    def growth(self) -> Growth | None:
        return getattr(self.integrand, "growth", None)

    def pinned_mask(self, i: int) -> np.ndarray:
        d = self.k[i] - 1
        return self.grid.touch_mask(d) if self.pinning == "full" else self.grid.boundary_mask(d)


@dataclass
class MinimizeReport:
    minimizer: tuple[Cochain, ...]
    energy: float
    iterations: int
    gradient_norm: float
    gauge_residual: float
    boundary_residual: float
    method: str
    energy_trace: list[float] = field(default_factory=list)
    converged: bool = True

    def to_dict(self, include_minimizer: bool = False) -> dict:
        d = {
            "energy": self.energy,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "gauge_residual": self.gauge_residual,
            "boundary_residual": self.boundary_residual,
            "method": self.method,
            "converged": self.converged,
            "energy_trace": list(self.energy_trace),
        }
        if include_minimizer:
            d["minimizer"] = [w.to_dict() for w in self.minimizer]
        return d


# energy -------------------------------------------------------------------------


def _flatten_terms(spec: Integrand, weight: float = 1.0):
    if isinstance(spec, SumOf):
        out = []
        for w, t in zip(spec.weights, spec.terms):
            out.extend(_flatten_terms(t, weight * w))
        return out
    return [(weight, spec)]


class DiscreteEnergy:
    """Energy and gradient as functions of the full list of cochain values."""

    def __init__(self, problem: VariationalProblem):
        self.problem = problem
        g = problem.grid
        self.grid = g
        self.k = problem.k
        coef = problem.coefficient if problem.coefficient is not None else np.ones(g.n_cells)
        self.cell_weight = g.h**g.n * coef
        self.lumped = []  # (factor, weight, p)
        recon = []
        for w, t in _flatten_terms(problem.integrand):
            if isinstance(t, NormPower):
                for i, (wi, pi) in enumerate(zip(t.weights, t.exponents)):
                    if w * wi != 0.0:
                        self.lumped.append((i, w * wi, pi))
            else:
                recon.append((w, t))
        self.recon = SumOf(tuple(t for _, t in recon), tuple(w for w, _ in recon)) if recon else None
        self.lumped_weight = {}
        for i, _, _ in self.lumped:
            d = self.k[i]
            if d not in self.lumped_weight:
                self.lumped_weight[d] = g.adjacency(d) @ coef
        self.sizes = [g.count(ki - 1) for ki in self.k]
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)])

    def split(self, x: np.ndarray) -> list[np.ndarray]:
        return [x[self.offsets[i]: self.offsets[i + 1]] for i in range(len(self.k))]

    def _dvals(self, parts):
        return [self.grid.d(ki - 1) @ v for v, ki in zip(parts, self.k)]

    def value(self, x: np.ndarray) -> float:
        g, pb = self.grid, self.problem
        parts = self.split(x)
        dv = self._dvals(parts)
        total = pb.constant
        if self.recon is not None:
            arrays = [(g.reconstruction(ki) @ v).reshape(g.n_cells, comb(g.n, ki)) for v, ki in zip(dv, self.k)]
            total += float(np.dot(self.cell_weight, self.recon.evaluate_batch(arrays)))
        for i, w, p in self.lumped:
            ki = self.k[i]
            u = np.abs(dv[i]) / g.h**ki
            total += w * float(np.dot(self.lumped_weight[ki], u**p))
        for i, ki in enumerate(self.k):
            M0 = g.mass(ki - 1)
            if pb.g is not None:
                total += float(np.dot(M0 * pb.g[i].values, parts[i]))
            if pb.zeroth_order:
                total += 0.5 * pb.zeroth_order * float(np.dot(M0 * parts[i], parts[i]))
            if pb.G is not None:
                total += float(np.dot(g.mass(ki) * pb.G[i].values, dv[i]))
        return total

    def gradient(self, x: np.ndarray) -> np.ndarray:
        g, pb = self.grid, self.problem
        parts = self.split(x)
        dv = self._dvals(parts)
        gd = [np.zeros_like(v) for v in dv]
        if self.recon is not None:
            arrays = [(g.reconstruction(ki) @ v).reshape(g.n_cells, comb(g.n, ki)) for v, ki in zip(dv, self.k)]
            grads = self.recon.gradient_batch(arrays)
            for i, (gr, ki) in enumerate(zip(grads, self.k)):
                gd[i] += g.reconstruction(ki).T @ (self.cell_weight[:, None] * gr).reshape(-1)
        for i, w, p in self.lumped:
            ki = self.k[i]
            hk = g.h**ki
            u = dv[i] / hk
            if p == 2.0:
                gd[i] += w * self.lumped_weight[ki] * 2.0 * u / hk
            else:
                a = np.abs(u)
                gd[i] += w * self.lumped_weight[ki] * p * np.power(a, p - 1.0) * np.sign(u) / hk
        out = []
        for i, ki in enumerate(self.k):
            M0 = g.mass(ki - 1)
            if pb.G is not None:
                gd[i] = gd[i] + g.mass(ki) * pb.G[i].values
            gi = g.d(ki - 1).T @ gd[i]
            if pb.g is not None:
                gi = gi + M0 * pb.g[i].values
            if pb.zeroth_order:
                gi = gi + pb.zeroth_order * M0 * parts[i]
            out.append(gi)
        return np.concatenate(out)


def energy(problem: VariationalProblem, omegas: Sequence[Cochain]) -> float:
    return DiscreteEnergy(problem).value(np.concatenate([w.values for w in omegas]))


# linear term and gauge ------------------------------------------------------------------


def check_coclosed(g: Sequence[Cochain], rtol: float = 1e-9) -> tuple[bool, float]:
    """max_i ||delta g_i|| over interior test cells; degree-0 factors pass trivially."""
    res, scale = 0.0, 0.0
    for gi in g:
        scale = max(scale, gi.norm())
        if gi.k == 0:
            continue
        res = max(res, interior_codifferential(gi).norm())
    return res <= rtol * max(scale, np.finfo(float).tiny) or res == 0.0, float(res)


def _interior_laplacian(grid: CubicalGrid, k: int):
    """d_V^T M d_V on k-cochains supported off the boundary, with V the index set."""
    V = grid.interior(k)
    D = grid.d(k)[:, V]
    A = (D.T @ sp.diags(grid.mass(k + 1)) @ D).tocsc()
    return V, D, A


def absorb_linear_term(problem: VariationalProblem) -> VariationalProblem:
    """Replace <g, omega> by <G, d omega> + constant with d^T M G = M g on free cells.

    G = d alpha for an interior potential alpha, so dG = 0.  For admissible omega
    (pinned values equal to omega0) the two energies agree.
    """
    if problem.g is None or all(not np.any(gi.values) for gi in problem.g):
        return replace(problem, g=None)
    ok, res = check_coclosed(problem.g)
    if not ok:
        raise ValueError(f"linear term is not coclosed (residual {res:.3e})")
    grid = problem.grid
    Gs, const = [], problem.constant
    for i, (gi, w0, ki) in enumerate(zip(problem.g, problem.omega0, problem.k)):
        d = ki - 1
        free = ~problem.pinned_mask(i)
        idx = np.flatnonzero(free)
        D = grid.d(d)[:, idx]
        A = (D.T @ sp.diags(grid.mass(ki)) @ D).tocsc()
        rhs = (grid.mass(d) * gi.values)[idx]
        a = factorized(A)(rhs) if d == 0 else solve_psd(A.tocsr(), rhs, A.diagonal())
        rel = np.linalg.norm(A @ a - rhs) / max(np.linalg.norm(rhs), np.finfo(float).tiny)
        if rel > 1e-8:
            raise SolverDiverged(f"linear-term potential solve residual {rel:.3e}", residual=rel)
        G = Cochain(grid, ki, D @ a)
        Gs.append(G)
        const += gi.dot(w0) - G.dot(coboundary(w0))
    if problem.G is not None:
        Gs = [a + b for a, b in zip(problem.G, Gs)]
    growth = problem.growth
    if growth is not None and growth.lower > 0:
        gmax = max(float(np.max(np.abs(G.values))) / grid.h**G.k for G in Gs)
        # Young: |G||xi| <= (lower/2)|xi|^p + C |G|^{p'}
        gamma = growth.gamma1
        for p in growth.p:
            if np.isfinite(p) and p > 1:
                q = p / (p - 1)
                gamma -= (growth.lower / 2 * p) ** (-q / p) * gmax**q / q
        growth = replace(growth, lower=growth.lower / 2, gamma1=gamma)
    integrand = problem.integrand
    if growth is not None and hasattr(integrand, "growth"):
        integrand = replace(integrand, growth=growth)
    return replace(problem, integrand=integrand, g=None, G=tuple(Gs), constant=const)


@dataclass
class GaugeResult:
    beta: Cochain
    theta: Cochain | None
    d_residual: float
    gauge_residual: float
    boundary_residual: float
    stability_ratio: float


def gauge_fix(omega: Cochain, omega0: Cochain | None = None, p: float = 2.0) -> GaugeResult:
    """beta = omega - d theta with interior theta chosen so that delta beta = 0.

    d beta = d omega and the boundary cells of beta equal those of omega exactly;
    the interior codifferential vanishes to solver tolerance.
    """
    grid = omega.grid
    if omega.k == 0:
        beta, theta = omega, None
    else:
        V, D, A = _interior_laplacian(grid, omega.k - 1)
        Mw = grid.mass(omega.k) * omega.values
        rhs = D.T @ Mw
        t = factorized(A)(rhs) if omega.k == 1 else solve_psd(A.tocsr(), rhs, A.diagonal(),
                                                              scale=np.linalg.norm(abs(D.T) @ np.abs(Mw)))
        tv = np.zeros(grid.count(omega.k - 1))
        tv[V] = t
        theta = Cochain(grid, omega.k - 1, tv)
        beta = omega - coboundary(theta)
    scale = max(omega.norm(), np.finfo(float).tiny)
    dres = (coboundary(beta) - coboundary(omega)).norm() / scale if omega.k < grid.n else 0.0
    gres = interior_codifferential(beta).norm() / scale if omega.k > 0 else 0.0
    ref = omega0 if omega0 is not None else omega
    mask = grid.boundary_mask(omega.k)
    bres = float(np.max(np.abs(beta.values[mask] - ref.values[mask]), initial=0.0))
    dn = lp_norm(coboundary(omega), p) if omega.k < grid.n else 0.0
    base = w1p_norm(omega0, p) if omega0 is not None else 0.0
    denom = dn + base
    ratio = w1p_norm(beta, p) / denom if denom > 0 else np.inf
    return GaugeResult(beta, theta, float(dres), float(gres), bres, float(ratio))


class GaugeProjector:
    """M-orthogonal projection removing d(interior potentials) from a factor."""

    def __init__(self, grid: CubicalGrid, k: int):
        self.grid, self.k = grid, k
        self.active = k >= 1
        if self.active:
            self.V, self.D, A = _interior_laplacian(grid, k - 1)
            self.M = grid.mass(k)
            self.DTabs = abs(self.D.T)
            if k == 1:
                lu = factorized(A)
                self._solve = lambda b, s: lu(b)
            else:
                Ar = A.tocsr()
                diag = Ar.diagonal()
                self._solve = lambda b, s: solve_psd(Ar, b, diag, scale=s)

    def _correction(self, u: np.ndarray) -> np.ndarray:
        s = np.linalg.norm(self.DTabs @ np.abs(u))
        return self.D @ self._solve(self.D.T @ u, s)

    def apply(self, v: np.ndarray) -> np.ndarray:
        if not self.active:
            return v
        return v - self._correction(self.M * v)

    def apply_transpose(self, y: np.ndarray) -> np.ndarray:
        if not self.active:
            return y
        return y - self.M * self._correction(y)


# optimisation ------------------------------------------------------------------


def _lbfgs(fun, grad, x0, memory=10, c1=1e-4, shrink=0.5, gtol=1e-8, maxiter=5000):
    """Limited-memory BFGS with backtracking Armijo steps.  Returns x, trace, iterations, grad norm."""
    x = x0.copy()
    f = fun(x)
    gvec = grad(x)
    g0 = np.linalg.norm(gvec)
    stop = gtol * max(g0, 1.0)
    S, Y = [], []
    trace = [f]
    it = 0
    while np.linalg.norm(gvec) > stop:
        if it >= maxiter:
            raise MaxIterations(f"L-BFGS stopped after {maxiter} iterations with |grad| = {np.linalg.norm(gvec):.3e}")
        q = gvec.copy()
        alphas = []
        for s, y in reversed(list(zip(S, Y))):
            rho = 1.0 / np.dot(y, s)
            a = rho * np.dot(s, q)
            q -= a * y
            alphas.append((rho, a))
        if S:
            q *= np.dot(S[-1], Y[-1]) / np.dot(Y[-1], Y[-1])
        else:
            q /= max(np.linalg.norm(gvec), 1.0)
        for (s, y), (rho, a) in zip(zip(S, Y), reversed(alphas)):
            b = rho * np.dot(y, q)
            q += (a - b) * s
        direction = -q
        slope = np.dot(gvec, direction)
        if slope >= 0:
            direction, slope = -gvec, -np.dot(gvec, gvec)
            S, Y = [], []
        t = 1.0
        while True:
            xn = x + t * direction
            fn = fun(xn)
            if fn <= f + c1 * t * slope:
                break
            t *= shrink
            if t < 1e-20:
                # no decrease representable; the gradient is at roundoff level
                return x, trace, it, float(np.linalg.norm(gvec))
        gn = grad(xn)
        s, y = xn - x, gn - gvec
        if np.dot(s, y) > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            S.append(s)
            Y.append(y)
            if len(S) > memory:
                S.pop(0)
                Y.pop(0)
        x, f, gvec = xn, fn, gn
        trace.append(f)
        it += 1
    return x, trace, it, float(np.linalg.norm(gvec))


class _Reduced:
    """Energy restricted to free dofs, optionally composed with the gauge projection."""

    def __init__(self, problem: VariationalProblem, gauge: bool):
        self.E = DiscreteEnergy(problem)
        self.problem = problem
        self.base = np.concatenate([w.values for w in problem.omega0])
        masks = [~problem.pinned_mask(i) for i in range(len(problem.k))]
        self.free = np.concatenate(masks)
        self.idx = np.flatnonzero(self.free)
        self.gauge = gauge
        if gauge:
            self.proj = [GaugeProjector(problem.grid, ki - 1) for ki in problem.k]

    def full(self, x):
        v = self.base.copy()
        v[self.idx] += x
        if self.gauge:
            v = np.concatenate([P.apply(part) for P, part in zip(self.proj, self.E.split(v))])
        return v

    def fun(self, x):
        return self.E.value(self.full(x))

    def grad(self, x):
        gfull = self.E.gradient(self.full(x))
        if self.gauge:
            gfull = np.concatenate([P.apply_transpose(part) for P, part in zip(self.proj, self.E.split(gfull))])
        return gfull[self.idx]


def _check_coercive(problem: VariationalProblem):
    gr = problem.growth
    if gr is None or not gr.coercive:
        raise NotCoercive("minimize needs declared growth with a positive lower constant")


def minimize(problem: VariationalProblem, method: str = "descent", gauge: bool = False, gtol: float = 1e-8,
             maxiter: int = 5000, require_growth: bool = True) -> MinimizeReport:
    """Minimise over cochains matching omega0 on pinned cells.

    ``linear`` solves the Euler-Lagrange system by CG and needs a quadratic
    integrand; ``descent`` runs L-BFGS.  With ``gauge=True`` the energy is
    composed with the projection onto gauge-fixed fields.
    """
    if require_growth:
        _check_coercive(problem)
    R = _Reduced(problem, gauge)
    x0 = np.zeros(R.idx.size)
    if method == "linear":
        if not problem.integrand.is_quadratic:
            raise ValueError("the linear path needs a quadratic integrand")
        g0 = R.grad(x0)
        scale = 1e3 * max(1.0, float(np.abs(R.base).max(initial=0.0)))

        def hv(v):
            nv = np.linalg.norm(v)
            if nv == 0.0:
                return np.zeros_like(v)
            t = scale / nv
            return (R.grad(x0 + t * v) - R.grad(x0 - t * v)) / (2 * t)

        N = x0.size
        H = LinearOperator((N, N), matvec=hv)
        x, info = cg(H, -g0, rtol=CG_RTOL, atol=0.0, maxiter=20 * N + 100)
        trace = [R.fun(x0), R.fun(x)]
        its = int(info) if info > 0 else -1
        gn = float(np.linalg.norm(R.grad(x)))
    elif method == "descent":
        x, trace, its, gn = _lbfgs(R.fun, R.grad, x0, gtol=gtol, maxiter=maxiter)
    else:
        raise ValueError(f"unknown method {method!r}")
    v = R.full(x)
    omegas = tuple(Cochain(problem.grid, ki - 1, part) for part, ki in zip(R.E.split(v), problem.k))
    gauge_res = max((interior_codifferential(gauge_fix(w).beta).norm() / max(w.norm(), 1e-300)
                     if w.k > 0 else 0.0) for w in omegas)
    bres = max(float(np.max(np.abs(w.values[problem.pinned_mask(i)] - problem.omega0[i].values[problem.pinned_mask(i)]),
                            initial=0.0)) for i, w in enumerate(omegas))
    return MinimizeReport(omegas, R.E.value(v), its, gn, float(gauge_res), bres, method, [float(e) for e in trace])


# nonexistence mechanism -------------------------------------------------------------


@dataclass
class NonexistenceReport:
    res: list[int]
    energies: list[float]
    interior_mass: list[float]
    boundary_adjacent_mass: list[float]
    interior_codifferential: list[float]
    relaxed_norm: float
    k: int
    decreasing: bool
    note: str = ("a finite grid cannot decide non-attainment; the report shows the mechanism: "
                 "the relaxed minimizer is zero and interior mass leaks away under refinement")

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return asdict(self)


def region_mass(w: Cochain, lo: float = 0.25, hi: float = 0.75) -> float:
    """L^2 mass over the n-cells whose centre lies in (lo, hi)^n, from cell-centre reconstructions."""
    g = w.grid
    c = g.cell_centers()
    inside = np.all((c > lo) & (c < hi), axis=1)
    vals = cell_values(w)[inside]
    return float(g.h**g.n * np.sum(vals**2))


def grid_total(w: Cochain) -> float:
    return region_mass(w, -1.0, 2.0)


def nonexistence_problem(res: int, k: int = 2, n: int = 2, omega0=None) -> VariationalProblem:
    """I = 1/2 |d omega|^2 + 1/2 |omega|^2 with fully pinned boundary data."""
    grid = CubicalGrid(n, res)
    if omega0 is None:
        omega0 = {f"{n}": "x1*(1 - x1)"} if k == 2 else ({"": "1 + x1"} if k == 1 else {})
    w0 = sample_form(grid, omega0, k - 1) if isinstance(omega0, dict) else omega0
    spec = NormPower(n, (k,), (0.5,), (2.0,), growth=Growth((2.0,), lower=0.5))
    return VariationalProblem(grid, spec, (w0,), zeroth_order=1.0, pinning="full")


def relaxed_minimizer_norm(problem: VariationalProblem, start: Cochain) -> float:
    """CG on the homogeneous Euler-Lagrange system over {delta w = 0, tangential trace 0}.

    The quadratic form is positive definite there, so the minimizer is 0; we start
    from the projection of ``start`` and report the norm reached.
    """
    grid = problem.grid
    k = problem.k[0] - 1
    tan = grid.boundary_mask(k)
    free = np.flatnonzero(~tan)
    P = GaugeProjector(grid, k)
    spec = replace(problem, omega0=(Cochain.zeros(grid, k),), g=None, G=None, constant=0.0)
    E = DiscreteEnergy(spec)

    def embed(x):
        v = np.zeros(grid.count(k))
        v[free] = x
        return P.apply(v)

    def hv(x):
        v = embed(x)
        gfull = E.gradient(v)  # homogeneous quadratic: gradient is linear
        return P.apply_transpose(gfull)[free]

    N = free.size
    H = LinearOperator((N, N), matvec=hv)
    v0 = start.values.copy()
    v0[tan] = 0.0
    x0 = P.apply(v0)[free]
    # solve H y = -H x0 so that x0 + y is the constrained minimizer
    y, _ = cg(H, -hv(x0), rtol=1e-14, atol=0.0, maxiter=20 * N)
    return float(Cochain(grid, k, embed(x0 + y)).norm())


def nonexistence_probe(resolutions: Sequence[int] = (8, 16, 32), k: int = 2, n: int = 2, omega0=None,
                       method: str = "linear") -> NonexistenceReport:
    energies, inner, outer, cod = [], [], [], []
    relaxed = 0.0
    for res in resolutions:
        pb = nonexistence_problem(res, k, n, omega0)
        rep = minimize(pb, method=method)
        w = rep.minimizer[0]
        energies.append(rep.energy)
        inner.append(region_mass(w))
        outer.append(float(grid_total(w)) - inner[-1])
        cod.append(interior_codifferential(w).norm() if w.k > 0 else 0.0)
        if w.k > 0:
            relaxed = max(relaxed, relaxed_minimizer_norm(pb, w))
    dec = all(b < a for a, b in zip(inner, inner[1:]))
    return NonexistenceReport(list(resolutions), energies, inner, outer, cod, relaxed, k, dec)
