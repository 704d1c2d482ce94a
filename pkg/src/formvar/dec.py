"""Cubical discrete exterior calculus on the unit box (0,1)^n.

k-cells are indexed by an axis subset S (|S| = k, in ``combinations`` order)
and a corner multi-index c.  The cells with axes S form a block of shape
``res`` along S and ``res + 1`` across, flattened in C order; blocks are
concatenated in the order of S.  A cochain stores the integral of the form
over each cell, so the pointwise coefficient is ``value / h**k``.

The inner product is diagonal.  A k-cell owns the dual region made of its
own extent along S and half a cell on each side across (cut at the box
boundary), so

    <u, w> = sum_cells vol(cell) * (u / h^k) * (w / h^k).

``delta_free`` is the exact adjoint of d for this product; with the
tangential-zero condition cells lying in the boundary are zeroed on both
sides, which keeps delta o delta = 0 exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations, product
from math import comb
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp
import sympy
from scipy.sparse.linalg import LinearOperator, cg

from .algebra import ExteriorForm, perm_sign
from .errors import BadExponent, DegreeOverflow, DegreeZero, EvalError, GridMismatch, SolverDiverged, TopDegree

RES_CAP = {2: 64, 3: 24, 4: 8}
CG_RTOL = 1e-12


@dataclass(frozen=True)
class CubicalGrid:
    n: int
    res: int

    def __post_init__(self):
        if self.n not in RES_CAP:
            raise GridMismatch(f"grid dimension must be 2, 3 or 4, got {self.n}")
        if not 1 <= self.res <= RES_CAP[self.n]:
            raise GridMismatch(f"res must be in 1..{RES_CAP[self.n]} for n={self.n}, got {self.res}")

    @property
    def h(self) -> float:
        return 1.0 / self.res

    def axes(self, k: int) -> tuple[tuple[int, ...], ...]:
        return tuple(combinations(range(self.n), k))

    def block_shape(self, S) -> tuple[int, ...]:
        return tuple(self.res if a in S else self.res + 1 for a in range(self.n))

    def offsets(self, k: int) -> dict[tuple[int, ...], int]:
        return _offsets(self.n, self.res, k)

    def count(self, k: int) -> int:
        return comb(self.n, k) * self.res**k * (self.res + 1) ** (self.n - k)

    @property
    def n_cells(self) -> int:
        return self.res**self.n

    def d(self, k: int) -> sp.csr_matrix:
        if k >= self.n:
            raise TopDegree(f"no coboundary out of degree {k} on R^{self.n}")
        return _coboundary(self.n, self.res, k)

    def volumes(self, k: int) -> np.ndarray:
        return _volumes(self.n, self.res, k)

    def mass(self, k: int) -> np.ndarray:
        return self.volumes(k) / self.h ** (2 * k)

    def boundary_mask(self, k: int) -> np.ndarray:
        """Cells contained in the boundary (zeroed by the tangential condition)."""
        return _boundary_mask(self.n, self.res, k)

    def touch_mask(self, k: int) -> np.ndarray:
        """Cells whose closure meets the boundary."""
        return _touch_mask(self.n, self.res, k)

    def interior(self, k: int) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask(k))

    def delta(self, k: int, bc: str = "free") -> sp.csr_matrix:
        """Codifferential from degree k to k-1 as a sparse matrix."""
        if k == 0:
            raise DegreeZero("codifferential of a 0-cochain")
        D = self.d(k - 1)
        op = sp.diags(1.0 / self.mass(k - 1)) @ D.T @ sp.diags(self.mass(k))
        if bc == "free":
            return op.tocsr()
        if bc == "tangential-zero":
            Pk = sp.diags((~self.boundary_mask(k)).astype(float))
            Pk1 = sp.diags((~self.boundary_mask(k - 1)).astype(float))
            return (Pk1 @ op @ Pk).tocsr()
        raise ValueError(f"unknown boundary condition {bc!r}")

    def reconstruction(self, k: int) -> sp.csr_matrix:
        """Cell-centre coefficients: maps a k-cochain to a flat (res^n * C(n,k)) array."""
        return _reconstruction(self.n, self.res, k)

    def adjacency(self, k: int) -> sp.csr_matrix:
        """(N_k, res^n) matrix of the dual volume each n-cell contributes to each k-cell."""
        return _adjacency(self.n, self.res, k)

    def cell_centers(self) -> np.ndarray:
        idx = np.indices((self.res,) * self.n).reshape(self.n, -1).T
        return (idx + 0.5) * self.h

    def corners(self, k: int, S) -> np.ndarray:
        return np.indices(self.block_shape(S)).reshape(self.n, -1)


@lru_cache(maxsize=None)
def _offsets(n, res, k):
    g = CubicalGrid(n, res)
    out, pos = {}, 0
    for S in g.axes(k):
        out[S] = pos
        pos += int(np.prod(g.block_shape(S)))
    return out


def _flat(g: CubicalGrid, k, S, C) -> np.ndarray:
    return g.offsets(k)[S] + np.ravel_multi_index(C, g.block_shape(S))


@lru_cache(maxsize=None)
def _coboundary(n, res, k):
    g = CubicalGrid(n, res)
    rows, cols, vals = [], [], []
    for Sp in g.axes(k + 1):
        C = g.corners(k + 1, Sp)
        r = _flat(g, k + 1, Sp, C)
        for j, a in enumerate(Sp):
            S = tuple(b for b in Sp if b != a)
            sgn = -1.0 if j % 2 else 1.0
            C1 = C.copy()
            C1[a] += 1
            rows += [r, r]
            cols += [_flat(g, k, S, C1), _flat(g, k, S, C)]
            vals += [np.full(r.size, sgn), np.full(r.size, -sgn)]
    M = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(g.count(k + 1), g.count(k)))
    M.sort_indices()
    return M


@lru_cache(maxsize=None)
def _volumes(n, res, k):
    g = CubicalGrid(n, res)
    h = g.h
    out = np.empty(g.count(k))
    for S in g.axes(k):
        C = g.corners(k, S)
        v = np.full(C.shape[1], h**k)
        for a in range(n):
            if a not in S:
                edge = (C[a] == 0) | (C[a] == res)
                v *= np.where(edge, h / 2, h)
        out[_flat(g, k, S, C)] = v
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _boundary_mask(n, res, k):
    g = CubicalGrid(n, res)
    out = np.zeros(g.count(k), dtype=bool)
    for S in g.axes(k):
        C = g.corners(k, S)
        m = np.zeros(C.shape[1], dtype=bool)
        for a in range(n):
            if a not in S:
                m |= (C[a] == 0) | (C[a] == res)
        out[_flat(g, k, S, C)] = m
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _touch_mask(n, res, k):
    g = CubicalGrid(n, res)
    out = np.zeros(g.count(k), dtype=bool)
    for S in g.axes(k):
        C = g.corners(k, S)
        m = np.zeros(C.shape[1], dtype=bool)
        for a in range(n):
            if a in S:
                m |= (C[a] == 0) | (C[a] == res - 1)
            else:
                m |= (C[a] == 0) | (C[a] == res)
        out[_flat(g, k, S, C)] = m
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _adjacency(n, res, k):
    g = CubicalGrid(n, res)
    h = g.h
    w = h**k * (h / 2) ** (n - k)
    cells = np.indices((res,) * n).reshape(n, -1)
    cell_ids = np.arange(cells.shape[1])
    rows, cols = [], []
    for S in g.axes(k):
        free = [a for a in range(n) if a not in S]
        for eps in product((0, 1), repeat=len(free)):
            C = cells.copy()
            for a, e in zip(free, eps):
                C[a] += e
            rows.append(_flat(g, k, S, C))
            cols.append(cell_ids)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    return sp.csr_matrix((np.full(rows.size, w), (rows, cols)), shape=(g.count(k), res**n))


@lru_cache(maxsize=None)
def _reconstruction(n, res, k):
    g = CubicalGrid(n, res)
    ncomp = comb(n, k)
    scale = 1.0 / (2 ** (n - k) * g.h**k)
    cells = np.indices((res,) * n).reshape(n, -1)
    cell_ids = np.arange(cells.shape[1])
    rows, cols = [], []
    for s, S in enumerate(g.axes(k)):
        free = [a for a in range(n) if a not in S]
        for eps in product((0, 1), repeat=len(free)):
            C = cells.copy()
            for a, e in zip(free, eps):
                C[a] += e
            rows.append(cell_ids * ncomp + s)
            cols.append(_flat(g, k, S, C))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    return sp.csr_matrix((np.full(rows.size, scale), (rows, cols)), shape=(res**n * ncomp, g.count(k)))


# cochains -----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Cochain:
    grid: CubicalGrid
    k: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if not 0 <= self.k <= self.grid.n:
            raise GridMismatch(f"degree {self.k} outside 0..{self.grid.n}")
        if v.size != self.grid.count(self.k):
            raise GridMismatch(f"{v.size} values for {self.grid.count(self.k)} cells")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid, k) -> "Cochain":
        return cls(grid, k, np.zeros(grid.count(k)))

    @classmethod
    def random(cls, grid, k, rng, tangential_zero=False) -> "Cochain":
        v = rng.normal(size=grid.count(k))
        if tangential_zero:
            v[grid.boundary_mask(k)] = 0.0
        return cls(grid, k, v)

    def _check(self, other: "Cochain"):
        if other.grid != self.grid or other.k != self.k:
            raise GridMismatch(f"cochains on {self.grid}/k={self.k} and {other.grid}/k={other.k}")

    def __add__(self, other):
        self._check(other)
        return Cochain(self.grid, self.k, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return Cochain(self.grid, self.k, self.values - other.values)

    def __neg__(self):
        return Cochain(self.grid, self.k, -self.values)

    def __mul__(self, s: float):
        return Cochain(self.grid, self.k, float(s) * self.values)

    __rmul__ = __mul__

    def dot(self, other: "Cochain") -> float:
        self._check(other)
        return float(np.sum(self.grid.mass(self.k) * self.values * other.values))

    def norm(self) -> float:
        return float(np.sqrt(max(self.dot(self), 0.0)))

    def masked(self, mask: np.ndarray) -> "Cochain":
        v = self.values.copy()
        v[mask] = 0.0
        return Cochain(self.grid, self.k, v)

    def tangential_trace(self) -> np.ndarray:
        return self.values[self.grid.boundary_mask(self.k)]

    def to_dict(self) -> dict:
        return {"n": self.grid.n, "k": self.k, "res": self.grid.res, "values": [float(v) for v in self.values]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Cochain":
        extra = set(d) - {"n", "k", "res", "values"}
        if extra:
            raise ValueError(f"unknown cochain fields {sorted(extra)}")
        return cls(CubicalGrid(int(d["n"]), int(d["res"])), int(d["k"]), np.asarray(d["values"], dtype=float))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Cochain":
        return cls.from_dict(json.loads(text))


def inner(a: Cochain, b: Cochain) -> float:
    return a.dot(b)


def coboundary(w: Cochain) -> Cochain:
    return Cochain(w.grid, w.k + 1, w.grid.d(w.k) @ w.values)


def codifferential(w: Cochain, bc: str = "free") -> Cochain:
    return Cochain(w.grid, w.k - 1, w.grid.delta(w.k, bc) @ w.values)


def interior_codifferential(w: Cochain) -> Cochain:
    """delta w tested against compactly supported forms: free delta with boundary rows dropped."""
    out = w.grid.delta(w.k, "free") @ w.values
    out[w.grid.boundary_mask(w.k - 1)] = 0.0
    return Cochain(w.grid, w.k - 1, out)


def cell_values(w: Cochain) -> np.ndarray:
    """Coefficients reconstructed at the n-cell centres, shape (res^n, C(n,k))."""
    return (w.grid.reconstruction(w.k) @ w.values).reshape(w.grid.n_cells, comb(w.grid.n, w.k))


def lp_norm(w: Cochain, p) -> float:
    """Lumped L^p norm: each cell carries |value / h^k|^p times its dual volume."""
    p = float(p)
    if not p >= 1.0:
        raise BadExponent(f"L^p norm needs p >= 1, got {p}")
    u = np.abs(w.values) / w.grid.h**w.k
    if np.isinf(p):
        return float(u.max(initial=0.0))
    return float(np.sum(w.grid.volumes(w.k) * u**p) ** (1.0 / p))


def w1p_norm(w: Cochain, p) -> float:
    """Discrete W^{1,p} norm: L^p of the coefficients plus forward differences in every direction."""
    p = float(p)
    if not p >= 1.0:
        raise BadExponent(f"W^(1,p) norm needs p >= 1, got {p}")
    g = w.grid
    h = g.h
    total = lp_norm(w, p) ** p if not np.isinf(p) else lp_norm(w, p)
    for S in g.axes(w.k):
        off = g.offsets(w.k)[S]
        shape = g.block_shape(S)
        u = w.values[off: off + int(np.prod(shape))].reshape(shape) / h**w.k
        for a in range(g.n):
            du = np.abs(np.diff(u, axis=a)) / h
            if np.isinf(p):
                total = max(total, float(du.max(initial=0.0)))
            else:
                total += h**g.n * float(np.sum(du**p))
    return float(total if np.isinf(p) else total ** (1.0 / p))


# sampling -----------------------------------------------------------------------

_GAUSS_X = np.array([0.5 - np.sqrt(0.15), 0.5, 0.5 + np.sqrt(0.15)])
_GAUSS_W = np.array([5.0, 8.0, 5.0]) / 18.0


def coordinate_symbols(n: int):
    return sympy.symbols(" ".join(f"x{i + 1}" for i in range(n)))


def _key(key, k: int) -> tuple[int, ...]:
    if isinstance(key, str):
        key = tuple(int(t) for t in key.replace(" ", "").split(",") if t)
    key = tuple(int(t) - 1 for t in key)
    if len(key) != k:
        raise EvalError(f"component {key} is not a {k}-index")
    return key


def symbolic_components(components: Mapping, n: int, k: int) -> dict[tuple[int, ...], sympy.Expr]:
    """Normalise {1-based index: expression} into {0-based increasing tuple: sympy expr}."""
    xs = coordinate_symbols(n)
    local = {f"x{i + 1}": x for i, x in enumerate(xs if n > 1 else (xs,))}
    out: dict[tuple[int, ...], sympy.Expr] = {}
    for key, expr in components.items():
        I = _key(key, k)
        s = perm_sign(I)
        if s == 0:
            continue
        try:
            e = sympy.sympify(expr, locals=local) if not isinstance(expr, sympy.Expr) else expr
        except (sympy.SympifyError, TypeError) as exc:
            raise EvalError(f"cannot parse component {expr!r}: {exc}") from exc
        J = tuple(sorted(I))
        out[J] = out.get(J, 0) + s * e
    return out


def symbolic_d(components: Mapping[tuple[int, ...], sympy.Expr], n: int) -> dict[tuple[int, ...], sympy.Expr]:
    """Exterior derivative of a symbolic form given with 0-based increasing keys."""
    xs = coordinate_symbols(n)
    out: dict[tuple[int, ...], sympy.Expr] = {}
    for I, f in components.items():
        for a in range(n):
            if a in I:
                continue
            J = tuple(sorted((a,) + I))
            out[J] = out.get(J, 0) + perm_sign((a,) + I) * sympy.diff(f, xs[a])
    return {J: sympy.simplify(e) for J, e in out.items()}


def sample_form(grid: CubicalGrid, form, k: int | None = None) -> Cochain:
    """de Rham map: integrate a smooth k-form over every k-cell (3-point Gauss per axis).

    ``form`` may be a constant ExteriorForm, a mapping from index tuples (1-based, or
    strings like "1,2") to expressions in x1..xn or numpy callables, or a callable
    taking points of shape (..., n) and returning (..., C(n,k)).
    """
    n, h = grid.n, grid.h
    if isinstance(form, ExteriorForm):
        if form.n != n:
            raise GridMismatch(f"form on R^{form.n} sampled on an n={n} grid")
        k = form.k
        vals = np.empty(grid.count(k))
        for s, S in enumerate(grid.axes(k)):
            off = grid.offsets(k)[S]
            size = int(np.prod(grid.block_shape(S)))
            vals[off: off + size] = form.vector[s] * h**k
        return Cochain(grid, k, vals)
    if k is None:
        raise EvalError("degree k is required for non-constant forms")

    if callable(form) and not isinstance(form, Mapping):
        def comp(s, pts):
            return np.asarray(form(pts), dtype=float)[..., s]
        axes_with = [(s, S) for s, S in enumerate(grid.axes(k))]
        getter = {S: (lambda pts, s=s: comp(s, pts)) for s, S in axes_with}
    else:
        getter = {}
        xs = coordinate_symbols(n)
        sym = {}
        callables = {}
        for key, expr in form.items():
            if callable(expr) and not isinstance(expr, sympy.Expr):
                I = _key(key, k)
                if perm_sign(I) != 1:
                    raise EvalError("numpy callables need increasing index keys")
                callables[I] = expr
            else:
                sym[key] = expr
        for I, e in symbolic_components(sym, n, k).items():
            fn = sympy.lambdify(xs, e, modules="numpy")
            getter[I] = (lambda pts, fn=fn: np.broadcast_to(fn(*np.moveaxis(pts, -1, 0)), pts.shape[:-1]))
        for I, fn in callables.items():
            prev = getter.get(I)
            getter[I] = (lambda pts, fn=fn, prev=prev: fn(*np.moveaxis(pts, -1, 0))
                         + (prev(pts) if prev else 0.0))

    vals = np.zeros(grid.count(k))
    for S in grid.axes(k):
        if S not in getter:
            continue
        C = grid.corners(k, S).T * h  # (cells, n)
        nodes = np.array(list(product(_GAUSS_X, repeat=k))) if k else np.zeros((1, 0))
        weights = np.array([np.prod(w) for w in product(_GAUSS_W, repeat=k)]) if k else np.ones(1)
        pts = np.repeat(C[:, None, :], len(nodes), axis=1)
        for j, a in enumerate(S):
            pts[:, :, a] += h * nodes[:, j]
        try:
            with np.errstate(all="raise"):
                f = np.asarray(getter[S](pts), dtype=float)
        except Exception as exc:  # user expressions can fail in many ways
            raise EvalError(f"could not evaluate component {S}: {exc}") from exc
        f = np.broadcast_to(f, pts.shape[:-1])
        if not np.all(np.isfinite(f)):
            raise EvalError(f"non-finite values in component {S}")
        off = grid.offsets(k)[S]
        vals[off: off + C.shape[0]] = (f @ weights) * h**k
    return Cochain(grid, k, vals)


# cup product ----------------------------------------------------------------------


@lru_cache(maxsize=None)
def _cup_plan(n, res, k, l):
    g = CubicalGrid(n, res)
    plan = []
    for U in g.axes(k + l):
        C = g.corners(k + l, U)
        rows = _flat(g, k + l, U, C)
        for A in combinations(U, k):
            B = tuple(a for a in U if a not in A)
            sign = perm_sign(A + B)
            CB = C.copy()
            for a in A:
                CB[a] += 1
            plan.append((rows, float(sign), _flat(g, k, A, C), _flat(g, l, B, CB)))
    return plan


def cup(a: Cochain, b: Cochain) -> Cochain:
    """Cubical cup product: front A-face at the corner times back B-face across it.

    Satisfies d(a u b) = da u b + (-1)^deg(a) a u db exactly.
    """
    if a.grid != b.grid:
        raise GridMismatch("cup product of cochains on different grids")
    g = a.grid
    if a.k + b.k > g.n:
        raise DegreeOverflow(f"cup product of degrees {a.k}+{b.k} exceeds n={g.n}")
    out = np.zeros(g.count(a.k + b.k))
    for rows, sign, ia, ib in _cup_plan(g.n, g.res, a.k, b.k):
        out[rows] += sign * a.values[ia] * b.values[ib]
    return Cochain(g, a.k + b.k, out)


# linear solves and Hodge decomposition --------------------------------------------------


def solve_psd(A, b: np.ndarray, diag: np.ndarray | None = None, rtol: float = CG_RTOL, maxiter: int | None = None,
              scale: float = 0.0) -> np.ndarray:
    """CG for a symmetric positive semidefinite (consistent) system, Jacobi preconditioned.

    ``scale`` is the magnitude of the terms that were summed into b; a right-hand
    side at roundoff level relative to it is treated as zero.
    """
    b = np.asarray(b, dtype=float)
    nb = np.linalg.norm(b)
    atol = rtol * scale
    if nb <= atol or nb == 0.0:
        return np.zeros_like(b)
    N = b.size
    precond = None
    if diag is not None:
        inv = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 1.0)
        precond = LinearOperator((N, N), matvec=lambda x: inv * x)
    x, info = cg(A, b, rtol=rtol, atol=atol, maxiter=maxiter or 10_000 * N, M=precond)
    matvec = A.matvec if isinstance(A, LinearOperator) else (lambda v: A @ v)
    res = np.linalg.norm(b - matvec(x))
    if info != 0 and res > 10 * max(rtol * nb, atol):
        raise SolverDiverged(f"CG stopped with relative residual {res / nb:.3e}", residual=res / nb)
    return x


@dataclass(frozen=True)
class HodgeSplit:
    exact: Cochain
    coexact: Cochain
    harmonic: Cochain
    alpha: Cochain | None
    beta: Cochain | None
    bc: str
    residuals: dict = field(default_factory=dict)

    def parts(self):
        return (self.exact, self.coexact, self.harmonic)


def _subspace(grid, k, bc):
    if bc == "free":
        return np.arange(grid.count(k))
    if bc == "tangential-zero":
        return grid.interior(k)
    raise ValueError(f"unknown boundary condition {bc!r}")


def hodge_decompose(w: Cochain, bc: str = "tangential-zero") -> HodgeSplit:
    """w = d alpha + delta beta + harmonic.

    With ``free`` the potentials are unconstrained; with ``tangential-zero`` alpha and
    beta (hence both exact and coexact parts) vanish on boundary cells, and whatever
    of w lives on the boundary stays in the harmonic remainder.
    """
    g, k = w.grid, w.k
    n = g.n
    Mk = g.mass(k)
    Vk = _subspace(g, k, bc)
    exact = np.zeros(g.count(k))
    coexact = np.zeros(g.count(k))
    alpha = beta = None
    if k >= 1:
        Vm = _subspace(g, k - 1, bc)
        D = g.d(k - 1)[:, Vm]
        A = (D.T @ sp.diags(Mk) @ D).tocsr()
        rhs = D.T @ (Mk * w.values)
        a = solve_psd(A, rhs, A.diagonal(), scale=np.linalg.norm(abs(D.T) @ np.abs(Mk * w.values)))
        av = np.zeros(g.count(k - 1))
        av[Vm] = a
        alpha = Cochain(g, k - 1, av)
        exact = D @ a
    if k < n:
        Vp = _subspace(g, k + 1, bc)
        B = g.d(k)[Vp][:, Vk].T.tocsr()
        Minv = 1.0 / Mk[Vk]
        A = (B.T @ sp.diags(Minv) @ B).tocsr()
        rhs = B.T @ w.values[Vk]
        gam = solve_psd(A, rhs, A.diagonal(), scale=np.linalg.norm(abs(B.T) @ np.abs(w.values[Vk])))
        coexact[Vk] = Minv * (B @ gam)
        bv = np.zeros(g.count(k + 1))
        bv[Vp] = gam / g.mass(k + 1)[Vp]
        beta = Cochain(g, k + 1, bv)
    harmonic = w.values - exact - coexact
    E, Co, H = Cochain(g, k, exact), Cochain(g, k, coexact), Cochain(g, k, harmonic)
    scale = w.norm() or 1.0
    res = {
        "reconstruction": (E + Co + H - w).norm() / scale,
        "exact_coexact": abs(E.dot(Co)) / scale**2,
        "exact_harmonic": abs(E.dot(H)) / scale**2,
        "coexact_harmonic": abs(Co.dot(H)) / scale**2,
    }
    if bc == "free":
        res["d_harmonic"] = coboundary(H).norm() / scale if k < n else 0.0
        res["delta_harmonic"] = codifferential(H, "free").norm() / scale if k > 0 else 0.0
    else:
        res["d_harmonic"] = coboundary(H.masked(g.boundary_mask(k))).masked(g.boundary_mask(k + 1)).norm() / scale if k < n else 0.0
        res["delta_harmonic"] = codifferential(H, "tangential-zero").norm() / scale if k > 0 else 0.0
    return HodgeSplit(E, Co, H, alpha, beta, bc, res)


def coexact_part(w: Cochain, bc: str = "tangential-zero") -> Cochain:
    return hodge_decompose(w, bc).coexact


def coexact_stability(w: Cochain, bc: str = "tangential-zero", p: float = 2.0) -> float:
    """||coexact part||_{W^{1,p}} / ||d w||_{L^p}, the constant of the regularity estimate."""
    if w.k >= w.grid.n:
        raise TopDegree("top-degree cochains have no coexact part")
    dw = lp_norm(coboundary(w), p)
    c = w1p_norm(coexact_part(w, bc), p)
    return c / dw if dw > 0 else (0.0 if c == 0 else np.inf)
