"""Integrands f(xi_1, ..., xi_m) of tuples of constant forms.

Every integrand evaluates on batches: ``evaluate_batch(arrays)`` takes one
coefficient array of shape (N, C(n, k_i)) per factor and returns N values;
``gradient_batch`` returns the matching list of partial gradients.  The
discrete calculus feeds per-cell reconstructions of dω through the same
entry points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Callable, Sequence

import numpy as np

from .algebra import FormTuple, parse_form
from .errors import DegreeMismatch, DimensionMismatch, NotConvex
from .wedge_powers import (
    MultiIndexAlpha,
    check_arrays,
    enumerate_alphas,
    power_batch,
    power_gradient,
    t_batch,
    t_gradient,
    t_layout,
    tau,
)


@dataclass(frozen=True)
class Growth:
    """Declared growth bounds, used only as bookkeeping by tests and the minimizer.

    Lower bound  gamma1 + lower * sum |xi_i|^{p_i}  <= f,
    upper bound  |f| <= upper * (1 + sum |xi_i|^{p_i}).
    Factors with p_i = inf are controlled by eta(t) = eta_c * (1 + t)^2.
    """

    p: tuple[float, ...]
    lower: float = 0.0
    upper: float = 1.0
    gamma1: float = 0.0
    eta_c: float = 1.0

    def eta(self, t):
        return self.eta_c * (1.0 + np.asarray(t)) ** 2

    @property
    def coercive(self) -> bool:
        return self.lower > 0.0

    def to_dict(self) -> dict:
        return {"p": [str(v) if np.isinf(v) else v for v in self.p], "lower": self.lower,
                "upper": self.upper, "gamma1": self.gamma1, "eta_c": self.eta_c}

    @classmethod
    def from_dict(cls, d: dict) -> "Growth":
        d = dict(d)
        d["p"] = tuple(float(v) for v in d["p"])
        return cls(**d)


class Integrand:
    n: int
    k: tuple[int, ...]
    growth: Growth | None

    def evaluate_batch(self, arrays: Sequence[np.ndarray]) -> np.ndarray:
        raise NotImplementedError

    def gradient_batch(self, arrays: Sequence[np.ndarray]) -> list[np.ndarray]:
        raise NotImplementedError

    @property
    def m(self) -> int:
        return len(self.k)

    @property
    def is_quadratic(self) -> bool:
        """True when f is a polynomial of degree at most two in xi."""
        return False

    @property
    def polynomial_degree(self) -> int | None:
        return None

    def __add__(self, other: "Integrand") -> "SumOf":
        return SumOf((self, other))

    def __sub__(self, other: "Integrand") -> "SumOf":
        return SumOf((self, other), (1.0, -1.0))

    def __neg__(self) -> "SumOf":
        return SumOf((self,), (-1.0,))

    def __rmul__(self, w: float) -> "SumOf":
        return SumOf((self,), (float(w),))

    def _check(self, arrays):
        return check_arrays(arrays, self.n, self.k)


def evaluate(spec: Integrand, xi: FormTuple) -> float:
    if xi.n != spec.n:
        raise DimensionMismatch(f"integrand on R^{spec.n}, tuple on R^{xi.n}")
    if xi.degrees != spec.k:
        raise DegreeMismatch(f"integrand degrees {spec.k}, tuple degrees {xi.degrees}")
    return float(spec.evaluate_batch(xi.arrays())[0])


def gradient(spec: Integrand, xi: FormTuple) -> list[np.ndarray]:
    if xi.degrees != spec.k:
        raise DegreeMismatch(f"integrand degrees {spec.k}, tuple degrees {xi.degrees}")
    return [g[0] for g in spec.gradient_batch(xi.arrays())]


def _alpha_key(a) -> str:
    return ",".join(map(str, a))


@dataclass(frozen=True, eq=False)
class QuasiaffineCombo(Integrand):
    """c0 + sum_alpha <c_alpha ; xi^alpha>."""

    n: int
    k: tuple[int, ...]
    c0: float = 0.0
    coeffs: dict = field(default_factory=dict)
    growth: Growth | None = None

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(int(v) for v in self.k))
        allowed = {a.alpha for a in enumerate_alphas(self.n, self.k, (1, self.n))}
        clean = {}
        for a, c in self.coeffs.items():
            a = tuple(a.alpha if isinstance(a, MultiIndexAlpha) else a)
            if a not in allowed:
                raise DegreeMismatch(f"multiindex {a} is not a nontrivial power for k={self.k}, n={self.n}")
            c = np.asarray(c, dtype=float).reshape(-1)
            size = comb(self.n, MultiIndexAlpha(a).weight(self.k))
            if c.size != size:
                raise DimensionMismatch(f"coefficient for {a} needs {size} entries")
            clean[a] = c
        object.__setattr__(self, "coeffs", clean)

    @classmethod
    def random(cls, n: int, k: Sequence[int], rng: np.random.Generator, density: float = 1.0) -> "QuasiaffineCombo":
        k = tuple(k)
        coeffs = {}
        for a in enumerate_alphas(n, k, (1, n)):
            c = rng.uniform(-1.0, 1.0, comb(n, a.weight(k)))
            if density < 1.0:
                c = c * (rng.random(c.size) < density)
            coeffs[a.alpha] = c
        return cls(n, k, float(rng.uniform(-1.0, 1.0)), coeffs)

    def vector(self) -> np.ndarray:
        """Coefficients in the order of the quasiaffine basis (constant first)."""
        lay = t_layout(self.n, self.k)
        out = np.zeros(1 + lay.size)
        out[0] = self.c0
        for j, a in enumerate(lay.alphas):
            if a.alpha in self.coeffs:
                out[1 + lay.offsets[j]: 1 + lay.offsets[j + 1]] = self.coeffs[a.alpha]
        return out

    def evaluate_batch(self, arrays):
        arrays = self._check(arrays)
        out = np.full(arrays[0].shape[0], self.c0)
        for a, c in self.coeffs.items():
            out += power_batch(arrays, self.n, self.k, a) @ c
        return out

    def gradient_batch(self, arrays):
        arrays = self._check(arrays)
        total = [np.zeros_like(x) for x in arrays]
        for a, c in self.coeffs.items():
            for t, g in zip(total, power_gradient(arrays, self.n, self.k, a, c)):
                t += g
        return total

    @property
    def polynomial_degree(self) -> int:
        return max([0] + [sum(a) for a, c in self.coeffs.items() if np.any(c)])

    @property
    def is_quadratic(self) -> bool:
        return self.polynomial_degree <= 2


@dataclass(frozen=True, eq=False)
class PolyconvexComposite(Integrand):
    """F(T(xi)) with F convex on R^tau.

    F is either 0.5 Xi.Q.Xi + b.Xi + c (Q symmetric positive semidefinite) or
    max_j (A_j.Xi + b_j).
    """

    n: int
    k: tuple[int, ...]
    Q: np.ndarray | None = None
    b: np.ndarray | None = None
    c: float = 0.0
    A: np.ndarray | None = None
    growth: Growth | None = None

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(int(v) for v in self.k))
        t = tau(self.n, self.k)
        if self.A is not None:
            A = np.atleast_2d(np.asarray(self.A, dtype=float))
            if A.shape[1] != t:
                raise DimensionMismatch(f"affine pieces need {t} slopes")
            b = np.zeros(A.shape[0]) if self.b is None else np.asarray(self.b, dtype=float).reshape(-1)
            if b.shape != (A.shape[0],):
                raise DimensionMismatch("one offset per affine piece")
            object.__setattr__(self, "A", A)
            object.__setattr__(self, "b", b)
            return
        Q = np.zeros((t, t)) if self.Q is None else np.asarray(self.Q, dtype=float)
        b = np.zeros(t) if self.b is None else np.asarray(self.b, dtype=float).reshape(-1)
        if Q.shape != (t, t) or b.shape != (t,):
            raise DimensionMismatch(f"quadratic part must be {t}x{t}")
        Q = 0.5 * (Q + Q.T)
        lo = np.linalg.eigvalsh(Q).min() if t else 0.0
        if lo < -1e-12 * max(1.0, np.abs(Q).max()):
            raise NotConvex(f"quadratic part has negative eigenvalue {lo:.3e}")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "b", b)

    @classmethod
    def random_quadratic(cls, n, k, rng, rank=None, growth=None) -> "PolyconvexComposite":
        t = tau(n, tuple(k))
        B = rng.normal(size=(rank or t, t))
        return cls(n, tuple(k), Q=B.T @ B / t, b=rng.uniform(-1, 1, t), c=float(rng.uniform(-1, 1)), growth=growth)

    @property
    def piecewise(self) -> bool:
        return self.A is not None

    def outer(self, T: np.ndarray) -> np.ndarray:
        if self.piecewise:
            return (T @ self.A.T + self.b).max(axis=1)
        return 0.5 * np.einsum("ni,ij,nj->n", T, self.Q, T) + T @ self.b + self.c

    def outer_gradient(self, T: np.ndarray) -> np.ndarray:
        """Gradient of F, or for the max-of-affine form the slope of the first active piece."""
        if self.piecewise:
            return self.A[np.argmax(T @ self.A.T + self.b, axis=1)]
        return T @ self.Q + self.b

    def evaluate_batch(self, arrays):
        arrays = self._check(arrays)
        return self.outer(t_batch(arrays, self.n, self.k))

    def gradient_batch(self, arrays):
        arrays = self._check(arrays)
        G = self.outer_gradient(t_batch(arrays, self.n, self.k))
        return t_gradient(arrays, self.n, self.k, G)

    @property
    def polynomial_degree(self) -> int | None:
        if self.piecewise:
            return None
        lay = t_layout(self.n, self.k)
        orders = np.concatenate([[a.order] * (lay.offsets[j + 1] - lay.offsets[j]) for j, a in enumerate(lay.alphas)])
        deg = max([0] + [int(o) for o in orders[self.b != 0]])
        rows = np.nonzero(np.abs(self.Q).sum(axis=1))[0]
        if rows.size:
            deg = max(deg, 2 * int(orders[rows].max()))
        return deg

    @property
    def is_quadratic(self) -> bool:
        d = self.polynomial_degree
        return d is not None and d <= 2


@dataclass(frozen=True, eq=False)
class NormPower(Integrand):
    """sum_i w_i |xi_i|^{p_i}; weights may be negative."""

    n: int
    k: tuple[int, ...]
    weights: tuple[float, ...] = ()
    exponents: tuple[float, ...] = ()
    growth: Growth | None = None

    def __post_init__(self):
        k = tuple(int(v) for v in self.k)
        object.__setattr__(self, "k", k)
        w = tuple(float(v) for v in self.weights) or (1.0,) * len(k)
        p = tuple(float(v) for v in self.exponents) or (2.0,) * len(k)
        if len(w) != len(k) or len(p) != len(k):
            raise DegreeMismatch("one weight and one exponent per factor")
        if any(v < 1.0 for v in p):
            raise ValueError(f"exponents must be >= 1, got {p}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "exponents", p)

    def evaluate_batch(self, arrays):
        arrays = self._check(arrays)
        out = np.zeros(arrays[0].shape[0])
        for x, w, p in zip(arrays, self.weights, self.exponents):
            r = np.sqrt(np.einsum("ni,ni->n", x, x))
            out += w * r**p
        return out

    def gradient_batch(self, arrays):
        arrays = self._check(arrays)
        grads = []
        for x, w, p in zip(arrays, self.weights, self.exponents):
            if p == 2.0:
                grads.append(2.0 * w * x)
                continue
            r = np.sqrt(np.einsum("ni,ni->n", x, x))
            scale = np.where(r > 0, w * p * np.power(np.where(r > 0, r, 1.0), p - 2.0), 0.0)
            grads.append(scale[:, None] * x)
        return grads

    @property
    def convex(self) -> bool:
        return all(w >= 0 for w in self.weights)

    @property
    def polynomial_degree(self) -> int | None:
        if all(p == 2.0 or w == 0 for w, p in zip(self.weights, self.exponents)):
            return 2
        return None

    @property
    def is_quadratic(self) -> bool:
        return self.polynomial_degree == 2


@dataclass(frozen=True, eq=False)
class Sampled(Integrand):
    """A black-box integrand.

    ``fn`` maps the list of factor arrays to N values when ``vectorized``;
    otherwise it is called once per sample with a FormTuple.  Gradients use
    central differences.
    """

    n: int
    k: tuple[int, ...]
    fn: Callable = None
    vectorized: bool = True
    fd_step: float = 1e-6
    growth: Growth | None = None

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(int(v) for v in self.k))

    def evaluate_batch(self, arrays):
        arrays = self._check(arrays)
        if self.vectorized:
            return np.asarray(self.fn(arrays), dtype=float).reshape(-1)
        from .algebra import ExteriorForm

        out = np.empty(arrays[0].shape[0])
        for j in range(out.size):
            xi = FormTuple(tuple(ExteriorForm(self.n, ki, x[j]) for x, ki in zip(arrays, self.k)))
            out[j] = float(self.fn(xi))
        return out

    def gradient_batch(self, arrays):
        arrays = self._check(arrays)
        grads = []
        for i, x in enumerate(arrays):
            g = np.empty_like(x)
            for c in range(x.shape[1]):
                plus = [a.copy() for a in arrays]
                minus = [a.copy() for a in arrays]
                plus[i][:, c] += self.fd_step
                minus[i][:, c] -= self.fd_step
                g[:, c] = (self.evaluate_batch(plus) - self.evaluate_batch(minus)) / (2 * self.fd_step)
            grads.append(g)
        return grads


@dataclass(frozen=True, eq=False)
class SumOf(Integrand):
    terms: tuple[Integrand, ...]
    weights: tuple[float, ...] | None = None
    growth: Growth | None = None

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("SumOf needs at least one term")
        if len({(t.n, t.k) for t in terms}) != 1:
            raise DegreeMismatch("all terms must share n and degrees")
        w = tuple(float(v) for v in self.weights) if self.weights is not None else (1.0,) * len(terms)
        if len(w) != len(terms):
            raise ValueError("one weight per term")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.terms[0].n

    @property
    def k(self) -> tuple[int, ...]:
        return self.terms[0].k

    def evaluate_batch(self, arrays):
        return sum(w * t.evaluate_batch(arrays) for w, t in zip(self.weights, self.terms))

    def gradient_batch(self, arrays):
        total = None
        for w, t in zip(self.weights, self.terms):
            g = t.gradient_batch(arrays)
            total = [w * x for x in g] if total is None else [a + w * x for a, x in zip(total, g)]
        return total

    @property
    def polynomial_degree(self) -> int | None:
        degs = [t.polynomial_degree for t in self.terms]
        return None if any(d is None for d in degs) else max(degs)

    @property
    def is_quadratic(self) -> bool:
        return all(t.is_quadratic for t in self.terms)


# JSON round trip -------------------------------------------------------------


def _coeff_to_json(c: np.ndarray) -> list[float]:
    return [float(v) for v in c]


def _coeff_from_json(v, n: int, deg: int) -> np.ndarray:
    if isinstance(v, str):
        return parse_form(v, n=n, k=deg).vector
    return np.asarray(v, dtype=float)


def spec_to_dict(spec: Integrand) -> dict:
    base = {"n": spec.n, "k": list(spec.k)}
    if getattr(spec, "growth", None) is not None:
        base["growth"] = spec.growth.to_dict()
    if isinstance(spec, QuasiaffineCombo):
        return {"type": "quasiaffine", **base, "c0": spec.c0,
                "coeffs": {_alpha_key(a): _coeff_to_json(c) for a, c in spec.coeffs.items()}}
    if isinstance(spec, PolyconvexComposite):
        if spec.piecewise:
            return {"type": "polyconvex-max", **base, "A": spec.A.tolist(), "b": spec.b.tolist()}
        return {"type": "polyconvex-quadratic", **base, "Q": spec.Q.tolist(), "b": spec.b.tolist(), "c": spec.c}
    if isinstance(spec, NormPower):
        return {"type": "norm-power", **base, "weights": list(spec.weights), "exponents": list(spec.exponents)}
    if isinstance(spec, SumOf):
        return {"type": "sum", **base, "weights": list(spec.weights), "terms": [spec_to_dict(t) for t in spec.terms]}
    raise TypeError(f"{type(spec).__name__} cannot be serialized")


_SPEC_KEYS = {
    "quasiaffine": {"c0", "coeffs"},
    "polyconvex-quadratic": {"Q", "b", "c"},
    "polyconvex-max": {"A", "b"},
    "norm-power": {"weights", "exponents"},
    "sum": {"weights", "terms"},
}


def spec_from_dict(d: dict) -> Integrand:
    kind = d.get("type")
    if kind not in _SPEC_KEYS:
        raise ValueError(f"unknown integrand type {kind!r}; expected one of {sorted(_SPEC_KEYS)}")
    extra = set(d) - _SPEC_KEYS[kind] - {"type", "n", "k", "growth"}
    if extra:
        raise ValueError(f"unknown fields for {kind}: {sorted(extra)}")
    n, k = int(d["n"]), tuple(int(v) for v in d["k"])
    growth = Growth.from_dict(d["growth"]) if "growth" in d else None
    if kind == "quasiaffine":
        coeffs = {}
        for key, v in d.get("coeffs", {}).items():
            a = tuple(int(t) for t in key.split(","))
            coeffs[a] = _coeff_from_json(v, n, MultiIndexAlpha(a).weight(k))
        return QuasiaffineCombo(n, k, float(d.get("c0", 0.0)), coeffs, growth)
    if kind == "polyconvex-quadratic":
        t = tau(n, k)
        return PolyconvexComposite(n, k, Q=np.asarray(d.get("Q", np.zeros((t, t)))), b=np.asarray(d.get("b", np.zeros(t))),
                                   c=float(d.get("c", 0.0)), growth=growth)
    if kind == "polyconvex-max":
        return PolyconvexComposite(n, k, A=np.asarray(d["A"]), b=np.asarray(d.get("b")) if "b" in d else None, growth=growth)
    if kind == "norm-power":
        return NormPower(n, k, tuple(d.get("weights", ())), tuple(d.get("exponents", ())), growth)
    terms = tuple(spec_from_dict(t) for t in d["terms"])
    return SumOf(terms, tuple(d["weights"]) if "weights" in d else None, growth)
