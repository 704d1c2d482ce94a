"""Constant exterior forms on R^n.

A k-form is stored as a dense coefficient vector over the increasing index
tuples of length k, ordered lexicographically (the order produced by
``itertools.combinations``).  Public index tuples are 1-based, matching the
usual ``e^1 ^ e^3`` notation; everything internal is 0-based.

The structure constants of the wedge product are tabulated once per
``(n, p, q)`` as a dense tensor ``W[K, I, J]`` holding the sign of
``e^I ^ e^J = W[K, I, J] e^K``.  Wedge, interior product and the batched field
versions used by the discrete calculus all contract against that tensor.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegreeMismatch, DegreeOverflow, DegreeUnderflow, DimensionMismatch

MAX_DIM = 8


@lru_cache(maxsize=None)
def basis(n: int, k: int) -> tuple[tuple[int, ...], ...]:
    """0-based increasing index tuples of length k in canonical order."""
    return tuple(combinations(range(n), k))


@lru_cache(maxsize=None)
def basis_index(n: int, k: int) -> dict[tuple[int, ...], int]:
    return {I: pos for pos, I in enumerate(basis(n, k))}


def perm_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation sorting ``seq`` (0 if an entry repeats)."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@lru_cache(maxsize=None)
def wedge_tensor(n: int, p: int, q: int) -> np.ndarray:
    """Dense sign tensor ``W[K, I, J]`` with ``e^I ^ e^J = sum_K W[K,I,J] e^K``."""
    if p + q > n:
        raise DegreeOverflow(f"wedge of degrees {p} and {q} exceeds n={n}")
    W = np.zeros((comb(n, p + q), comb(n, p), comb(n, q)))
    target = basis_index(n, p + q)
    for i, I in enumerate(basis(n, p)):
        for j, J in enumerate(basis(n, q)):
            if set(I) & set(J):
                continue
            W[target[tuple(sorted(I + J))], i, j] = perm_sign(I + J)
    W.setflags(write=False)
    return W


@lru_cache(maxsize=None)
def star_map(n: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Permutation and signs of the Hodge star: ``(*a)[perm[i]] = sign[i] * a[i]``."""
    target = basis_index(n, n - k)
    perm = np.empty(comb(n, k), dtype=int)
    sign = np.empty(comb(n, k))
    for i, I in enumerate(basis(n, k)):
        Ic = tuple(a for a in range(n) if a not in I)
        perm[i] = target[Ic]
        sign[i] = perm_sign(I + Ic)
    return perm, sign


def wedge_fields(a: np.ndarray, b: np.ndarray, n: int, p: int, q: int) -> np.ndarray:
    """Batched wedge on the last axis: ``a[..., C(n,p)] ^ b[..., C(n,q)]``."""
    return np.einsum("kij,...i,...j->...k", wedge_tensor(n, p, q), a, b)


def star_fields(a: np.ndarray, n: int, k: int) -> np.ndarray:
    perm, sign = star_map(n, k)
    out = np.empty(a.shape[:-1] + (comb(n, n - k),))
    out[..., perm] = a * sign
    return out


class ExteriorForm:
    """An immutable constant k-form on R^n."""

    __slots__ = ("n", "k", "_vec")

    def __init__(self, n: int, k: int, vec=None):
        if not 1 <= n <= MAX_DIM:
            raise DimensionMismatch(f"ambient dimension must be in 1..{MAX_DIM}, got {n}")
        if not 0 <= k <= n:
            raise DegreeOverflow(f"degree {k} outside 0..{n}")
        size = comb(n, k)
        v = np.zeros(size) if vec is None else np.array(vec, dtype=float).reshape(-1)
        if v.shape != (size,):
            raise DimensionMismatch(f"expected {size} coefficients for a {k}-form on R^{n}")
        v.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "_vec", v)

    def __setattr__(self, name, value):
        raise AttributeError("ExteriorForm is immutable")

    # construction -----------------------------------------------------
    @classmethod
    def from_coeffs(cls, n: int, k: int, coeffs: Mapping[Sequence[int], float]) -> "ExteriorForm":
        """Build from 1-based index tuples; unordered tuples pick up the permutation sign."""
        vec = np.zeros(comb(n, k))
        index = basis_index(n, k)
        for key, value in coeffs.items():
            key = tuple(int(i) - 1 for i in key)
            if len(key) != k:
                raise DegreeMismatch(f"index {key} does not have length {k}")
            if any(not 0 <= i < n for i in key):
                raise DimensionMismatch(f"index out of range 1..{n}: {key}")
            s = perm_sign(key)
            if s:
                vec[index[tuple(sorted(key))]] += s * value
        return cls(n, k, vec)

    @classmethod
    def basis_form(cls, n: int, indices: Sequence[int]) -> "ExteriorForm":
        return cls.from_coeffs(n, len(indices), {tuple(indices): 1.0})

    @classmethod
    def scalar(cls, n: int, value: float) -> "ExteriorForm":
        return cls(n, 0, [value])

    @classmethod
    def volume(cls, n: int) -> "ExteriorForm":
        return cls(n, n, [1.0])

    @classmethod
    def random(cls, n: int, k: int, rng: np.random.Generator, scale: float = 1.0) -> "ExteriorForm":
        return cls(n, k, scale * rng.uniform(-1.0, 1.0, comb(n, k)))

    # views -------------------------------------------------------------
    @property
    def vector(self) -> np.ndarray:
        return self._vec

    @property
    def coeffs(self) -> dict[tuple[int, ...], float]:
        """Nonzero coefficients keyed by 1-based increasing tuples."""
        return {
            tuple(i + 1 for i in I): float(c)
            for I, c in zip(basis(self.n, self.k), self._vec)
            if c != 0.0
        }

    def norm(self) -> float:
        return float(np.sqrt(self._vec @ self._vec))

    # arithmetic --------------------------------------------------------
    def _check_same(self, other: "ExteriorForm") -> None:
        if self.n != other.n:
            raise DimensionMismatch(f"n={self.n} vs n={other.n}")
        if self.k != other.k:
            raise DegreeMismatch(f"k={self.k} vs k={other.k}")

    def __add__(self, other: "ExteriorForm") -> "ExteriorForm":
        self._check_same(other)
        return ExteriorForm(self.n, self.k, self._vec + other._vec)

    def __sub__(self, other: "ExteriorForm") -> "ExteriorForm":
        self._check_same(other)
        return ExteriorForm(self.n, self.k, self._vec - other._vec)

    def __neg__(self) -> "ExteriorForm":
        return ExteriorForm(self.n, self.k, -self._vec)

    def __mul__(self, scalar: float) -> "ExteriorForm":
        return ExteriorForm(self.n, self.k, float(scalar) * self._vec)

    __rmul__ = __mul__

    def __xor__(self, other: "ExteriorForm") -> "ExteriorForm":
        return wedge(self, other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExteriorForm):
            return NotImplemented
        return self.n == other.n and self.k == other.k and np.array_equal(self._vec, other._vec)

    def __hash__(self) -> int:
        return hash((self.n, self.k, self._vec.tobytes()))

    def __repr__(self) -> str:
        return f"ExteriorForm(n={self.n}, k={self.k}, {format_form(self)!r})"


def wedge(a: ExteriorForm, b: ExteriorForm) -> ExteriorForm:
    if a.n != b.n:
        raise DimensionMismatch(f"n={a.n} vs n={b.n}")
    if a.k + b.k > a.n:
        raise DegreeOverflow(f"wedge of degrees {a.k}+{b.k} exceeds n={a.n}")
    return ExteriorForm(a.n, a.k + b.k, wedge_fields(a.vector, b.vector, a.n, a.k, b.k))


def wedge_all(forms: Iterable[ExteriorForm], n: int) -> ExteriorForm:
    """Left-to-right wedge of a sequence; the empty product is the scalar 1."""
    out = ExteriorForm.scalar(n, 1.0)
    for f in forms:
        out = wedge(out, f)
    return out


def hodge_star(a: ExteriorForm) -> ExteriorForm:
    """Euclidean star, normalised so that ``a ^ *b = <a, b> vol``."""
    return ExteriorForm(a.n, a.n - a.k, star_fields(a.vector, a.n, a.k))


def interior_product(a: ExteriorForm, b: ExteriorForm) -> ExteriorForm:
    """``a _| b``, the adjoint of ``c -> a ^ c``."""
    if a.n != b.n:
        raise DimensionMismatch(f"n={a.n} vs n={b.n}")
    if a.k > b.k:
        raise DegreeUnderflow(f"cannot contract a {a.k}-form into a {b.k}-form")
    W = wedge_tensor(a.n, a.k, b.k - a.k)
    return ExteriorForm(a.n, b.k - a.k, np.einsum("kij,i,k->j", W, a.vector, b.vector))


def scalar_product(a: ExteriorForm, b: ExteriorForm) -> float:
    if a.n != b.n:
        raise DimensionMismatch(f"n={a.n} vs n={b.n}")
    if a.k != b.k:
        raise DegreeMismatch(f"k={a.k} vs k={b.k}")
    return float(a.vector @ b.vector)


@dataclass(frozen=True)
class FormTuple:
    """An m-tuple of constant forms sharing the ambient dimension."""

    forms: tuple[ExteriorForm, ...]

    def __post_init__(self):
        forms = tuple(self.forms)
        if not forms:
            raise ValueError("a FormTuple needs at least one factor")
        if len({f.n for f in forms}) != 1:
            raise DimensionMismatch("all factors must share n")
        if any(f.k < 1 for f in forms):
            raise DegreeMismatch("factor degrees must be at least 1")
        object.__setattr__(self, "forms", forms)

    @property
    def n(self) -> int:
        return self.forms[0].n

    @property
    def m(self) -> int:
        return len(self.forms)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(f.k for f in self.forms)

    def norm(self) -> float:
        return float(np.sqrt(sum(f.norm() ** 2 for f in self.forms)))

    def arrays(self) -> list[np.ndarray]:
        """Coefficient vectors as a batch of one, the layout used by integrands."""
        return [f.vector[None, :] for f in self.forms]

    def __getitem__(self, i: int) -> ExteriorForm:
        return self.forms[i]

    def __len__(self) -> int:
        return len(self.forms)

    @classmethod
    def random(cls, n: int, degrees: Sequence[int], rng: np.random.Generator, scale: float = 1.0) -> "FormTuple":
        return cls(tuple(ExteriorForm.random(n, k, rng, scale) for k in degrees))

    @classmethod
    def zeros(cls, n: int, degrees: Sequence[int]) -> "FormTuple":
        return cls(tuple(ExteriorForm(n, k) for k in degrees))


# literals -----------------------------------------------------------------

_TERM = re.compile(
    r"""\s*(?P<sign>[+-])?\s*
        (?:(?P<coef>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*\*?\s*)?
        (?:e\[(?P<idx>[\d,\s]*)\])?\s*""",
    re.VERBOSE,
)


def parse_form(text: str, n: int | None = None, k: int | None = None) -> ExteriorForm:
    """Parse a literal such as ``"2*e[1,3] - 0.5*e[2,4]"``.

    A bare number is a 0-form; ``e[]`` is the scalar basis element.  The
    degree is inferred from the terms unless given, and n defaults to the
    largest index mentioned (at least the degree).
    """
    terms: list[tuple[float, tuple[int, ...]]] = []
    pos = 0
    text = text.strip()
    if not text:
        raise ValueError("empty form literal")
    while pos < len(text):
        m = _TERM.match(text, pos)
        if m is None or m.end() == pos:
            raise ValueError(f"cannot parse form literal at {text[pos:]!r}")
        if terms and m.group("sign") is None:
            raise ValueError(f"missing operator before {text[pos:]!r}")
        coef = float(m.group("coef")) if m.group("coef") else 1.0
        if m.group("sign") == "-":
            coef = -coef
        if m.group("idx") is None:
            if m.group("coef") is None:
                raise ValueError(f"dangling sign in {text!r}")
            idx: tuple[int, ...] = ()
        else:
            raw = m.group("idx").strip()
            idx = tuple(int(t) for t in raw.split(",")) if raw else ()
        terms.append((coef, idx))
        pos = m.end()
    degrees = {len(idx) for _, idx in terms}
    if k is None:
        if len(degrees) != 1:
            raise DegreeMismatch(f"mixed degrees in {text!r}")
        k = degrees.pop()
    elif degrees != {k}:
        raise DegreeMismatch(f"literal {text!r} is not a {k}-form")
    if n is None:
        n = max([k, 1] + [max(idx) for _, idx in terms if idx])
    coeffs: dict[tuple[int, ...], float] = {}
    for coef, idx in terms:
        s = perm_sign(idx)
        if s == 0:
            continue
        key = tuple(sorted(idx))
        coeffs[key] = coeffs.get(key, 0.0) + s * coef
    return ExteriorForm.from_coeffs(n, k, coeffs)


def format_form(a: ExteriorForm) -> str:
    parts = []
    for I, c in a.coeffs.items():
        body = f"e[{','.join(map(str, I))}]" if I else ""
        mag = repr(abs(c))
        term = f"{mag}*{body}" if body else mag
        parts.append(("-" if c < 0 else "+") + " " + term)
    if not parts:
        return "0" if a.k == 0 else f"0*e[{','.join(str(i + 1) for i in range(a.k))}]"
    s = " ".join(parts)
    return s[2:] if s.startswith("+ ") else "-" + s[2:]
