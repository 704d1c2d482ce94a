"""Wedge powers xi^alpha of a tuple of forms and the vector T(xi) collecting them.

For a degree vector k = (k_1, ..., k_m) and a multiindex alpha the power

    xi^alpha = xi_1^{alpha_1} ^ ... ^ xi_m^{alpha_m}

is a form of degree |k alpha| = sum k_i alpha_i.  It can be nonzero for some
xi exactly when |k alpha| <= n and alpha_i <= 1 whenever k_i is odd (odd forms
square to zero, even forms such as the symplectic form have nonzero powers up
to the dimension bound).

Batched helpers work on coefficient arrays of shape ``(N, C(n, k_i))``, one per
factor, so the same code evaluates a single tuple or a whole grid of cell
values.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache, total_ordering
from itertools import product
from math import comb
from typing import Sequence

import numpy as np

from .algebra import ExteriorForm, FormTuple, wedge_fields, wedge_tensor
from .errors import DegreeMismatch, DegreeOverflow, DimensionMismatch


@total_ordering
@dataclass(frozen=True)
class MultiIndexAlpha:
    alpha: tuple[int, ...]

    def __post_init__(self):
        a = tuple(int(v) for v in self.alpha)
        if any(v < 0 for v in a):
            raise ValueError(f"multiindex entries must be nonnegative: {a}")
        object.__setattr__(self, "alpha", a)

    @property
    def m(self) -> int:
        return len(self.alpha)

    @property
    def order(self) -> int:
        return sum(self.alpha)

    def weight(self, k: Sequence[int]) -> int:
        if len(k) != len(self.alpha):
            raise DegreeMismatch(f"degree vector {tuple(k)} does not match {self.alpha}")
        return sum(a * ki for a, ki in zip(self.alpha, k))

    def sort_key(self):
        # ascending order, then descending lex so that (1,0) precedes (0,1)
        return (self.order, tuple(-a for a in self.alpha))

    def __lt__(self, other: "MultiIndexAlpha") -> bool:
        return self.sort_key() < other.sort_key()

    def __iter__(self):
        return iter(self.alpha)

    def __getitem__(self, i):
        return self.alpha[i]

    def __len__(self):
        return len(self.alpha)

    def __str__(self) -> str:
        return "(" + ",".join(map(str, self.alpha)) + ")"


def _as_alpha(alpha) -> MultiIndexAlpha:
    return alpha if isinstance(alpha, MultiIndexAlpha) else MultiIndexAlpha(tuple(alpha))


def is_nontrivial(n: int, k: Sequence[int], alpha) -> bool:
    """True iff some tuple xi has xi^alpha != 0."""
    alpha = _as_alpha(alpha)
    if alpha.weight(k) > n:
        return False
    return all(a <= 1 for a, ki in zip(alpha, k) if ki % 2 == 1)


@lru_cache(maxsize=None)
def _enumerate(n: int, k: tuple[int, ...], lo: int, hi: int) -> tuple[MultiIndexAlpha, ...]:
    ranges = [range(0, n // ki + 1) for ki in k]
    found = []
    for a in product(*ranges):
        alpha = MultiIndexAlpha(a)
        if lo <= alpha.weight(k) <= hi and is_nontrivial(n, k, alpha):
            found.append(alpha)
    return tuple(sorted(found))


def enumerate_alphas(n: int, k: Sequence[int], weight_range: tuple[int, int] = (1, None)) -> list[MultiIndexAlpha]:
    """All nontrivial multiindices with |k alpha| in the closed interval ``weight_range``."""
    k = tuple(int(v) for v in k)
    if any(not 1 <= ki <= n for ki in k):
        raise DegreeMismatch(f"degrees {k} must lie in 1..{n}")
    lo, hi = weight_range
    hi = n if hi is None else hi
    return list(_enumerate(n, k, max(lo, 0), min(hi, n)))


def big_n(n: int, k: Sequence[int]) -> int:
    alphas = enumerate_alphas(n, k, (0, n))
    return max((a.order for a in alphas), default=0)


def tau(n: int, k: Sequence[int]) -> int:
    return sum(comb(n, a.weight(k)) for a in enumerate_alphas(n, k, (1, n)))


# batched evaluation -------------------------------------------------------------


def power_batch(arrays: Sequence[np.ndarray], n: int, k: Sequence[int], alpha) -> np.ndarray:
    """xi^alpha for a batch; ``arrays[i]`` has shape (N, C(n, k_i))."""
    alpha = _as_alpha(alpha)
    N = arrays[0].shape[0]
    out = np.ones((N, 1))
    deg = 0
    for x, ki, ai in zip(arrays, k, alpha):
        for _ in range(ai):
            out = wedge_fields(out, x, n, deg, ki)
            deg += ki
    return out


def power_gradient(arrays: Sequence[np.ndarray], n: int, k: Sequence[int], alpha, c: np.ndarray) -> list[np.ndarray]:
    """Gradient of ``<c, xi^alpha>`` with respect to each factor.

    ``c`` has shape (N, C(n, |k alpha|)) or (C,).  Writing xi^alpha = A ^ xi_i^{a_i} ^ B,
    the derivative in direction h is a_i (-1)^{deg(A) k_i} h ^ A ^ xi_i^{a_i - 1} ^ B.
    """
    alpha = _as_alpha(alpha)
    N = arrays[0].shape[0]
    c = np.broadcast_to(c, (N, c.shape[-1]))
    grads = []
    for i, ki in enumerate(k):
        ai = alpha[i]
        if ai == 0:
            grads.append(np.zeros_like(arrays[i], dtype=float))
            continue
        reduced = list(alpha.alpha)
        reduced[i] -= 1
        Y = power_batch(arrays, n, k, reduced)
        D = sum(k[j] * alpha[j] for j in range(i))
        W = wedge_tensor(n, ki, alpha.weight(k) - ki)
        sign = -1.0 if (D * ki) % 2 else 1.0
        grads.append(ai * sign * np.einsum("kij,nj,nk->ni", W, Y, c))
    return grads


@dataclass(frozen=True)
class Layout:
    """Where each wedge power sits inside the flat T vector."""

    n: int
    k: tuple[int, ...]
    alphas: tuple[MultiIndexAlpha, ...]
    offsets: tuple[int, ...]

    @property
    def size(self) -> int:
        return self.offsets[-1]

    def slice(self, j: int) -> slice:
        return slice(self.offsets[j], self.offsets[j + 1])


@lru_cache(maxsize=None)
def t_layout(n: int, k: tuple[int, ...], include_zero: bool = False) -> Layout:
    lo = 0 if include_zero else 1
    alphas = tuple(enumerate_alphas(n, k, (lo, n)))
    offsets = [0]
    for a in alphas:
        offsets.append(offsets[-1] + comb(n, a.weight(k)))
    return Layout(n, k, alphas, tuple(offsets))


def t_batch(arrays: Sequence[np.ndarray], n: int, k: Sequence[int], include_zero: bool = False) -> np.ndarray:
    """Flat T(xi) for a batch, shape (N, tau) (or (N, 1 + tau) with the constant)."""
    lay = t_layout(n, tuple(k), include_zero)
    return np.concatenate([power_batch(arrays, n, k, a) for a in lay.alphas], axis=1)


def t_gradient(arrays: Sequence[np.ndarray], n: int, k: Sequence[int], G: np.ndarray) -> list[np.ndarray]:
    """Chain rule: gradient of xi -> <G, T(xi)> with G of shape (N, tau) held fixed."""
    lay = t_layout(n, tuple(k))
    total = [np.zeros_like(x, dtype=float) for x in arrays]
    for j, a in enumerate(lay.alphas):
        for t, g in zip(total, power_gradient(arrays, n, k, a, G[:, lay.slice(j)])):
            t += g
    return total


@dataclass(frozen=True)
class WedgeVector:
    entries: tuple[tuple[MultiIndexAlpha, ExteriorForm], ...]

    @property
    def component_count(self) -> int:
        return sum(f.vector.size for _, f in self.entries)

    def flat(self) -> np.ndarray:
        if not self.entries:
            return np.zeros(0)
        return np.concatenate([f.vector for _, f in self.entries])

    def __getitem__(self, alpha) -> ExteriorForm:
        alpha = _as_alpha(alpha)
        for a, f in self.entries:
            if a == alpha:
                return f
        raise KeyError(alpha)


def wedge_power(xi: FormTuple, alpha) -> ExteriorForm:
    alpha = _as_alpha(alpha)
    if alpha.m != xi.m:
        raise DegreeMismatch(f"multiindex {alpha} has {alpha.m} entries for {xi.m} factors")
    deg = alpha.weight(xi.degrees)
    if deg > xi.n:
        raise DegreeOverflow(f"|k alpha| = {deg} exceeds n = {xi.n}")
    vec = power_batch(xi.arrays(), xi.n, xi.degrees, alpha)[0]
    return ExteriorForm(xi.n, deg, vec)


def t_vector(xi: FormTuple) -> WedgeVector:
    n, k = xi.n, xi.degrees
    return WedgeVector(tuple((a, wedge_power(xi, a)) for a in enumerate_alphas(n, k, (1, n))))


def check_arrays(arrays: Sequence[np.ndarray], n: int, k: Sequence[int]) -> list[np.ndarray]:
    """Coerce factor arrays to 2-D float and check their widths."""
    if len(arrays) != len(k):
        raise DegreeMismatch(f"expected {len(k)} factors, got {len(arrays)}")
    out = []
    for x, ki in zip(arrays, k):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[-1] != comb(n, ki):
            raise DimensionMismatch(f"factor of degree {ki} needs {comb(n, ki)} components, got {x.shape[-1]}")
        out.append(x)
    if len({x.shape[0] for x in out}) != 1:
        raise DimensionMismatch("factor batches have different lengths")
    return out
