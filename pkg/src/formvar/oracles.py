"""Slow reference implementations used to cross-check the vectorised code.

Forms here are plain dicts {increasing 0-based index tuple: coefficient} and
the wedge product is computed term by term by sorting concatenated indices,
sharing nothing with the tensor-based implementation.
"""

from __future__ import annotations

from itertools import combinations, product

import numpy as np


def _sort_sign(idx):
    idx = list(idx)
    if len(set(idx)) < len(idx):
        return 0, None
    sign = 1
    # bubble sort, counting swaps
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    return sign, tuple(idx)


def dict_wedge(a: dict, b: dict) -> dict:
    out: dict = {}
    for I, x in a.items():
        for J, y in b.items():
            s, K = _sort_sign(I + J)
            if s:
                out[K] = out.get(K, 0) + s * x * y
    return out


def dict_form(n: int, k: int, vec) -> dict:
    return {I: v for I, v in zip(combinations(range(n), k), vec) if v != 0}


def dict_power(forms: list[dict], alpha) -> dict:
    out = {(): 1}
    for f, a in zip(forms, alpha):
        for _ in range(a):
            out = dict_wedge(out, f)
    return out


def brute_force_tau(n: int, k, rng: np.random.Generator, trials: int = 2) -> int:
    """Count components of nonzero wedge powers over all multiindices with order >= 1.

    A component counts when it is nonzero for some random tuple of large nonzero
    integers; the arithmetic is exact, so accidental cancellation is very unlikely.
    """
    k = tuple(k)
    samples = []
    for _ in range(trials):
        forms = []
        for ki in k:
            size = len(list(combinations(range(n), ki)))
            vec = rng.integers(1, 1000, size) * rng.choice([-1, 1], size)
            forms.append(dict_form(n, ki, [int(v) for v in vec]))
        samples.append(forms)
    count = 0
    for alpha in product(*[range(0, n // ki + 2) for ki in k]):
        if sum(alpha) == 0 or sum(a * ki for a, ki in zip(alpha, k)) > n:
            continue
        seen = set()
        for forms in samples:
            seen |= {K for K, v in dict_power(forms, alpha).items() if v != 0}
        count += len(seen)
    return count


def all_minors(X: np.ndarray) -> dict:
    """{(rows, cols): det} for every square submatrix of size >= 1, computed exactly for integer X."""
    from fractions import Fraction

    m, n = X.shape
    out = {}
    for r in range(1, min(m, n) + 1):
        for R in combinations(range(m), r):
            for C in combinations(range(n), r):
                out[(R, C)] = _det([[Fraction(int(X[i, j])) for j in C] for i in R])
    return out


def _det(A):
    # Laplace expansion; exact for the small sizes used here
    if len(A) == 1:
        return A[0][0]
    total = 0
    for j in range(len(A)):
        minor = [row[:j] + row[j + 1:] for row in A[1:]]
        total += (-1) ** j * A[0][j] * _det(minor)
    return total
