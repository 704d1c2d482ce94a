"""Exponent arithmetic for weak wedge products, decided in exact rationals.

Exponents are Fractions or the sentinel INF.  Boundary cases such as
1/theta = 1 + 1/n are equalities, so nothing here goes through floats.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

from .errors import BadExponent
from .wedge_powers import is_nontrivial


class _Inf:
    __slots__ = ()

    def __repr__(self):
        return "INF"

    def __str__(self):
        return "inf"

    def __reduce__(self):
        return (_inf, ())


def _inf():
    return INF


INF = _Inf()


def parse_exponent(v) -> Fraction | _Inf:
    """Accept ints, Fractions, "p/q" strings, decimal strings, floats, and "inf"."""
    if v is INF:
        return v
    if isinstance(v, str):
        s = v.strip().lower()
        if s in {"inf", "infinity", "oo", "∞"}:
            return INF
        try:
            return Fraction(s)
        except (ValueError, ZeroDivisionError) as exc:
            raise BadExponent(f"cannot read exponent {v!r}") from exc
    if isinstance(v, float):
        if v == float("inf"):
            return INF
        return Fraction(v).limit_denominator(10**12)
    try:
        return Fraction(v)
    except (TypeError, ValueError) as exc:
        raise BadExponent(f"cannot read exponent {v!r}") from exc


def parse_vector(values) -> tuple:
    if isinstance(values, str):
        values = [t for t in values.split(",") if t.strip()]
    return tuple(parse_exponent(v) for v in values)


def recip(p) -> Fraction:
    return Fraction(0) if p is INF else 1 / Fraction(p)


def fmt(v) -> str | None:
    if v is None:
        return None
    if v is INF:
        return "inf"
    v = Fraction(v)
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


@dataclass(frozen=True)
class ExponentReport:
    theta_inv: Fraction | None = None
    rho_inv: Fraction | None = None
    mu: tuple | None = None
    sobolev_admissible: bool | None = None
    theta_equality: bool | None = None
    holder_admissible: bool | None = None
    remark_consistent: bool | None = None
    associated_pair: bool | None = None
    compact_pair: bool | None = None
    very_weak_admissible: bool | None = None
    very_weak_equality: bool | None = None
    strict_theta: bool | None = None
    sub_unit_theta: bool | None = None
    notes: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        out = {}
        for name in self.__dataclass_fields__:
            v = getattr(self, name)
            if name in {"theta_inv", "rho_inv"}:
                v = fmt(v)
            elif name == "mu":
                v = None if v is None else [fmt(x) for x in v]
            elif name == "notes":
                v = list(v)
            out[name] = v
        return out

    def merge(self, other: "ExponentReport") -> "ExponentReport":
        updates = {k: getattr(other, k) for k in other.__dataclass_fields__
                   if k != "notes" and getattr(other, k) is not None}
        return replace(self, **updates, notes=self.notes + other.notes)


def _check_p(p, allow_inf: bool):
    for v in p:
        if v is INF:
            if not allow_inf:
                raise BadExponent("exponent must be finite here")
        elif not v > 1:
            raise BadExponent(f"exponents must exceed 1, got {fmt(v)}")


def theta_inverse(alpha: Sequence[int], p) -> Fraction:
    return sum((a * recip(pi) for a, pi in zip(alpha, p)), Fraction(0))


def sobolev_admissible(n: int, k: Sequence[int], alpha: Sequence[int], p) -> ExponentReport:
    p = parse_vector(p)
    alpha = tuple(int(a) for a in alpha)
    if len(p) != len(alpha):
        raise BadExponent("one exponent per factor")
    _check_p(p, allow_inf=False)
    notes = ()
    if not is_nontrivial(n, k, alpha):
        notes = (f"alpha={alpha} is a trivial power for k={tuple(k)}, n={n}",)
    t = theta_inverse(alpha, p)
    bound = 1 + Fraction(1, n)
    ok = t <= bound and all(1 > t - recip(pi) for pi in p)
    mu = mu_vector(alpha, p)
    return ExponentReport(
        theta_inv=t,
        mu=mu,
        sobolev_admissible=ok,
        theta_equality=t == bound,
        strict_theta=bound > t,
        sub_unit_theta=1 >= t,
        notes=notes,
    )


def holder_admissible(n: int, k: Sequence[int], alpha: Sequence[int], q) -> ExponentReport:
    """Evaluates the two defining inequalities literally.

    ``remark_consistent`` separately records whether the reading "at most one
    q_i is infinite, and then alpha_i = 1" holds for the factors that appear.
    """
    q = parse_vector(q)
    alpha = tuple(int(a) for a in alpha)
    if len(q) != len(alpha):
        raise BadExponent("one exponent per factor")
    _check_p(q, allow_inf=True)
    r = theta_inverse(alpha, q)
    ok = r <= 1 and all(1 >= r - recip(qi) for qi in q)
    infinite = [a for a, qi in zip(alpha, q) if qi is INF and a > 0]
    consistent = len(infinite) <= 1 and all(a == 1 for a in infinite)
    notes = ()
    if ok and not consistent:
        notes = ("inequalities hold but infinite exponents violate the one-infinite-factor reading",)
    return ExponentReport(rho_inv=r, holder_admissible=ok, remark_consistent=consistent, notes=notes)


def associated_pair(n: int, p, q) -> ExponentReport:
    p = parse_vector(p)
    q = parse_vector(q)
    if len(p) != len(q):
        raise BadExponent("p and q need the same length")
    _check_p(p, allow_inf=False)
    _check_p(q, allow_inf=True)
    n = Fraction(n)
    ge, gt = [], []
    for pi, qi in zip(p, q):
        need = n if qi is INF else n * qi / (n + qi)
        ge.append(pi >= need)
        gt.append(pi > need)
    assoc = all(ge)
    return ExponentReport(associated_pair=assoc, compact_pair=assoc and all(gt))


def very_weak_admissible(n: int, alpha: Sequence[int], p, q) -> ExponentReport:
    p = parse_vector(p)
    q = parse_vector(q)
    alpha = tuple(int(a) for a in alpha)
    if not len(p) == len(q) == len(alpha):
        raise BadExponent("alpha, p and q need the same length")
    _check_p(p, allow_inf=False)
    _check_p(q, allow_inf=True)
    t = theta_inverse(alpha, p)
    lhs = [recip(qi) + t - recip(pi) for pi, qi in zip(p, q)]
    ok = all(1 >= v for v in lhs)
    return ExponentReport(theta_inv=t, very_weak_admissible=ok, very_weak_equality=ok and max(lhs) == 1)


def analyze(n: int, k: Sequence[int], alpha: Sequence[int], p, q=None) -> ExponentReport:
    """Everything that applies to the given data, merged into one report."""
    rep = sobolev_admissible(n, k, alpha, p)
    if q is not None:
        rep = rep.merge(holder_admissible(n, k, alpha, q))
        rep = rep.merge(associated_pair(n, p, q))
        rep = rep.merge(very_weak_admissible(n, alpha, p, q))
    return rep


def mu_vector(alpha: Sequence[int], p) -> tuple:
    """mu_i from 1 = 1/mu_i + 1/theta - 1/p_i.

    None where alpha_i = 0 (the factor is absent) or where no positive mu exists.
    """
    p = parse_vector(p)
    t = theta_inverse(alpha, p)
    out = []
    for a, pi in zip(alpha, p):
        inv = 1 - t + recip(pi)
        out.append(None if a == 0 or inv < 0 else (INF if inv == 0 else 1 / inv))
    return tuple(out)
