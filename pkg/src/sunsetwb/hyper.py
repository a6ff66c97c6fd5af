"""Generalized hypergeometric functions with parameters affine in n.

Models pFq functions (p = q+1 throughout), their series evaluation with a
rigorous geometric tail bound, contiguous parameter-shift operators written
as degree-one polynomials in theta = z d/dz, and the differential reduction
of integer-shifted functions onto a canonical basis function.

The reduction rewrites any theta-polynomial acting on a function modulo its
hypergeometric differential equation

    theta (theta + b_1 - 1) ... (theta + b_q - 1) F = z (theta + a_1) ... (theta + a_p) F.

When an upper parameter equals 1 the equation integrates once: the order
drops by one at the price of a rational inhomogeneity, which is where the
rational remainders of reduced forms come from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import mpmath

from . import kernel
from .errors import (
    DivergentSeries,
    LowerParameterPole,
    ParseError,
    SingularOperator,
    UnsupportedShift,
)
from .kernel import (
    RAT_ONE,
    RAT_Z,
    RAT_ZERO,
    GUARD_DIGITS,
    Poly,
    RatFunc,
    parse_expr,
    poly_from_terms,
    rat,
    to_mpf,
    workdps,
)

Rational = Union[int, Fraction]

_MAX_TERMS = 200_000


@dataclass(frozen=True, order=True)
class ParamExpr:
    """Parameter affine in n: value c0 + c1*n, with rational c0, c1."""

    c1: Fraction
    c0: Fraction

    def __init__(self, c0: Rational, c1: Rational = 0):
        object.__setattr__(self, "c0", Fraction(c0))
        object.__setattr__(self, "c1", Fraction(c1))

    def __add__(self, other) -> "ParamExpr":
        if isinstance(other, ParamExpr):
            return ParamExpr(self.c0 + other.c0, self.c1 + other.c1)
        return ParamExpr(self.c0 + Fraction(other), self.c1)

    def __sub__(self, other) -> "ParamExpr":
        if isinstance(other, ParamExpr):
            return ParamExpr(self.c0 - other.c0, self.c1 - other.c1)
        return ParamExpr(self.c0 - Fraction(other), self.c1)

    def __neg__(self) -> "ParamExpr":
        return ParamExpr(-self.c0, -self.c1)

    @property
    def is_zero(self) -> bool:
        return not self.c0 and not self.c1

    @property
    def is_unit(self) -> bool:
        return self.c0 == 1 and not self.c1

    def is_const(self, value: Rational) -> bool:
        return not self.c1 and self.c0 == Fraction(value)

    def at(self, n0: Rational) -> Fraction:
        return self.c0 + self.c1 * Fraction(n0)

    def as_poly(self) -> Poly:
        return poly_from_terms({(0, 0): self.c0, (1, 0): self.c1})

    def as_ratfunc(self) -> RatFunc:
        return rat(self.as_poly())

    def int_offset_from(self, other: "ParamExpr") -> Optional[int]:
        """self - other when it is an integer constant, else None."""
        if self.c1 != other.c1:
            return None
        d = self.c0 - other.c0
        return int(d) if d.denominator == 1 else None

    def __str__(self):
        c0, c1 = self.c0, self.c1
        if not c1:
            return str(c0)
        if c1.numerator in (1, -1):
            nt = ("-" if c1 < 0 else "") + ("n" if c1.denominator == 1 else f"n/{c1.denominator}")
        else:
            nt = f"{c1.numerator}*n" + ("" if c1.denominator == 1 else f"/{c1.denominator}")
        if not c0:
            return nt
        if c0.denominator == 1:
            # constant-first style: 2-n/2, 3-n
            sign = "+" if c1 > 0 else "-"
            return f"{c0}{sign}{nt.lstrip('-')}"
        if c0.denominator == c1.denominator and c1.numerator in (1, -1):
            inner_n = "n" if c1 > 0 else "-n"
            c0n = c0.numerator
            return f"({inner_n}{'+' if c0n > 0 else '-'}{abs(c0n)})/{c0.denominator}"
        sign = "+" if c0 > 0 else "-"
        return f"{nt}{sign}{abs(c0)}"

    def to_json(self) -> dict:
        return {"c0": str(self.c0), "c1": str(self.c1)}

    @classmethod
    def from_json(cls, data: dict) -> "ParamExpr":
        return cls(Fraction(data["c0"]), Fraction(data["c1"]))


def param(c0: Rational, c1: Rational = 0) -> ParamExpr:
    return ParamExpr(c0, c1)


def parse_param(text: str) -> ParamExpr:
    """Parse a rational-linear expression in n, e.g. ``2-n/2`` or ``(n-1)/2``."""
    value = parse_expr(text, {"n": kernel.RAT_N}, rat)
    return _param_from_ratfunc(value, text)


def _param_from_ratfunc(value: RatFunc, text: str) -> ParamExpr:
    if not value.is_polynomial:
        raise ParseError("parameter must be polynomial in n", text, 0)
    terms = kernel.poly_terms(value.num)
    if any(e not in ((0, 0), (1, 0)) for e in terms):
        raise ParseError("parameter must be affine in n (no z)", text, 0)
    return ParamExpr(terms.get((0, 0), Fraction(0)), terms.get((1, 0), Fraction(0)))


@dataclass(frozen=True)
class PFQ:
    """A pFq function of the argument z with p = q+1 upper/lower parameters.

    Parameter tuples are kept sorted so structural equality is canonical.
    """

    upper: tuple[ParamExpr, ...]
    lower: tuple[ParamExpr, ...]

    def __init__(self, upper: Sequence[ParamExpr], lower: Sequence[ParamExpr]):
        up = tuple(sorted(upper))
        lo = tuple(sorted(lower))
        if len(up) != len(lo) + 1:
            raise ValueError(f"need p = q+1, got p={len(up)}, q={len(lo)}")
        object.__setattr__(self, "upper", up)
        object.__setattr__(self, "lower", lo)

    @property
    def order(self) -> int:
        """Order of the hypergeometric differential equation: max(p, q+1)."""
        return len(self.upper)

    def __str__(self):
        p, q = len(self.upper), len(self.lower)
        ups = ",".join(str(a) for a in self.upper)
        los = ",".join(str(b) for b in self.lower)
        return f"{p}F{q}[{ups};{los}]"

    def to_json(self) -> dict:
        return {
            "upper": [a.to_json() for a in self.upper],
            "lower": [b.to_json() for b in self.lower],
        }

    @classmethod
    def from_json(cls, data: dict) -> "PFQ":
        return cls(
            [ParamExpr.from_json(a) for a in data["upper"]],
            [ParamExpr.from_json(b) for b in data["lower"]],
        )


def parse_pfq(text: str) -> PFQ:
    """Parse ``pFq[u1,...,up; l1,...,lq]`` with affine-in-n parameters."""
    s = text.strip()
    i = 0
    while i < len(s) and s[i].isdigit():
        i += 1
    if i == 0 or i >= len(s) or s[i] not in "Ff":
        raise ParseError("expected pFq[...] header", text, 0)
    p = int(s[:i])
    j = i + 1
    while j < len(s) and s[j].isdigit():
        j += 1
    if j == i + 1:
        raise ParseError("expected q after F", text, i + 1)
    q = int(s[i + 1 : j])
    if j >= len(s) or s[j] != "[" or not s.endswith("]"):
        raise ParseError("expected bracketed parameter lists", text, j)
    body = s[j + 1 : -1]
    if body.count(";") != 1:
        raise ParseError("expected one ';' between upper and lower lists", text, j + 1)
    up_text, lo_text = body.split(";")
    uppers = [parse_param(t) for t in up_text.split(",")] if up_text.strip() else []
    lowers = [parse_param(t) for t in lo_text.split(",")] if lo_text.strip() else []
    if len(uppers) != p or len(lowers) != q:
        raise ParseError(f"parameter counts do not match {p}F{q}", text, j + 1)
    if p != q + 1:
        raise ParseError("only p = q+1 functions are supported", text, 0)
    return PFQ(uppers, lowers)


#: Canonical reduced Gauss function 2F1(1/2, 3-n; n/2; z).
CANONICAL_2F1 = PFQ(
    (param(Fraction(1, 2)), param(3, -1)),
    (param(0, Fraction(1, 2)),),
)

#: Canonical reduced 3F2(1, (n-1)/2, 2-n/2; n/2, n-1; z) with a unit upper.
CANONICAL_3F2 = PFQ(
    (param(1), param(Fraction(-1, 2), Fraction(1, 2)), param(2, Fraction(-1, 2))),
    (param(0, Fraction(1, 2)), param(-1, 1)),
)


class ThetaPoly:
    """Polynomial in theta = z d/dz with RatFunc coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence[Union[RatFunc, int, Fraction, Poly]]):
        cs = [rat(c) if not isinstance(c, RatFunc) else c for c in coeffs]
        while len(cs) > 1 and not cs[-1]:
            cs.pop()
        if not cs:
            cs = [RAT_ZERO]
        self.coeffs = tuple(cs)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, k: int) -> RatFunc:
        return self.coeffs[k] if k <= self.degree else RAT_ZERO

    def __eq__(self, other):
        return isinstance(other, ThetaPoly) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def scale(self, c: RatFunc) -> "ThetaPoly":
        """Left multiplication by a scalar function of (n, z)."""
        return ThetaPoly([c * x for x in self.coeffs])

    def mul_shift(self, other: "ThetaPoly") -> "ThetaPoly":
        """Product of operators with z-free coefficients (they commute)."""
        if any(c.num.degree(kernel.Z) > 0 or c.den.degree(kernel.Z) > 0
               for c in self.coeffs + other.coeffs):
            raise ValueError("mul_shift requires z-free coefficients")
        out = [RAT_ZERO] * (self.degree + other.degree + 1)
        for i, a in enumerate(self.coeffs):
            if not a:
                continue
            for j, b in enumerate(other.coeffs):
                if b:
                    out[i + j] = out[i + j] + a * b
        return ThetaPoly(out)

    def __str__(self):
        parts = []
        for k, c in enumerate(self.coeffs):
            if not c and self.degree:
                continue
            th = "" if k == 0 else ("theta" if k == 1 else f"theta^{k}")
            parts.append(f"({c}){'*' + th if th else ''}")
        return " + ".join(parts) if parts else "0"

    def to_json(self) -> list:
        return [str(c) for c in self.coeffs]

    @classmethod
    def from_json(cls, data: list) -> "ThetaPoly":
        return cls([kernel.parse_ratfunc(c) for c in data])


THETA_ONE = ThetaPoly([RAT_ONE])


@dataclass(frozen=True)
class ReducedForm:
    """A function expressed as op(theta) acting on a basis pFq + remainder.

    Invariant: degree(op) < basis_count(basis), so the coordinates of the
    function in the span {basis, theta basis, ...} plus the rational
    remainder are read off the coefficients directly.
    """

    basis: PFQ
    op: ThetaPoly
    remainder: RatFunc
    shifts: int = 0

    def to_json(self) -> dict:
        return {
            "basis": self.basis.to_json(),
            "op": self.op.to_json(),
            "remainder": str(self.remainder),
            "shifts": self.shifts,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ReducedForm":
        return cls(
            PFQ.from_json(data["basis"]),
            ThetaPoly.from_json(data["op"]),
            kernel.parse_ratfunc(data["remainder"]),
            int(data.get("shifts", 0)),
        )


# -- series evaluation ---------------------------------------------------------


def _series_meta(f: PFQ, n0: Rational):
    """Parameter values at n0, termination index, and lower-pole validation."""
    uppers = [a.at(n0) for a in f.upper]
    lowers = [b.at(n0) for b in f.lower]
    stop = None
    for a in uppers:
        if a.denominator == 1 and a <= 0:
            k = -int(a)
            stop = k if stop is None else min(stop, k)
    for b in lowers:
        if b.denominator == 1 and b <= 0:
            first_bad = 1 - int(b)
            if stop is None or stop >= first_bad:
                raise LowerParameterPole(
                    f"lower-parameter pole: ({b})_{first_bad} vanishes"
                )
    return uppers, lowers, stop


def _ratio_threshold(zmag: float) -> float:
    # 9/10 suffices for |z| <= 7/10; widen smoothly for larger arguments.
    return max(0.9, (1.0 + zmag) / 2.0)


def _safe_index(uppers, lowers, zmag: float, r: float, weight: int) -> int:
    """Index beyond which term ratios provably stay below r."""
    p = len(uppers)
    B = 1 + max([0] + [math.ceil(-float(b)) for b in lowers])
    C = 1.0 + max(abs(float(a)) for a in uppers) + max(
        [1.0] + [abs(float(b)) for b in lowers]
    )
    growth = (r / zmag) ** (1.0 / (p + weight)) - 1.0
    if growth <= 0:
        raise DivergentSeries("divergent series")
    return B + int(math.ceil(C / growth)) + 2


def _exact_terminating(f: PFQ, weight: int, z0: Fraction, n0: Fraction) -> Fraction:
    uppers, lowers, stop = _series_meta(f, n0)
    total = Fraction(0)
    term = Fraction(1)
    for k in range(stop + 1):
        total += term * (k**weight if weight else 1)
        num = Fraction(1)
        for a in uppers:
            num *= a + k
        den = Fraction(k + 1)
        for b in lowers:
            den *= b + k
        term *= z0 * num / den
    return total


def terminating_series_ratfunc(f: PFQ, n0: Rational) -> RatFunc:
    """Exact sum of a terminating series with z kept symbolic."""
    uppers, lowers, stop = _series_meta(f, n0)
    if stop is None:
        raise DivergentSeries("series does not terminate at this n")
    total = RAT_ZERO
    coeff = Fraction(1)
    for k in range(stop + 1):
        total = total + rat(coeff) * RAT_Z**k
        num = Fraction(1)
        for a in uppers:
            num *= a + k
        den = Fraction(k + 1)
        for b in lowers:
            den *= b + k
        coeff *= num / den
    return total


def _series_eval(f: PFQ, weight: int, z0, n0, prec: int) -> mpmath.mpf:
    exact_pt = isinstance(z0, (int, Fraction)) and isinstance(n0, (int, Fraction))
    if exact_pt:
        uppers, lowers, stop = _series_meta(f, Fraction(n0))
        if stop is not None:
            value = _exact_terminating(f, weight, Fraction(z0), Fraction(n0))
            with workdps(prec):
                return to_mpf(value)
    else:
        nf = Fraction(str(mpmath.mpf(n0))) if not isinstance(n0, (int, Fraction)) else Fraction(n0)
        uppers, lowers, stop = _series_meta(f, nf)

    with workdps(prec):
        zm = to_mpf(z0)
        if zm == 0:
            return mpmath.mpf(1 if weight == 0 else 0)
        zmag = abs(float(zm))
        if stop is None and zmag >= 1.0:
            raise DivergentSeries("divergent series")
        if stop is not None:
            k0 = stop
            r = 0.5
        else:
            r = _ratio_threshold(zmag)
            k0 = _safe_index(uppers, lowers, zmag, r, weight)
        tol = mpmath.mpf(10) ** (-(prec + 5))
        ups = [to_mpf(a) for a in uppers]
        los = [to_mpf(b) for b in lowers]
        term = mpmath.mpf(1)
        total = mpmath.mpf(0)
        k = 0
        while True:
            total += term * (k**weight if weight else 1)
            if stop is not None and k == stop:
                return total
            nxt = term * zm
            for a in ups:
                nxt *= a + k
            den = mpmath.mpf(k + 1)
            for b in los:
                den *= b + k
            nxt /= den
            wnxt = nxt * ((k + 1) ** weight if weight else 1)
            if stop is None and k >= k0 and abs(wnxt) <= (1 - r) * tol * abs(total):
                return total
            term = nxt
            k += 1
            if k > _MAX_TERMS:
                raise DivergentSeries("series did not meet its tail bound")


def series_sum(f: PFQ, z0, n0, prec: int = 50) -> mpmath.mpf:
    """Sum the defining series of f at z0 with n -> n0.

    Requires |z0| < 1 unless the series terminates; the truncation error is
    bounded below 10^(-prec-5) relative to the partial sum.
    """
    return _series_eval(f, 0, z0, n0, prec)


def series_theta(f: PFQ, k: int, z0, n0, prec: int = 50) -> mpmath.mpf:
    """Value of theta^k applied to f, summed termwise with weight j^k."""
    if k < 0:
        raise ValueError("theta power must be nonnegative")
    return _series_eval(f, k, z0, n0, prec)


# -- structural operations -------------------------------------------------------


def cancel_params(f: PFQ) -> PFQ:
    """Remove upper/lower parameter pairs that are structurally equal."""
    lowers = list(f.lower)
    uppers = []
    for a in f.upper:
        if a in lowers:
            lowers.remove(a)
        else:
            uppers.append(a)
    return PFQ(uppers, lowers)


def basis_count(f: PFQ) -> int:
    """Number of basis elements surviving differential reduction.

    The differential-equation order of the cancelled function, minus one for
    each remaining unit upper parameter (each converts one homogeneous
    dimension into a rational inhomogeneity).
    """
    g = cancel_params(f)
    units = sum(1 for a in g.upper if a.is_unit)
    return g.order - units


def raise_upper(f: PFQ, which: int) -> tuple[ThetaPoly, PFQ]:
    """Shift upper parameter a -> a+1: F(a+1,...) = ((theta + a)/a) F(a,...)."""
    a = f.upper[which]
    if a.is_zero:
        raise SingularOperator("zero parameter, operator singular")
    ar = a.as_ratfunc()
    op = ThetaPoly([RAT_ONE, RAT_ONE / ar])
    new = PFQ(f.upper[:which] + (a + 1,) + f.upper[which + 1 :], f.lower)
    return op, new

def lower_lower(f: PFQ, which: int) -> tuple[ThetaPoly, PFQ]:
    """Shift lower parameter b -> b-1: F(...;b-1) = ((theta+b-1)/(b-1)) F(...;b)."""
    b = f.lower[which]
    bm1 = b - 1
    if bm1.is_zero:
        raise SingularOperator("operator singular")
    br = bm1.as_ratfunc()
    op = ThetaPoly([RAT_ONE, RAT_ONE / br])
    new = PFQ(f.upper, f.lower[:which] + (bm1,) + f.lower[which + 1 :])
    return op, new


def _theta_product(params: Sequence[ParamExpr]) -> list[RatFunc]:
    """Coefficients of Prod_i (theta + p_i) as a polynomial in theta."""
    coeffs = [RAT_ONE]
    for p in params:
        pr = p.as_ratfunc()
        nxt = [RAT_ZERO] * (len(coeffs) + 1)
        for k, c in enumerate(coeffs):
            nxt[k] = nxt[k] + c * pr
            nxt[k + 1] = nxt[k + 1] + c
        coeffs = nxt
    return coeffs


def _reduction_rule(f: PFQ) -> tuple[int, list[RatFunc], RatFunc]:
    """Affine rewrite theta^d F = sum_k lin[k] theta^k F + aff for f.

    Without unit upper parameters this is the hypergeometric equation itself
    (d = p, aff = 0).  With a unit upper the equation integrates once:
    Prod_j (theta+b_j-1) F - z Prod_{a != 1} (theta+a) F = Prod_j (b_j - 1),
    giving d = q and a rational inhomogeneity.
    """
    uppers = list(f.upper)
    units = [a for a in uppers if a.is_unit]
    if units:
        uppers.remove(units[0])
        lhs = _theta_product([b - 1 for b in f.lower])
        rhs = _theta_product(uppers)
        const = RAT_ONE
        for b in f.lower:
            const = const * (b - 1).as_ratfunc()
        d = len(f.lower)
    else:
        inner = _theta_product([b - 1 for b in f.lower])
        lhs = [RAT_ZERO] + inner  # multiply by theta
        rhs = _theta_product(uppers)
        const = RAT_ZERO
        d = len(f.upper)
    L = [lhs[k] - RAT_Z * rhs[k] for k in range(d)]
    lead = lhs[d] - RAT_Z * rhs[d]
    lin = [-(c) / lead for c in L]
    aff = const / lead
    return d, lin, aff


def _affine_reduce(
    op: ThetaPoly, rule: tuple[int, list[RatFunc], RatFunc]
) -> tuple[list[RatFunc], RatFunc]:
    """Rewrite op modulo the rule; returns (coeffs below d, remainder)."""
    d, rlin, raff = rule
    rows: list[tuple[list[RatFunc], RatFunc]] = []
    for m in range(op.degree + 1):
        if m < d:
            vec = [RAT_ZERO] * d
            vec[m] = RAT_ONE
            rows.append((vec, RAT_ZERO))
            continue
        pv, pw = rows[m - 1]
        top = pv[d - 1]
        vec = []
        for j in range(d):
            c = RAT_Z * pv[j].diff_z() + top * rlin[j]
            if j:
                c = c + pv[j - 1]
            vec.append(c)
        rows.append((vec, RAT_Z * pw.diff_z() + top * raff))
    out = [RAT_ZERO] * d
    rem = RAT_ZERO
    for m in range(op.degree + 1):
        c = op[m]
        if not c:
            continue
        vec, aff = rows[m]
        for j in range(d):
            out[j] = out[j] + c * vec[j]
        rem = rem + c * aff
    return out, rem


def theta_reduce(f: PFQ, op: ThetaPoly) -> ThetaPoly:
    """Reduce op to degree < order(f) modulo the homogeneous equation of f."""
    r = f.order
    if op.degree < r:
        return op
    uppers = list(f.upper)
    inner = _theta_product([b - 1 for b in f.lower])
    lhs = [RAT_ZERO] + inner
    rhs = _theta_product(uppers)
    lead = lhs[r] - RAT_Z * rhs[r]
    lin = [-(lhs[k] - RAT_Z * rhs[k]) / lead for k in range(r)]
    out, _ = _affine_reduce(op, (r, lin, RAT_ZERO))
    return ThetaPoly(out)


def _match_offsets(
    xs: Sequence[ParamExpr], ys: Sequence[ParamExpr]
) -> Optional[list[tuple[ParamExpr, int]]]:
    """Bijection between xs and ys with integer offsets; pairs (y, x - y)."""
    if not xs:
        return []
    x = xs[0]
    for i, y in enumerate(ys):
        k = x.int_offset_from(y)
        if k is None:
            continue
        rest = _match_offsets(xs[1:], ys[:i] + ys[i + 1 :])
        if rest is not None:
            return [(y, k)] + rest
    return None


def _shift_chain(g: PFQ, target: PFQ) -> tuple[ThetaPoly, RatFunc, int]:
    """Express F_g = op . F_target + rem using raise-upper / lower-lower steps.

    A leftover (unit upper, lower 2) pair is absorbed via
    F(1, A...; 2, B...; z) = Prod(B-1) / (z Prod(A-1)) [F(A-1...; B-1...; z) - 1],
    which drops p and q by one and shifts the remaining parameters down.
    """
    if len(g.upper) == len(target.upper):
        ups = _match_offsets(list(g.upper), list(target.upper))
        los = _match_offsets(list(g.lower), list(target.lower))
        if ups is None or los is None:
            raise UnsupportedShift("parameters are not related by integer shifts")
        if any(k < 0 for _, k in ups) or any(k > 0 for _, k in los):
            raise UnsupportedShift("unsupported shift direction")
        op = THETA_ONE
        steps = 0
        for base, k in ups:
            for i in range(k):
                a = base + i
                if a.is_zero:
                    raise SingularOperator("zero parameter, operator singular")
                op = op.mul_shift(ThetaPoly([a.as_ratfunc(), RAT_ONE]).scale(
                    RAT_ONE / a.as_ratfunc()))
                steps += 1
        for base, k in los:
            for i in range(1, -k + 1):
                bm1 = base - i
                if bm1.is_zero:
                    raise SingularOperator("operator singular")
                op = op.mul_shift(ThetaPoly([bm1.as_ratfunc(), RAT_ONE]).scale(
                    RAT_ONE / bm1.as_ratfunc()))
                steps += 1
        return op, RAT_ZERO, steps

    if len(g.upper) == len(target.upper) + 1:
        unit = next((a for a in g.upper if a.is_unit), None)
        two = next((b for b in g.lower if b.is_const(2)), None)
        if unit is not None and two is not None:
            rest_up = list(g.upper)
            rest_up.remove(unit)
            rest_lo = list(g.lower)
            rest_lo.remove(two)
            if any((a - 1).is_zero for a in rest_up):
                raise UnsupportedShift("absorption blocked by a second unit parameter")
            scale = RAT_ONE
            for b in rest_lo:
                scale = scale * (b - 1).as_ratfunc()
            for a in rest_up:
                scale = scale / (a - 1).as_ratfunc()
            scale = scale / RAT_Z
            inner = cancel_params(PFQ([a - 1 for a in rest_up], [b - 1 for b in rest_lo]))
            op, rem, steps = _shift_chain(inner, target)
            return op.scale(scale), scale * (rem - RAT_ONE), steps

    raise UnsupportedShift("unsupported shift direction")


def reduce_shifts(f: PFQ, target: PFQ) -> ReducedForm:
    """Differential reduction of f onto the canonical function target.

    f must be reachable from target by raising upper parameters and lowering
    lower parameters (after structural cancellation), optionally absorbing a
    (unit upper, lower 2) pair into a rational remainder.
    """
    g = cancel_params(f)
    op, rem, steps = _shift_chain(g, target)
    rule = _reduction_rule(target)
    lin, extra = _affine_reduce(op, rule)
    return ReducedForm(target, ThetaPoly(lin), rem + extra, steps)


def eval_reduced(r: ReducedForm, z0, n0, prec: int = 50) -> mpmath.mpf:
    """Numeric value of op applied to the basis function plus remainder."""
    with workdps(prec):
        total = mpmath.mpf(0)
        for k, c in enumerate(r.op.coeffs):
            if not c:
                continue
            total += c.eval_mpf(n0, z0) * series_theta(r.basis, k, z0, n0, prec)
        if r.remainder:
            total += r.remainder.eval_mpf(n0, z0)
        return total
