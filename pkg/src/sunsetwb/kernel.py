"""Exact and arbitrary-precision arithmetic underpinning the workbench.

Symbolic side: sparse polynomials over Q in the symbols n (spacetime
dimension) and z (dimensionless mass ratio), and rational functions kept in
canonical reduced form (gcd-free, denominator monic under graded-lex order
with n before z).  Numeric side: mpmath-backed floats at a requested decimal
precision plus ten guard digits, the Gamma function, and Pochhammer symbols.

Scale conventions used throughout the package: M^2 = 1 and m^2 = z/4, so
every symbolic quantity lives in Q(n, z).
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Callable, Sequence, TypeVar, Union

import mpmath
from sympy.polys.domains import QQ
from sympy.polys.rings import PolyElement, ring

from .errors import GammaPole, ParseError, PoleError, ZeroDivisor

BigRat = Fraction

#: Coefficient ring Q[n, z] with graded-lex term order, n before z.
RING, N, Z = ring("n,z", QQ, order="grlex")

Poly = PolyElement

#: Guard digits added on top of every requested decimal precision.
GUARD_DIGITS = 10

Rational = Union[int, Fraction]
Scalar = Union[int, Fraction, "Poly", "RatFunc"]


def _qq(x: Rational):
    x = Fraction(x)
    return QQ(x.numerator, x.denominator)


def _frac(x) -> Fraction:
    """Ground element of QQ (mpq or PythonRational) -> Fraction."""
    return Fraction(int(x.numerator), int(x.denominator))


def as_poly(x) -> Poly:
    """Coerce an int, Fraction or Poly into the (n, z) ring."""
    if isinstance(x, PolyElement):
        if x.ring is not RING:
            raise TypeError("polynomial from a foreign ring")
        return x
    if isinstance(x, (int, Fraction)):
        return RING.ground_new(_qq(x))
    raise TypeError(f"cannot coerce {type(x).__name__} to Poly")


def poly_from_terms(terms: dict) -> Poly:
    """Build a polynomial from {(exp_n, exp_z): Fraction} mappings."""
    return RING.from_dict({e: _qq(c) for e, c in terms.items() if c})


def poly_terms(p: Poly) -> dict:
    """Terms of p as {(exp_n, exp_z): Fraction}, zero coefficients dropped."""
    return {e: _frac(c) for e, c in p.terms()}


def poly_eval(p: Poly, n0: Rational, z0: Rational) -> Fraction:
    v = p.evaluate([(N, _qq(n0)), (Z, _qq(z0))])
    return _frac(v)


def poly_eval_mpf(p: Poly, n0, z0) -> mpmath.mpf:
    """Evaluate at mpf points (current mpmath precision)."""
    total = mpmath.mpf(0)
    for (en, ez), c in p.terms():
        total += to_mpf(_frac(c)) * n0**en * z0**ez
    return total


def poly_str(p: Poly) -> str:
    """Canonical compact text, e.g. ``3*n-8`` or ``n^2*z-z^2``."""
    if not p:
        return "0"
    parts = []
    for (en, ez), c in sorted(p.terms(), reverse=True):
        c = _frac(c)
        mono = "*".join(
            ([f"n^{en}" if en > 1 else "n"] if en else [])
            + ([f"z^{ez}" if ez > 1 else "z"] if ez else [])
        )
        if not mono:
            body = str(abs(c))
        elif abs(c) == 1:
            body = mono
        else:
            body = f"{abs(c)}*{mono}"
        parts.append(("-" if c < 0 else "+") + body)
    out = "".join(parts)
    return out[1:] if out.startswith("+") else out


class RatFunc:
    """Rational function in (n, z) over Q, always in canonical form.

    Canonical form: numerator and denominator coprime, denominator monic
    under the ring's graded-lex order.  Instances are immutable and hashable;
    arithmetic never mutates.
    """

    __slots__ = ("num", "den", "_hash")

    def __init__(self, num: Scalar = 0, den: Scalar = 1):
        if isinstance(num, RatFunc) or isinstance(den, RatFunc):
            a = num if isinstance(num, RatFunc) else RatFunc(num)
            b = den if isinstance(den, RatFunc) else RatFunc(den)
            q = a / b
            num, den = q.num, q.den
        else:
            num, den = as_poly(num), as_poly(den)
        if not den:
            raise ZeroDivisor("zero divisor")
        if not num:
            num, den = RING.zero, RING.one
        else:
            g = num.gcd(den)
            if g != RING.one:
                num, den = num.quo(g), den.quo(g)
            lc = den.LC
            if lc != QQ.one:
                inv = QQ.one / lc
                num, den = num.mul_ground(inv), den.mul_ground(inv)
        self.num = num
        self.den = den
        self._hash = None

    # -- coercion -----------------------------------------------------------

    @staticmethod
    def _coerce(x) -> "RatFunc":
        if isinstance(x, RatFunc):
            return x
        return RatFunc(x)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        o = self._coerce(other)
        return RatFunc(self.num * o.den + o.num * self.den, self.den * o.den)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return RatFunc(self.num * o.den - o.num * self.den, self.den * o.den)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        return RatFunc(self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if not o.num:
            raise ZeroDivisor("zero divisor")
        return RatFunc(self.num * o.den, self.den * o.num)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __neg__(self):
        return RatFunc(-self.num, self.den)

    def __pow__(self, k: int):
        if k < 0:
            return RatFunc(self.den, self.num) ** (-k)
        return RatFunc(self.num**k, self.den**k)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction, PolyElement, RatFunc)):
            o = self._coerce(other)
            return self.num == o.num and self.den == o.den
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            key = (tuple(sorted(self.num.terms())), tuple(sorted(self.den.terms())))
            self._hash = hash(key)
        return self._hash

    def __bool__(self):
        return bool(self.num)

    # -- queries ------------------------------------------------------------

    @property
    def is_polynomial(self) -> bool:
        return self.den == RING.one

    def as_fraction(self) -> Fraction:
        """Constant RatFunc -> Fraction; raises for genuine functions."""
        if self.num.degree(N) > 0 or self.num.degree(Z) > 0 or not self.is_polynomial:
            raise ValueError(f"not a constant: {self}")
        return Fraction(0) if not self.num else _frac(self.num.LC)

    def diff_z(self) -> "RatFunc":
        """Partial derivative with respect to z (quotient rule)."""
        return RatFunc(
            self.num.diff(Z) * self.den - self.num * self.den.diff(Z),
            self.den * self.den,
        )

    def eval_frac(self, n0: Rational, z0: Rational) -> Fraction:
        """Exact value at a rational point; PoleError at denominator zeros."""
        d = poly_eval(self.den, n0, z0)
        if d == 0:
            raise PoleError("pole of rational function")
        return poly_eval(self.num, n0, z0) / d

    def eval_mpf(self, n0, z0) -> mpmath.mpf:
        """Value at mpf/rational points at the current mpmath precision."""
        if isinstance(n0, (int, Fraction)) and isinstance(z0, (int, Fraction)):
            return to_mpf(self.eval_frac(n0, z0))
        d = poly_eval_mpf(self.den, to_mpf(n0), to_mpf(z0))
        if d == 0:
            raise PoleError("pole of rational function")
        return poly_eval_mpf(self.num, to_mpf(n0), to_mpf(z0)) / d

    def subs_n(self, n0: Rational) -> "RatFunc":
        """Substitute a rational value for n, keeping z symbolic."""

        def _sub(p: Poly) -> Poly:
            out = RING.zero
            v = Fraction(n0)
            for (en, ez), c in p.terms():
                out += poly_from_terms({(0, ez): _frac(c) * v**en})
            return out

        return RatFunc(_sub(self.num), _sub(self.den))

    def __str__(self):
        if self.is_polynomial:
            return poly_str(self.num)
        num = poly_str(self.num)
        den = poly_str(self.den)
        return f"({num})/({den})"

    def __repr__(self):
        return f"RatFunc({self})"


def rat(x: Scalar = 0) -> RatFunc:
    """Shorthand constructor for RatFunc."""
    return RatFunc._coerce(x)


RAT_ZERO = rat(0)
RAT_ONE = rat(1)
RAT_N = rat(N)
RAT_Z = rat(Z)


def ratfunc_arith(a: RatFunc, b: RatFunc, op: str) -> RatFunc:
    """Field arithmetic dispatch: op in {add, sub, mul, div}."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown op {op!r}")


def ratfunc_eval(f: RatFunc, n0, z0):
    """Exact evaluation when both points rational, else correctly rounded."""
    if isinstance(n0, (int, Fraction)) and isinstance(z0, (int, Fraction)):
        return f.eval_frac(n0, z0)
    return f.eval_mpf(n0, z0)


# -- numerics ----------------------------------------------------------------


def workdps(prec: int):
    """mpmath context with prec + GUARD_DIGITS working decimal digits."""
    return mpmath.workdps(prec + GUARD_DIGITS)


def to_mpf(x) -> mpmath.mpf:
    """Convert int/Fraction/mpf to mpf at the current working precision."""
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def mpf_str(x, digits: int) -> str:
    """Decimal rendering with an explicit digit count."""
    return mpmath.nstr(x, digits)


def gamma(x, prec: int = 50) -> mpmath.mpf:
    """Gamma(x) with relative error below 10^(-prec).

    x may be an int, Fraction or mpf; non-positive integers are poles.
    """
    if isinstance(x, (int, Fraction)):
        xf = Fraction(x)
        if xf.denominator == 1 and xf <= 0:
            raise GammaPole(f"gamma pole at {xf}")
        with workdps(prec):
            return mpmath.gamma(to_mpf(xf))
    xm = mpmath.mpf(x)
    if xm <= 0 and xm == mpmath.floor(xm):
        raise GammaPole(f"gamma pole at {xm}")
    with workdps(prec):
        return mpmath.gamma(xm)


def pochhammer(x, k: int):
    """Rising factorial (x)_k = x (x+1) ... (x+k-1); (x)_0 = 1.

    x may be a Fraction (exact Fraction result) or a Poly/affine expression
    in n (Poly result).
    """
    if k < 0:
        raise ValueError("pochhammer requires k >= 0")
    if isinstance(x, PolyElement):
        out = RING.one
        for i in range(k):
            out = out * (x + as_poly(i))
        return out
    acc = Fraction(1)
    xf = Fraction(x)
    for i in range(k):
        acc *= xf + i
    return acc


def gamma_shift_ratio(x: Poly, k: int) -> RatFunc:
    """Gamma(x + k) / Gamma(x) as an exact rational function of n.

    Valid for integer k; negative k produce the reciprocal Pochhammer.
    """
    if k >= 0:
        return rat(pochhammer(x, k))
    p = pochhammer(x + as_poly(k), -k)
    if not p:
        raise ZeroDivisor("gamma ratio hits a pole factor")
    return RAT_ONE / rat(p)


# -- exact linear algebra ------------------------------------------------------


def nullspace(rows: Sequence[Sequence[RatFunc]]) -> list[list[RatFunc]]:
    """Right-nullspace basis of a matrix over Q(n, z), via exact Gauss-Jordan."""
    m = [list(r) for r in rows]
    if not m:
        return []
    ncols = len(m[0])
    pivots: list[int] = []
    prow = 0
    for col in range(ncols):
        pr = next((r for r in range(prow, len(m)) if m[r][col]), None)
        if pr is None:
            continue
        m[prow], m[pr] = m[pr], m[prow]
        inv = RAT_ONE / m[prow][col]
        m[prow] = [c * inv for c in m[prow]]
        for r in range(len(m)):
            if r != prow and m[r][col]:
                f = m[r][col]
                m[r] = [a - f * b for a, b in zip(m[r], m[prow])]
        pivots.append(col)
        prow += 1
        if prow == len(m):
            break
    basis = []
    free = [c for c in range(ncols) if c not in pivots]
    for fc in free:
        vec = [RAT_ZERO] * ncols
        vec[fc] = RAT_ONE
        for r, pc in enumerate(pivots):
            vec[pc] = -m[r][fc]
        basis.append(vec)
    return basis


# -- text grammar --------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)|(?P<int>\d+)|(?P<name>[A-Za-z][A-Za-z0-9]*)"
    r"|(?P<pow>\*\*|\^)|(?P<op>[-+*/()])"
)

T = TypeVar("T")


class _ExprParser:
    """Recursive-descent parser for +,-,*,/,^ expressions over named atoms.

    Generic over the value domain: ``atoms`` maps names to values and
    ``const`` lifts integers; the domain must support field arithmetic.
    """

    def __init__(self, text: str, atoms: dict, const: Callable[[int], T]):
        self.text = text
        self.atoms = atoms
        self.const = const
        self.toks: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            mo = _TOKEN_RE.match(text, pos)
            if mo is None:
                raise ParseError("unexpected character", text, pos)
            pos = mo.end()
            kind = mo.lastgroup
            if kind != "ws":
                self.toks.append((kind, mo.group(), mo.start()))
        self.i = 0

    def _peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else ("end", "", len(self.text))

    def _next(self):
        tok = self._peek()
        self.i += 1
        return tok

    def parse(self) -> T:
        val = self._expr()
        kind, _, pos = self._peek()
        if kind != "end":
            raise ParseError("trailing input", self.text, pos)
        return val

    def _expr(self) -> T:
        kind, tok, _ = self._peek()
        negate = False
        if kind == "op" and tok in "+-":
            self._next()
            negate = tok == "-"
        val = self._term()
        if negate:
            val = self.const(0) - val
        while True:
            kind, tok, _ = self._peek()
            if kind == "op" and tok in "+-":
                self._next()
                rhs = self._term()
                val = val + rhs if tok == "+" else val - rhs
            else:
                return val

    def _term(self) -> T:
        val = self._factor()
        while True:
            kind, tok, pos = self._peek()
            if kind == "op" and tok in "*/":
                self._next()
                rhs = self._factor()
                try:
                    val = val * rhs if tok == "*" else val / rhs
                except ZeroDivisor:
                    raise ParseError("division by zero", self.text, pos) from None
            else:
                return val

    def _factor(self) -> T:
        val = self._atom()
        kind, _, pos = self._peek()
        if kind == "pow":
            self._next()
            ekind, etok, epos = self._next()
            if ekind != "int":
                raise ParseError("integer exponent expected", self.text, epos)
            val = val ** int(etok)
        return val

    def _atom(self) -> T:
        kind, tok, pos = self._next()
        if kind == "int":
            return self.const(int(tok))
        if kind == "name":
            if tok not in self.atoms:
                raise ParseError(f"unknown symbol {tok!r}", self.text, pos)
            return self.atoms[tok]
        if kind == "op" and tok == "(":
            val = self._expr()
            ckind, ctok, cpos = self._next()
            if not (ckind == "op" and ctok == ")"):
                raise ParseError("expected ')'", self.text, cpos)
            return val
        if kind == "op" and tok == "-":
            return self.const(0) - self._factor()
        raise ParseError("expected a value", self.text, pos)


def parse_expr(text: str, atoms: dict, const: Callable[[int], T]) -> T:
    return _ExprParser(text, atoms, const).parse()


def parse_ratfunc(text: str) -> RatFunc:
    """Parse canonical rational-function text over symbols n and z."""
    return parse_expr(text, {"n": RAT_N, "z": RAT_Z}, rat)


def parse_fraction(text: str) -> Fraction:
    """Strictly rational CLI literal: 'p', '-p', or 'p/q'. Decimals rejected."""
    if not re.fullmatch(r"[+-]?\d+(/\d+)?", text.strip()):
        raise ParseError("expected a rational p/q", text, 0)
    return Fraction(text)
