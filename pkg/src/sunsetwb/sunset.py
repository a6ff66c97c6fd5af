"""Two-loop on-shell sunset self-energy J(sigma, beta, alpha).

The diagram has one massless line (index sigma), one line of mass m (index
beta) and one of mass M (index alpha), with the external momentum on the
m-shell (p^2 = -m^2).  Internally M^2 = 1 and m^2 = z/4, so z = 4 m^2 / M^2.

The integral is a two-term combination of 4F3 functions of z.  Both terms
collapse structurally, and the three nontrivial masters J(1,1,1), J(1,2,1),
J(1,1,2) decompose exactly over the five-dimensional space spanned by
{1, F, theta F} of the canonical 2F1 and {G, theta G} of the canonical 3F2.
The one-dimensional nullspace of that 5x4 coordinate system is the algebraic
relation among the masters; its inhomogeneity is a pure Gamma product, which
is why no integration-by-parts identity can reproduce it.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial
from typing import Optional, Sequence, Union

import mpmath

from . import hyper, kernel
from .errors import (
    DomainError,
    NotAMaster,
    ParseError,
    RelationCountMismatch,
    RepresentationUndefined,
    UnsupportedShift,
)
from .hyper import (
    CANONICAL_2F1,
    CANONICAL_3F2,
    PFQ,
    ParamExpr,
    ReducedForm,
    param,
    reduce_shifts,
    series_sum,
    terminating_series_ratfunc,
)
from .kernel import (
    RAT_ONE,
    RAT_Z,
    RAT_ZERO,
    RatFunc,
    gamma,
    gamma_shift_ratio,
    nullspace,
    parse_expr,
    rat,
    to_mpf,
    workdps,
)

Rational = Union[int, Fraction]

HALF = Fraction(1, 2)


@dataclass(frozen=True, order=True)
class SunsetIndices:
    """Propagator powers (sigma, beta, alpha) of J(sigma, beta, alpha).

    sigma sits on the massless line, beta on the m-line, alpha on the
    M-line; note the argument order differs from the denominator order.
    """

    sigma: int
    beta: int
    alpha: int

    @property
    def label(self) -> str:
        return f"J({self.sigma},{self.beta},{self.alpha})"

    @property
    def total(self) -> int:
        return self.sigma + self.beta + self.alpha


MASTERS = (SunsetIndices(1, 1, 1), SunsetIndices(1, 2, 1), SunsetIndices(1, 1, 2))


def _merge_gammas(pairs) -> tuple:
    counts: dict[ParamExpr, int] = {}
    for arg, exp in pairs:
        counts[arg] = counts.get(arg, 0) + exp
    return tuple(sorted(((a, e) for a, e in counts.items() if e), key=lambda t: (t[0], t[1])))


@dataclass(frozen=True)
class GammaProduct:
    """Product of Gamma factors with a (z/4) power and an M^2 power.

    ``factors`` maps affine-in-n arguments to integer exponents; integer
    constant arguments are folded into rational multipliers elsewhere.
    """

    factors: tuple[tuple[ParamExpr, int], ...]
    z4_exp: ParamExpr
    mass_exp: ParamExpr

    def __init__(self, factors=(), z4_exp: ParamExpr = param(0), mass_exp: ParamExpr = param(0)):
        object.__setattr__(self, "factors", _merge_gammas(factors))
        object.__setattr__(self, "z4_exp", z4_exp)
        object.__setattr__(self, "mass_exp", mass_exp)

    def eval_mpf(self, z0, n0: Rational, prec: int) -> mpmath.mpf:
        """Numeric value at M^2 = 1; raises GammaPole at Gamma poles and
        DomainError when z0 = 0 meets a non-positive (z/4) exponent."""
        with workdps(prec):
            total = mpmath.mpf(1)
            for arg, exp in self.factors:
                total *= gamma(arg.at(n0), prec) ** exp
            e = self.z4_exp.at(n0)
            z4 = to_mpf(Fraction(z0) if isinstance(z0, (int, Fraction)) else z0) / 4
            if z4 == 0:
                if e > 0:
                    return mpmath.mpf(0)
                if e < 0:
                    raise DomainError("outside convergence domain: (z/4)^negative at z=0")
            elif e:
                total *= z4 ** to_mpf(e)
            return total

    def __str__(self):
        parts = []
        for arg, exp in self.factors:
            s = f"Gamma({arg})"
            if exp != 1:
                s += f"^{exp}"
            parts.append(s)
        if not self.z4_exp.is_zero:
            parts.append(f"(z/4)^({self.z4_exp})")
        if not self.mass_exp.is_zero:
            parts.append(f"(M^2)^({self.mass_exp})")
        return "*".join(parts) if parts else "1"

    def to_json(self) -> dict:
        return {
            "gammas": [[str(a), e] for a, e in self.factors],
            "z4_exponent": str(self.z4_exp),
            "mass_exponent": str(self.mass_exp),
        }

    @classmethod
    def from_json(cls, data: dict) -> "GammaProduct":
        return cls(
            [(hyper.parse_param(a), int(e)) for a, e in data["gammas"]],
            hyper.parse_param(data["z4_exponent"]),
            hyper.parse_param(data["mass_exponent"]),
        )


#: Gamma prefactor of the 2F1 branch: Gamma(n/2-1) Gamma(3-n) Gamma(2-n/2).
A_PREFACTOR = GammaProduct(
    ((param(-1, HALF), 1), (param(3, -1), 1), (param(2, -HALF), 1))
)

#: Gamma prefactor of the 3F2 branch: (z/4)^(n/2-1) Gamma(1-n/2) Gamma(2-n/2).
B_PREFACTOR = GammaProduct(
    ((param(1, -HALF), 1), (param(2, -HALF), 1)),
    z4_exp=param(-1, HALF),
)


def gamma_ratio(gp: GammaProduct, ref: GammaProduct) -> RatFunc:
    """gp / ref as an exact rational function times (z/4)^(integer).

    Every Gamma factor of gp must pair with one of ref (or another of gp)
    at an integer offset; the pairing telescopes to Pochhammer ratios.
    """
    counts: dict[ParamExpr, int] = {a: e for a, e in gp.factors}
    for a, e in ref.factors:
        counts[a] = counts.get(a, 0) - e
    pos: list[ParamExpr] = []
    neg: list[ParamExpr] = []
    for a, e in counts.items():
        (pos if e > 0 else neg).extend([a] * abs(e))
    if len(pos) != len(neg):
        raise DomainError("gamma products differ by more than integer shifts")
    pairs = hyper._match_offsets(pos, neg)
    if pairs is None:
        raise DomainError("gamma products differ by more than integer shifts")
    ratio = RAT_ONE
    for base, k in pairs:
        ratio = ratio * gamma_shift_ratio(base.as_poly(), k)
    dz = gp.z4_exp.int_offset_from(ref.z4_exp)
    if dz is None:
        raise DomainError("(z/4) exponents differ non-integrally")
    if dz:
        ratio = ratio * (RAT_Z / 4) ** dz
    return ratio


@dataclass(frozen=True)
class HyperCombo:
    """Linear combination of (GammaProduct, rational multiplier, pFq) terms."""

    terms: tuple[tuple[GammaProduct, RatFunc, PFQ], ...]

    def eval_mpf(self, z0, n0: Rational, prec: int) -> mpmath.mpf:
        with workdps(prec):
            total = mpmath.mpf(0)
            for gp, mult, f in self.terms:
                pre = gp.eval_mpf(z0, n0, prec)
                if pre == 0:
                    continue
                total += pre * mult.eval_mpf(n0, z0) * series_sum(f, z0, n0, prec)
            return total

    def __str__(self):
        return "\n + ".join(f"{gp} * ({mult}) * {f}" for gp, mult, f in self.terms)

    def to_json(self) -> dict:
        return {
            "terms": [
                {"gamma": gp.to_json(), "multiplier": str(mult), "pfq": f.to_json()}
                for gp, mult, f in self.terms
            ]
        }

    @classmethod
    def from_json(cls, data: dict) -> "HyperCombo":
        return cls(
            tuple(
                (
                    GammaProduct.from_json(t["gamma"]),
                    kernel.parse_ratfunc(t["multiplier"]),
                    PFQ.from_json(t["pfq"]),
                )
                for t in data["terms"]
            )
        )


def build_representation(idx: SunsetIndices) -> HyperCombo:
    """Two-term 4F3 representation of J(sigma, beta, alpha) at M^2 = 1.

    Exact in (n, z); the overall mass dimension n - sigma - alpha - beta is
    recorded on each term's GammaProduct.
    """
    s, b, a = idx.sigma, idx.beta, idx.alpha
    if s < 1 or b < 1 or a < 1:
        raise RepresentationUndefined("representation undefined; use IBP module")
    mass = param(-(s + a + b), 1)
    base = 1 / (Fraction(factorial(s - 1)) * factorial(a - 1) * factorial(b - 1))
    common = ((param(-s, HALF), 1), (param(0, HALF), -1))

    g1 = GammaProduct(
        common
        + ((param(-b, HALF), 1), (param(a + b + s, -1), 1), (param(b + s, -HALF), 1)),
        mass_exp=mass,
    )
    f1 = PFQ(
        (
            param(a + b + s, -1),
            param(b + s, -HALF),
            param(Fraction(b, 2)),
            param(Fraction(1 + b, 2)),
        ),
        (param(1 + b, -HALF), param(b), param(0, HALF)),
    )

    g2 = GammaProduct(
        common + ((param(b, -HALF), 1), (param(a + s, -HALF), 1)),
        z4_exp=param(-b, HALF),
        mass_exp=mass,
    )
    f2 = PFQ(
        (
            param(s),
            param(a + s, -HALF),
            param(Fraction(-b, 2), HALF),
            param(Fraction(1 - b, 2), HALF),
        ),
        (param(1 - b, HALF), param(-b, 1), param(0, HALF)),
    )
    mult2 = rat(base * factorial(s - 1))
    return HyperCombo(((g1, rat(base), f1), (g2, mult2, f2)))


def collapse(h: HyperCombo) -> HyperCombo:
    """Structural cancellation of equal upper/lower pairs, termwise."""
    merged: dict = {}
    order = []
    for gp, mult, f in h.terms:
        g = hyper.cancel_params(f)
        key = (gp, g)
        if key in merged:
            merged[key] = merged[key] + mult
        else:
            merged[key] = mult
            order.append(key)
    return HyperCombo(tuple((gp, merged[(gp, g)], g) for gp, g in order))


@dataclass(frozen=True)
class BasisCoords:
    """Exact coordinates of a normalized master over the reduced basis.

    coords_2f1: coefficients of {1, F, theta F} for the canonical 2F1 branch
    (carrying the A prefactor); coords_3f2: coefficients of {G, theta G} for
    the canonical 3F2 branch (carrying the B prefactor).
    """

    coords_2f1: tuple[RatFunc, RatFunc, RatFunc]
    coords_3f2: tuple[RatFunc, RatFunc]


@lru_cache(maxsize=None)
def decompose_xy(idx: SunsetIndices) -> BasisCoords:
    """Coordinates of the dimensionless master X = (n/2 - 1) J over the basis.

    X(idx) = A * (c0 + c1 F + c2 theta F) + B * (d0 G + d1 theta G) with the
    prefactors A, B above; all five coordinates are exact in Q(n, z).
    """
    if idx not in MASTERS:
        raise NotAMaster("not a master")
    combo = collapse(build_representation(idx))
    norm = rat(kernel.N) / 2 - 1
    xc = [RAT_ZERO, RAT_ZERO, RAT_ZERO]
    yc = [RAT_ZERO, RAT_ZERO]
    for gp, mult, f in combo.terms:
        try:
            rf = reduce_shifts(f, CANONICAL_2F1)
            branch = "x"
            ref = A_PREFACTOR
        except UnsupportedShift:
            rf = reduce_shifts(f, CANONICAL_3F2)
            branch = "y"
            ref = B_PREFACTOR
        stripped = GammaProduct(gp.factors, gp.z4_exp)
        scale = mult * norm * gamma_ratio(stripped, ref)
        if branch == "x":
            xc[0] = xc[0] + scale * rf.remainder
            xc[1] = xc[1] + scale * rf.op[0]
            xc[2] = xc[2] + scale * rf.op[1]
        else:
            if rf.remainder:
                raise DomainError("3F2 branch produced a rational remainder")
            yc[0] = yc[0] + scale * rf.op[0]
            yc[1] = yc[1] + scale * rf.op[1]
    return BasisCoords(tuple(xc), tuple(yc))


@lru_cache(maxsize=None)
def find_relation() -> tuple[tuple, ...]:
    """Solve for the unique linear relation among the three masters.

    Returns (lambdas, mu) with polynomial entries, normalized so the
    J(1,1,2) coefficient equals 2: the combination
    sum_i lambda_i X_i = mu on the 2F1 branch and 0 on the 3F2 branch.
    """
    coords = [decompose_xy(m) for m in MASTERS]
    rows = []
    for j in range(3):
        row = [coords[i].coords_2f1[j] for i in range(3)]
        row.append(rat(-1) if j == 0 else RAT_ZERO)
        rows.append(row)
    for j in range(2):
        rows.append([coords[i].coords_3f2[j] for i in range(3)] + [RAT_ZERO])
    basis = nullspace(rows)
    if len(basis) != 1:
        raise RelationCountMismatch("relation count mismatch")
    vec = basis[0]
    if not vec[2]:
        raise RelationCountMismatch("relation count mismatch")
    scale = rat(2) / vec[2]
    vec = [v * scale for v in vec]
    if not all(v.is_polynomial for v in vec):
        raise RelationCountMismatch("relation count mismatch")
    lambdas = tuple(v.num for v in vec[:3])
    mu = vec[3].num
    return lambdas, mu


@dataclass(frozen=True)
class DimCoeff:
    """Rational-function coefficient with explicit m^2 and M^2 powers."""

    ratio: RatFunc
    m2: int = 0
    M2: int = 0

    def __add__(self, other: "DimCoeff") -> "DimCoeff":
        if (self.m2, self.M2) != (other.m2, other.M2):
            raise ValueError("inhomogeneous mass dimensions")
        return DimCoeff(self.ratio + other.ratio, self.m2, self.M2)

    def __sub__(self, other: "DimCoeff") -> "DimCoeff":
        return self + DimCoeff(-other.ratio, other.m2, other.M2)

    def __mul__(self, other: "DimCoeff") -> "DimCoeff":
        return DimCoeff(self.ratio * other.ratio, self.m2 + other.m2, self.M2 + other.M2)

    def __truediv__(self, other: "DimCoeff") -> "DimCoeff":
        return DimCoeff(self.ratio / other.ratio, self.m2 - other.m2, self.M2 - other.M2)

    def __pow__(self, k: int) -> "DimCoeff":
        return DimCoeff(self.ratio**k, self.m2 * k, self.M2 * k)

    @property
    def dimension(self) -> int:
        """Mass dimension in units of (mass)^2."""
        return self.m2 + self.M2

    def value_at(self, n0: Rational, z0: Rational) -> Fraction:
        """Exact value at M^2 = 1, m^2 = z0/4."""
        return self.ratio.eval_frac(n0, z0) * Fraction(z0, 4) ** self.m2

    def __str__(self):
        body = str(self.ratio)
        if ("+" in body[1:] or "-" in body[1:] or "/" in body) and (self.m2 or self.M2):
            body = f"({body})"
        for sym, k in (("m2", self.m2), ("M2", self.M2)):
            if k:
                body += f"*{sym}" + (f"^{k}" if k != 1 else "")
        return body

    @classmethod
    def parse(cls, text: str) -> "DimCoeff":
        atoms = {
            "n": cls(kernel.RAT_N),
            "z": cls(RAT_Z),
            "m2": cls(RAT_ONE, m2=1),
            "M2": cls(RAT_ONE, M2=1),
        }
        return parse_expr(text, atoms, lambda i: cls(rat(i)))


@dataclass(frozen=True)
class MasterRelation:
    """A linear relation among master integrals with a Gamma inhomogeneity.

    sum_i coeffs[i] * J(labels[i]) = rhs_multiplier * (mass^2)^rhs_exponent
    * prod Gamma(arg)^exp, with mass = M (standard form) or m (equal-mass).
    """

    labels: tuple[str, ...]
    coeffs: tuple[DimCoeff, ...]
    rhs_multiplier: Fraction
    rhs_gammas: tuple[tuple[ParamExpr, int], ...]
    rhs_mass: str
    rhs_exponent: ParamExpr

    def coeff(self, label: str) -> DimCoeff:
        return self.coeffs[self.labels.index(label)]

    def rhs_value(self, n0: Rational, prec: int) -> mpmath.mpf:
        """Numeric right-hand side at M^2 = m^2 = 1 units of the mass symbol."""
        with workdps(prec):
            total = to_mpf(self.rhs_multiplier)
            for arg, exp in self.rhs_gammas:
                total *= gamma(arg.at(n0), prec) ** exp
            return total

    def to_json(self) -> dict:
        gammas = []
        for arg, exp in self.rhs_gammas:
            gammas.extend([str(arg)] * exp)
        return {
            "coeffs": {lab: str(c) for lab, c in zip(self.labels, self.coeffs)},
            "rhs": {
                "multiplier": str(self.rhs_multiplier),
                "gammas": gammas,
                f"{self.rhs_mass}_exponent": str(self.rhs_exponent),
            },
        }

    @classmethod
    def from_json(cls, data: dict) -> "MasterRelation":
        labels = tuple(data["coeffs"].keys())
        coeffs = tuple(DimCoeff.parse(t) for t in data["coeffs"].values())
        rhs = data["rhs"]
        mass = "m2" if "m2_exponent" in rhs else "M2"
        gammas = _merge_gammas((hyper.parse_param(g), 1) for g in rhs["gammas"])
        return cls(
            labels,
            coeffs,
            Fraction(rhs["multiplier"]),
            gammas,
            mass,
            hyper.parse_param(rhs[f"{mass}_exponent"]),
        )


@lru_cache(maxsize=None)
def assemble_main() -> MasterRelation:
    """Restore mass dimensions of the discovered relation.

    (3n-8) J(1,1,1) + 4 m^2 J(1,2,1) + 2 M^2 J(1,1,2)
        = 2 (M^2)^(n-3) Gamma(n/2-1) Gamma(3-n) Gamma(2-n/2).
    """
    lambdas, mu = find_relation()
    l1, l2, l3 = (rat(p) for p in lambdas)
    # z M^2 = 4 m^2 converts the z-linear coefficient to a mass coefficient.
    c121 = 4 * (l2 / RAT_Z)
    if not c121.is_polynomial:
        raise RelationCountMismatch("J(1,2,1) coefficient is not proportional to z")
    norm = rat(kernel.N) / 2 - 1
    mult = (rat(mu) / norm).as_fraction()
    return MasterRelation(
        labels=tuple(m.label for m in MASTERS),
        coeffs=(DimCoeff(l1), DimCoeff(c121, m2=1), DimCoeff(l3, M2=1)),
        rhs_multiplier=mult,
        rhs_gammas=A_PREFACTOR.factors,
        rhs_mass="M2",
        rhs_exponent=param(-3, 1),
    )


def equal_mass_specialize(rel: MasterRelation) -> MasterRelation:
    """Set m^2 = M^2 and merge the symmetric masters J(1,2,1) = J(1,1,2).

    Swapping the two massive lines at equal masses exchanges beta and alpha,
    so the two dotted masters coincide and their coefficients add.
    """
    if rel.rhs_mass == "m2":
        return rel
    c111 = rel.coeff("J(1,1,1)")
    c121 = rel.coeff("J(1,2,1)")
    c112 = rel.coeff("J(1,1,2)")
    merged = DimCoeff(c121.ratio, m2=c121.m2 + c121.M2) + DimCoeff(
        c112.ratio, m2=c112.m2 + c112.M2
    )
    return MasterRelation(
        labels=("J(1,1,1)", "J(1,1,2)"),
        coeffs=(c111, merged),
        rhs_multiplier=rel.rhs_multiplier,
        rhs_gammas=rel.rhs_gammas,
        rhs_mass="m2",
        rhs_exponent=rel.rhs_exponent,
    )


def dimension_audit(rel: MasterRelation) -> ParamExpr:
    """Check that every term carries the same mass dimension; returns it."""
    dims = set()
    for lab, c in zip(rel.labels, rel.coeffs):
        total = sum(int(t) for t in lab[2:-1].split(","))
        dims.add(param(c.dimension - total, 1))
    dims.add(rel.rhs_exponent)
    if len(dims) != 1:
        raise DomainError(f"dimension audit failed: {sorted(str(d) for d in dims)}")
    return dims.pop()


def eval_J(idx: SunsetIndices, eps: Rational, z0: Rational, prec: int = 50) -> mpmath.mpf:
    """Numeric value of J(sigma, beta, alpha) in units M^2 = 1.

    eps is the dimensional regulator, n = 4 - 2 eps; requires 0 <= z0 < 1
    and a regulator avoiding all Gamma and lower-parameter poles.
    """
    z0 = Fraction(z0)
    if not 0 <= z0 < 1:
        raise DomainError("outside convergence domain")
    n0 = 4 - 2 * Fraction(eps)
    return build_representation(idx).eval_mpf(z0, n0, prec)


def verify_main_numeric(eps: Rational, z0: Rational, prec: int = 50) -> mpmath.mpf:
    """Relative residual of the master relation at a rational point."""
    rel = assemble_main()
    n0 = 4 - 2 * Fraction(eps)
    z0 = Fraction(z0)
    with workdps(prec):
        lhs = mpmath.mpf(0)
        for lab, c in zip(rel.labels, rel.coeffs):
            cval = c.value_at(n0, z0)
            if not cval:
                continue
            s, b, a = (int(t) for t in lab[2:-1].split(","))
            lhs += to_mpf(cval) * eval_J(SunsetIndices(s, b, a), eps, z0, prec)
        rhs = rel.rhs_value(n0, prec)
        return abs(lhs - rhs) / abs(rhs)


def x2_lower_parameter_check(corrected: bool) -> RatFunc:
    """Terminating-series probe of the dotted-m master's 2F1 lower parameter.

    Evaluates the reduced-coordinate identity at n = 4 with z symbolic,
    using the explicit coordinate functions with lower parameter b-1
    (corrected=True) or the b that a literal reading would give.  The
    identity value is n - 2 = 2 exactly in the corrected form and acquires
    a spurious -z/2 otherwise.
    """
    n0 = Fraction(4)
    a = param(3, -1).at(n0)  # -1
    b = param(0, HALF).at(n0)  # 2
    f_x1 = PFQ((param(HALF), param(a)), (param(b),))
    x1 = terminating_series_ratfunc(f_x1, n0)
    lower = b - 1 if corrected else b
    f_x2 = PFQ((param(HALF), param(a)), (param(lower),))
    x2 = rat(a - 1) / RAT_Z * (terminating_series_ratfunc(f_x2, n0) - 1)
    f_x3 = PFQ((param(HALF), param(a + 1)), (param(b),))
    x3 = rat(a) * terminating_series_ratfunc(f_x3, n0)
    lam1 = 3 * n0 - 8
    return rat(lam1) * x1 + RAT_Z * x2 + 2 * x3
