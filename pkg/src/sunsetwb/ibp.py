"""Integration-by-parts identities and Laporta reduction for the sunset family.

Family indices I(a1, a2, a3, a4, a5) carry powers of the propagators
D1 = (p-k1)^2, D2 = (k1-k2)^2 + M^2, D3 = k2^2 + m^2 and of the irreducible
numerators N1 = k1^2, N2 = k2.p (a4, a5 <= 0), with p^2 = -m^2 on shell and
m^2 = z/4, M^2 = 1.  J(sigma, beta, alpha) = I(sigma, alpha, beta, 0, 0).

Identities come from 0 = Int d/dl . (v x integrand) for loop momenta l and
vectors v in {k1, k2, p}; their coefficients are polynomials in the indices,
n and z -- never Gamma functions, which is why the Gamma-inhomogeneous
master relation cannot arise here and must be injected afterwards.
A seed integral is irreducible (a master) exactly when ordered Gaussian
elimination of all generated identities never solves for it.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Union

import mpmath
from sympy.polys.domains import QQ
from sympy.polys.rings import ring

from . import kernel, sunset
from .errors import DomainError, IBPInconsistency, NotReducible, ParseError
from .kernel import RAT_ONE, RAT_ZERO, RatFunc, gamma, poly_from_terms, rat, to_mpf, workdps
from .sunset import MasterRelation, SunsetIndices

Rational = Union[int, Fraction]

_RA = ring("a1,a2,a3,a4,a5,n,z", QQ)
_A_RING = _RA[0]
_A_GENS = _RA[1:6]
_A_N = _RA[6]
_A_Z = _RA[7]

MOMENTA = ("k1", "k2", "p")
LOOP_MOMENTA = ("k1", "k2")

_PROPAGATORS = ("D1", "D2", "D3", "N1", "N2")
_BASIS_SLOT = {name: i for i, name in enumerate(_PROPAGATORS)}

_HALF = Fraction(1, 2)

#: Scalar products over {D_i, N_i, m^2, M^2}; p^2 = -m^2 is on-shell.
_SP = {
    ("k1", "k1"): {"N1": Fraction(1)},
    ("k2", "k2"): {"D3": Fraction(1), "m2": Fraction(-1)},
    ("p", "p"): {"m2": Fraction(-1)},
    ("k1", "k2"): {"N1": _HALF, "D3": _HALF, "m2": -_HALF, "M2": _HALF, "D2": -_HALF},
    ("k1", "p"): {"N1": _HALF, "D1": -_HALF, "m2": -_HALF},
    ("k2", "p"): {"N2": Fraction(1)},
}

#: Gradients d(object)/d(loop momentum) as momentum-coefficient maps.
_GRAD = {
    ("D1", "k1"): {"k1": 2, "p": -2},
    ("D2", "k1"): {"k1": 2, "k2": -2},
    ("D2", "k2"): {"k1": -2, "k2": 2},
    ("D3", "k2"): {"k2": 2},
    ("N1", "k1"): {"k1": 2},
    ("N2", "k2"): {"p": 1},
}


def sp_map(a: str, b: Optional[str] = None) -> dict[str, Fraction]:
    """Scalar product a.b as a linear form over {D1, D2, D3, N1, N2, m2, M2}."""
    if b is None:
        a, b = a.split(".")
    key = (a, b) if (a, b) in _SP else (b, a)
    if key not in _SP:
        raise DomainError(f"unknown scalar product {a}.{b}")
    return dict(_SP[key])


class FamilyIndex(NamedTuple):
    """Index vector of the five-propagator sunset family."""

    a1: int
    a2: int
    a3: int
    a4: int
    a5: int

    @property
    def is_zero_integral(self) -> bool:
        """Scaleless in dimensional regularization unless a2 > 0 and a3 > 0."""
        return self.a2 <= 0 or self.a3 <= 0

    @property
    def sector_mask(self) -> int:
        return sum(1 << i for i, a in enumerate(self[:3]) if a > 0)

    @property
    def dots(self) -> int:
        return sum(a - 1 for a in self[:3] if a > 1)

    @property
    def numerators(self) -> int:
        return sum(-a for a in self if a < 0)

    @property
    def order_key(self):
        # Numerators weigh more than dots so elimination solves numerator
        # integrals first, leaving the dotted corner integrals as masters.
        return (self.sector_mask, self.numerators, self.dots, tuple(self))

    @property
    def is_gamma_expressible(self) -> bool:
        """a1 <= 0 factorizes into one-loop tadpoles (pure Gamma products)."""
        return self.a1 <= 0

    @property
    def key(self) -> str:
        return ",".join(str(a) for a in self)

    @classmethod
    def parse(cls, text: str) -> "FamilyIndex":
        parts = text.split(",")
        if len(parts) != 5:
            raise ParseError("expected five comma-separated indices", text, 0)
        try:
            idx = cls(*(int(p.strip()) for p in parts))
        except ValueError:
            raise ParseError("indices must be integers", text, 0) from None
        if idx.a4 > 0 or idx.a5 > 0:
            raise ParseError("numerator indices a4, a5 must be <= 0", text, 0)
        return idx

    def to_sunset(self) -> SunsetIndices:
        return SunsetIndices(sigma=self.a1, beta=self.a3, alpha=self.a2)

    @classmethod
    def from_sunset(cls, idx: SunsetIndices) -> "FamilyIndex":
        return cls(idx.sigma, idx.alpha, idx.beta, 0, 0)


@dataclass(frozen=True)
class GammaModule:
    """Pseudo-master carrying the Gamma-product inhomogeneity.

    Represents (M^2)^(n-3) Gamma(n/2-1) Gamma(3-n) Gamma(2-n/2) once the
    external master relation is injected into a reduction table.
    """

    factors: tuple = sunset.A_PREFACTOR.factors

    @property
    def key(self) -> str:
        return "gamma_module"

    @property
    def is_gamma_expressible(self) -> bool:
        return True

    def eval_mpf(self, eps: Rational, z0: Rational, prec: int) -> mpmath.mpf:
        n0 = 4 - 2 * Fraction(eps)
        with workdps(prec):
            total = mpmath.mpf(1)
            for arg, exp in self.factors:
                total *= gamma(arg.at(n0), prec) ** exp
            return total


Master = Union[FamilyIndex, GammaModule]

_TEMPLATE_UNSHIFTED = (0, 0, 0, 0, 0)


@lru_cache(maxsize=None)
def ibp_template(l: str, v: str) -> tuple[tuple[tuple[int, ...], object], ...]:
    """Symbolic identity 0 = Int d/dl . (v integrand) as (shift, coefficient).

    Coefficients are polynomials in (a1..a5, n, z); shifts are relative index
    displacements (dividing by T_e shifts a_e by +1, multiplying by -1).
    """
    if l not in LOOP_MOMENTA or v not in MOMENTA:
        raise DomainError(f"invalid IBP momenta ({l}, {v})")
    terms: dict[tuple[int, ...], object] = {}

    def add(shift, poly):
        terms[shift] = terms.get(shift, _A_RING.zero) + poly

    if l == v:
        add(_TEMPLATE_UNSHIFTED, _A_N)
    for name, slot in _BASIS_SLOT.items():
        grad = _GRAD.get((name, l))
        if not grad:
            continue
        form: dict[str, Fraction] = {}
        for mom, c in grad.items():
            for bk, q in sp_map(v, mom).items():
                form[bk] = form.get(bk, Fraction(0)) + c * q
        a_e = _A_GENS[slot]
        for bk, q in form.items():
            if not q:
                continue
            coeff = -a_e * _A_RING.ground_new(QQ(q.numerator, q.denominator))
            if bk == name:
                add(_TEMPLATE_UNSHIFTED, coeff)
                continue
            shift = [0] * 5
            shift[slot] += 1
            if bk == "m2":
                add(tuple(shift), coeff * _A_Z.quo_ground(QQ(4)))
            elif bk == "M2":
                add(tuple(shift), coeff)
            else:
                shift[_BASIS_SLOT[bk]] -= 1
                add(tuple(shift), coeff)
    ordered = tuple(sorted(((s, p) for s, p in terms.items() if p), key=lambda t: t[0]))
    return ordered


@dataclass(frozen=True)
class IBPIdentity:
    """One seeded identity: template terms plus the seed they apply to."""

    l: str
    v: str
    seed: FamilyIndex
    template: tuple = field(repr=False)

    def terms(self) -> list[tuple[FamilyIndex, RatFunc]]:
        """Instantiated (integral, coefficient) pairs; zero coefficients dropped."""
        out: dict[FamilyIndex, RatFunc] = {}
        seed = self.seed
        for shift, poly in self.template:
            idx = FamilyIndex(*(s + d for s, d in zip(seed, shift)))
            acc: dict[tuple[int, int], Fraction] = {}
            for exps, c in poly.terms():
                scale = kernel._frac(c)
                for val, e in zip(seed, exps[:5]):
                    if e:
                        scale *= Fraction(val) ** e
                if not scale:
                    continue
                key = (exps[5], exps[6])
                acc[key] = acc.get(key, Fraction(0)) + scale
            coeff = rat(poly_from_terms(acc))
            if coeff:
                out[idx] = out.get(idx, RAT_ZERO) + coeff
        return sorted(
            ((i, c) for i, c in out.items() if c), key=lambda t: t[0].order_key
        )


def gen_ibp(l: str, v: str, seed: FamilyIndex) -> IBPIdentity:
    """Build the identity from differentiating v x integrand with respect to l."""
    return IBPIdentity(l, v, seed, ibp_template(l, v))


def _seed_indices(max_dots: int, max_nums: int) -> list[FamilyIndex]:
    """Seeds over the two non-vanishing sectors within the given bounds."""
    seeds = []
    for a1_base in (1, 0):
        lines = 3 if a1_base else 2
        for dots in range(max_dots + 1):
            for split in _compositions(dots, lines):
                if a1_base:
                    a1, a2, a3 = 1 + split[0], 1 + split[1], 1 + split[2]
                else:
                    a1, (a2, a3) = 0, (1 + split[0], 1 + split[1])
                for nums in range(max_nums + 1):
                    for a4 in range(-nums, 1):
                        a5 = -(nums + a4)
                        seeds.append(FamilyIndex(a1, a2, a3, a4, -abs(a5)))
    return sorted(set(seeds), key=lambda i: i.order_key)


def _compositions(total: int, parts: int) -> list[tuple[int, ...]]:
    if parts == 1:
        return [(total,)]
    out = []
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            out.append((first,) + rest)
    return out


@dataclass
class ReductionTable:
    """Reductions of family integrals onto the master set.

    entries map reducible integrals to master combinations; masters are the
    integrals no generated identity could solve for.
    """

    masters: tuple[Master, ...]
    entries: dict[FamilyIndex, tuple[tuple[Master, RatFunc], ...]]
    seed_dots: int = 2
    seed_nums: int = 1

    def reduce(self, idx: FamilyIndex) -> list[tuple[Master, RatFunc]]:
        if idx.is_zero_integral:
            return []
        if idx in self.entries:
            return list(self.entries[idx])
        if any(idx == m for m in self.masters if isinstance(m, FamilyIndex)):
            return [(idx, RAT_ONE)]
        raise NotReducible(f"I({idx.key}) is outside the table closure")

    @property
    def nontrivial_masters(self) -> list[FamilyIndex]:
        return [
            m
            for m in self.masters
            if isinstance(m, FamilyIndex) and not m.is_gamma_expressible
        ]

    def to_json(self) -> dict:
        data = {
            "family": "sunset012",
            "variables": ["n", "z"],
            "seed_bounds": {"dots": self.seed_dots, "numerators": self.seed_nums},
            "masters": [m.key for m in self.masters],
            "entries": {
                idx.key: [[m.key, str(c)] for m, c in combo]
                for idx, combo in sorted(self.entries.items(), key=lambda t: t[0].order_key)
            },
        }
        if any(isinstance(m, GammaModule) for m in self.masters):
            gm = next(m for m in self.masters if isinstance(m, GammaModule))
            data["gamma_module"] = {
                "gammas": [[str(a), e] for a, e in gm.factors],
                "M2_exponent": "n-3",
            }
        return data

    @classmethod
    def from_json(cls, data: dict) -> "ReductionTable":
        gm = GammaModule()

        def parse_master(key: str) -> Master:
            return gm if key == "gamma_module" else FamilyIndex.parse(key)

        masters = tuple(parse_master(k) for k in data["masters"])
        entries = {
            FamilyIndex.parse(k): tuple(
                (parse_master(mk), kernel.parse_ratfunc(c)) for mk, c in combo
            )
            for k, combo in data["entries"].items()
        }
        bounds = data.get("seed_bounds", {})
        return cls(masters, entries, bounds.get("dots", 2), bounds.get("numerators", 1))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path) -> "ReductionTable":
        return cls.from_json(json.loads(Path(path).read_text()))


def _order_masters(masters) -> tuple[Master, ...]:
    indices = sorted((m for m in masters if isinstance(m, FamilyIndex)),
                     key=lambda m: m.order_key)
    out: list[Master] = [m for m in indices if m.is_gamma_expressible]
    if any(isinstance(m, GammaModule) for m in masters):
        out.append(GammaModule())
    out.extend(m for m in indices if not m.is_gamma_expressible)
    return tuple(out)


def laporta(seed_dots: int = 2, seed_nums: int = 1, workers: int = 1) -> ReductionTable:
    """Generate identities for all seeds within bounds and eliminate.

    Ordered Gaussian substitution: identities are processed from structurally
    simplest upward; each contributes at most one rule, solving for its
    highest surviving integral.  Stored rules are kept fully substituted, so
    the result is canonical regardless of worker count.
    """
    if seed_dots < 2 or seed_nums < 1:
        raise DomainError("seed bounds below the minimum (dots >= 2, numerators >= 1)")
    seeds = _seed_indices(seed_dots, seed_nums)

    def identities_for(seed: FamilyIndex) -> list[IBPIdentity]:
        return [gen_ibp(l, v, seed) for l in LOOP_MOMENTA for v in MOMENTA]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            groups = list(pool.map(identities_for, seeds))
    else:
        groups = [identities_for(seed) for seed in seeds]
    idents = [ident for group in groups for ident in group]

    prepared = []
    for ident in idents:
        terms = [(i, c) for i, c in ident.terms() if not i.is_zero_integral]
        if terms:
            top = max(i for i, _ in terms)
            prepared.append((top.order_key, len(terms), ident.seed, ident.l, ident.v, terms))
    prepared.sort(key=lambda t: t[:5])

    rules: dict[FamilyIndex, dict[FamilyIndex, RatFunc]] = {}

    def substituted(terms) -> dict[FamilyIndex, RatFunc]:
        combo: dict[FamilyIndex, RatFunc] = {}

        def add(idx, c):
            acc = combo.get(idx, RAT_ZERO) + c
            if acc:
                combo[idx] = acc
            else:
                combo.pop(idx, None)

        for idx, c in terms:
            tail = rules.get(idx)
            if tail is None:
                add(idx, c)
            else:
                for m, cm in tail.items():
                    add(m, c * cm)
        return combo

    for _, _, _, _, _, terms in prepared:
        combo = substituted(terms)
        if not combo:
            continue
        pivot = max(combo, key=lambda i: i.order_key)
        pcoeff = combo.pop(pivot)
        tail = {i: -c / pcoeff for i, c in combo.items()}
        for other in rules.values():
            c = other.pop(pivot, None)
            if c is not None:
                for m, cm in tail.items():
                    acc = other.get(m, RAT_ZERO) + c * cm
                    if acc:
                        other[m] = acc
                    else:
                        other.pop(m, None)
        rules[pivot] = tail

    # Masters are the irreducible integrals reached from the seeds.
    masters: set[FamilyIndex] = set()
    for seed in seeds:
        if seed.is_zero_integral:
            continue
        for idx in rules.get(seed, {seed: RAT_ONE}):
            masters.add(idx)
    # A closed table may only reference masters; entries whose tails still
    # contain unreduced boundary integrals are dropped.
    entries = {}
    for pivot, tail in sorted(rules.items(), key=lambda t: t[0].order_key):
        if all(i in masters for i in tail):
            entries[pivot] = tuple(
                sorted(tail.items(), key=lambda t: t[0].order_key)
            )
    for m in masters:
        if m in rules:
            raise IBPInconsistency(f"IBP inconsistency: master I({m.key}) has a rule")
    return ReductionTable(_order_masters(masters), entries, seed_dots, seed_nums)


def apply_external_relation(table: ReductionTable, rel: MasterRelation) -> ReductionTable:
    """Eliminate J(1,1,2) = I(1,2,1,0,0) through the Gamma-inhomogeneous relation.

    The relation's right-hand side enters as a Gamma-module pseudo-master;
    applying the map twice is the identity.
    """
    target = FamilyIndex.from_sunset(SunsetIndices(1, 1, 2))
    if not any(isinstance(m, FamilyIndex) and m == target for m in table.masters):
        return table
    labels = ("J(1,1,1)", "J(1,2,1)", "J(1,1,2)")
    if tuple(rel.labels) != labels:
        raise DomainError("relation does not cover the three sunset masters")

    def as_ratfunc(c: sunset.DimCoeff) -> RatFunc:
        return c.ratio * (kernel.RAT_Z / 4) ** c.m2

    lam = {lab: as_ratfunc(rel.coeff(lab)) for lab in labels}
    gm = GammaModule(rel.rhs_gammas)
    pivot_coeff = lam["J(1,1,2)"]
    tail: dict[Master, RatFunc] = {
        gm: rat(rel.rhs_multiplier) / pivot_coeff,
        FamilyIndex.from_sunset(SunsetIndices(1, 1, 1)): -lam["J(1,1,1)"] / pivot_coeff,
        FamilyIndex.from_sunset(SunsetIndices(1, 2, 1)): -lam["J(1,2,1)"] / pivot_coeff,
    }

    def rewrite(combo) -> tuple[tuple[Master, RatFunc], ...]:
        out: dict[Master, RatFunc] = {}
        for m, c in combo:
            if isinstance(m, FamilyIndex) and m == target:
                for m2, c2 in tail.items():
                    acc = out.get(m2, RAT_ZERO) + c * c2
                    if acc:
                        out[m2] = acc
                    else:
                        out.pop(m2, None)
            else:
                acc = out.get(m, RAT_ZERO) + c
                if acc:
                    out[m] = acc
                else:
                    out.pop(m, None)
        return tuple(sorted(out.items(), key=_master_sort_key))

    masters = _order_masters(
        [m for m in table.masters if not (isinstance(m, FamilyIndex) and m == target)]
        + [gm]
    )
    entries = {idx: rewrite(combo) for idx, combo in table.entries.items()}
    entries[target] = tuple(sorted(tail.items(), key=_master_sort_key))
    return ReductionTable(masters, entries, table.seed_dots, table.seed_nums)


def _master_sort_key(item):
    m = item[0]
    if isinstance(m, GammaModule):
        return (0, ())
    return (1, m.order_key)


def eval_I(idx: FamilyIndex, eps: Rational, z0: Rational, prec: int = 50) -> mpmath.mpf:
    """Direct numeric value of a pure-denominator family integral.

    a1 = 0 factorizes into one-loop tadpoles; a1 >= 1 goes through the
    two-term hypergeometric representation.  Numerator indices have no
    direct evaluation and must be reduced first.
    """
    if idx.a4 or idx.a5 or idx.a1 < 0:
        raise DomainError("direct evaluation needs a4 = a5 = 0 and a1 >= 0")
    if idx.is_zero_integral:
        return mpmath.mpf(0)
    n0 = 4 - 2 * Fraction(eps)
    if idx.a1 == 0:
        with workdps(prec):

            def tadpole(a: int, mass2: Fraction) -> mpmath.mpf:
                num = gamma(Fraction(a) - n0 / 2, prec)
                den = gamma(Fraction(a), prec)
                return num / den * to_mpf(mass2) ** (to_mpf(n0) / 2 - a)

            return tadpole(idx.a2, Fraction(1)) * tadpole(idx.a3, Fraction(z0) / 4)
    return sunset.eval_J(idx.to_sunset(), eps, z0, prec)


def eval_master(m: Master, eps: Rational, z0: Rational, prec: int = 50) -> mpmath.mpf:
    if isinstance(m, GammaModule):
        return m.eval_mpf(eps, z0, prec)
    return eval_I(m, eps, z0, prec)


def cross_check(
    table: ReductionTable,
    target: FamilyIndex,
    eps: Rational,
    z0: Rational,
    prec: int = 40,
) -> mpmath.mpf:
    """Relative residual of the table reduction against direct evaluation."""
    combo = table.reduce(target)
    n0 = 4 - 2 * Fraction(eps)
    with workdps(prec):
        direct = eval_I(target, eps, z0, prec)
        total = mpmath.mpf(0)
        for m, c in combo:
            total += to_mpf(c.eval_frac(n0, Fraction(z0))) * eval_master(m, eps, z0, prec)
        return abs(direct - total) / abs(direct)


def identity_residual(
    ident: IBPIdentity,
    table: ReductionTable,
    eps: Rational,
    z0: Rational,
    prec: int = 40,
) -> mpmath.mpf:
    """Numeric residual of one identity, relative to its largest term.

    Pure-denominator integrals are evaluated directly from the series
    representation; numerator-carrying ones are first sent through the
    reduction table.
    """
    n0 = 4 - 2 * Fraction(eps)
    with workdps(prec):
        total = mpmath.mpf(0)
        biggest = mpmath.mpf(0)
        for idx, c in ident.terms():
            if idx.is_zero_integral:
                continue
            cval = to_mpf(c.eval_frac(n0, Fraction(z0)))
            if not idx.a4 and not idx.a5 and idx.a1 >= 0:
                val = eval_I(idx, eps, z0, prec)
            else:
                val = mpmath.mpf(0)
                for m, cm in table.reduce(idx):
                    val += to_mpf(cm.eval_frac(n0, Fraction(z0))) * eval_master(
                        m, eps, z0, prec
                    )
            term = cval * val
            total += term
            biggest = max(biggest, abs(term))
        return abs(total) / biggest if biggest else abs(total)
