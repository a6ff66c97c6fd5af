"""Kernel tests: rational-function canonical form, Gamma, Pochhammer."""

import random
from fractions import Fraction as F

import mpmath
import pytest

from sunsetwb.errors import GammaPole, ParseError, PoleError, ZeroDivisor
from sunsetwb.kernel import (
    N,
    RAT_ONE,
    RAT_ZERO,
    Z,
    RatFunc,
    as_poly,
    gamma,
    gamma_shift_ratio,
    mpf_str,
    nullspace,
    parse_fraction,
    parse_ratfunc,
    pochhammer,
    poly_eval,
    poly_from_terms,
    rat,
    ratfunc_arith,
    ratfunc_eval,
    workdps,
)


def rand_poly(rng, max_deg=2, nonzero=False):
    terms = {}
    for en in range(max_deg + 1):
        for ez in range(max_deg + 1 - en):
            if rng.random() < 0.6:
                c = rng.randint(-5, 5)
                if c:
                    terms[(en, ez)] = F(c)
    p = poly_from_terms(terms)
    if nonzero and not p:
        return as_poly(1)
    return p


def rand_ratfunc(rng):
    return RatFunc(rand_poly(rng), rand_poly(rng, nonzero=True))


class TestRatFuncCanonicalForm:
    def test_gcd_cancellation(self):
        assert RatFunc(N**2 - 4, N - 2) == rat(N) + 2
        assert RatFunc(Z**2 - Z, Z) == rat(Z) - 1

    def test_monic_denominator(self):
        f = RatFunc(2 * N + 4, 3 * Z - 6)
        assert f.den == Z - 2
        assert str(f) == "(2/3*n+4/3)/(z-2)"

    def test_additive_inverse(self):
        rng = random.Random(7)
        for _ in range(20):
            a = rand_ratfunc(rng)
            assert a + (-a) == RAT_ZERO
            assert not (a - a)

    def test_zero_divisor(self):
        with pytest.raises(ZeroDivisor, match="zero divisor"):
            rat(1) / RAT_ZERO
        with pytest.raises(ZeroDivisor):
            ratfunc_arith(rat(N), RAT_ZERO, "div")

    def test_field_axioms_random(self):
        rng = random.Random(11)
        for _ in range(30):
            a, b, c = (rand_ratfunc(rng) for _ in range(3))
            assert (a + b) + c == a + (b + c)
            assert a * (b + c) == a * b + a * c
            if b:
                assert (a / b) * b == a

    def test_arith_dispatch(self):
        a, b = rat(N), rat(Z)
        assert ratfunc_arith(a, b, "add") == a + b
        assert ratfunc_arith(a, b, "sub") == a - b
        assert ratfunc_arith(a, b, "mul") == a * b
        assert ratfunc_arith(a, b, "div") == a / b

    def test_hashable_and_pow(self):
        s = {rat(N) ** 2, RatFunc(N * N), rat(Z) ** -1, RatFunc(1, Z)}
        assert len(s) == 2


class TestEvaluation:
    def test_spec_points(self):
        f = rat(3 * N - 8)
        assert ratfunc_eval(f, 4, 0) == 4
        assert ratfunc_eval(f, F(7, 2), 0) == F(5, 2)

    def test_pole(self):
        with pytest.raises(PoleError, match="pole of rational function"):
            RatFunc(1, N - 4).eval_frac(4, 1)

    def test_eval_matches_unnormalized(self):
        # evaluating the canonical form equals evaluating raw num/den
        rng = random.Random(3)
        checked = 0
        while checked < 100:
            num, den = rand_poly(rng), rand_poly(rng, nonzero=True)
            n0, z0 = F(rng.randint(-9, 9), 4), F(rng.randint(-9, 9), 4)
            if poly_eval(den, n0, z0) == 0:
                continue
            f = RatFunc(num, den)
            if poly_eval(f.den, n0, z0) == 0:
                continue
            assert f.eval_frac(n0, z0) == poly_eval(num, n0, z0) / poly_eval(den, n0, z0)
            checked += 1

    def test_eval_mpf(self):
        with workdps(30):
            v = RatFunc(N + 1, Z + 2).eval_mpf(mpmath.mpf(3), mpmath.mpf(2))
            assert abs(v - 1) < mpmath.mpf(10) ** -25


class TestGamma:
    def test_half_integer_values(self):
        with workdps(40):
            sqrt_pi = mpmath.sqrt(mpmath.pi)
            assert abs(gamma(F(1, 2), 40) - sqrt_pi) < mpmath.mpf(10) ** -38
            assert gamma(5, 40) == 24
            assert abs(gamma(F(-1, 2), 40) + 2 * sqrt_pi) < mpmath.mpf(10) ** -37

    def test_poles(self):
        for x in (0, -1, -2, F(-7)):
            with pytest.raises(GammaPole, match="gamma pole"):
                gamma(x, 30)

    def _samples(self, rng, count, exclude_all_ints):
        out = []
        while len(out) < count:
            x = F(rng.randint(-4999, 4999), 1000)
            lo = -5 if exclude_all_ints else -5
            hi = 6 if exclude_all_ints else 1
            if any(abs(x - k) < F(1, 1000) for k in range(lo, hi)):
                continue
            out.append(x)
        return out

    def test_recurrence(self):
        prec = 30
        rng = random.Random(17)
        with workdps(prec):
            tol = mpmath.mpf(10) ** (-(prec - 2))
            for x in self._samples(rng, 50, exclude_all_ints=False):
                lhs = gamma(x + 1, prec)
                rhs = x.numerator * gamma(x, prec) / x.denominator
                assert abs(lhs - rhs) <= tol * abs(lhs), x

    def test_reflection(self):
        prec = 30
        rng = random.Random(19)
        with workdps(prec):
            tol = mpmath.mpf(10) ** (-(prec - 2))
            for x in self._samples(rng, 50, exclude_all_ints=True):
                xm = mpmath.mpf(x.numerator) / x.denominator
                val = gamma(x, prec) * gamma(1 - x, prec) * mpmath.sinpi(xm) / mpmath.pi
                assert abs(val - 1) <= tol, x


class TestPochhammer:
    def test_values(self):
        assert pochhammer(F(1, 2), 3) == F(15, 8)
        assert pochhammer(F(-1), 2) == 0
        assert pochhammer(F(22, 7), 0) == 1

    def test_poly_argument(self):
        p = pochhammer(as_poly(3) - N, 2)  # (3-n)(4-n)
        assert p == (3 - N) * (4 - N)

    def test_negative_k_rejected(self):
        with pytest.raises(ValueError):
            pochhammer(F(1), -1)

    def test_gamma_shift_ratio(self):
        assert gamma_shift_ratio(as_poly(3) - N, 1) == rat(3 - N)
        half_n = poly_from_terms({(1, 0): F(1, 2)})
        # Gamma(n/2 - 1)/Gamma(n/2) = 1/(n/2 - 1)
        assert gamma_shift_ratio(half_n, -1) == RAT_ONE / rat(half_n - 1)


class TestNullspace:
    def test_one_dimensional(self):
        rows = [[rat(1), rat(N)], [rat(2), rat(2 * N)]]
        basis = nullspace(rows)
        assert len(basis) == 1
        v = basis[0]
        assert rows[0][0] * v[0] + rows[0][1] * v[1] == RAT_ZERO

    def test_full_rank(self):
        assert nullspace([[rat(1), RAT_ZERO], [RAT_ZERO, rat(1)]]) == []


class TestTextForms:
    def test_canonical_strings(self):
        assert str(RatFunc(3 * N - 8, N - 2)) == "(3*n-8)/(n-2)"
        assert str(rat(0)) == "0"
        assert str(rat(N) ** 2 * rat(Z) - rat(Z) ** 2) == "n^2*z-z^2"

    def test_parse_round_trip(self):
        rng = random.Random(23)
        for _ in range(25):
            f = rand_ratfunc(rng)
            assert parse_ratfunc(str(f)) == f

    def test_parse_spec_forms(self):
        assert parse_ratfunc("(3*n-8)/(n-2)") == RatFunc(3 * N - 8, N - 2)
        assert parse_ratfunc("2-n/2") == 2 - rat(N) / 2
        assert parse_ratfunc("(n-1)/2") == (rat(N) - 1) / 2
        assert parse_ratfunc("n^2") == rat(N) ** 2

    def test_parse_errors_carry_position(self):
        with pytest.raises(ParseError) as err:
            parse_ratfunc("3*n + q")
        assert err.value.pos == 6
        assert "^" in err.value.caret_diagnostic()

    def test_fraction_literals(self):
        assert parse_fraction("3/10") == F(3, 10)
        assert parse_fraction("-2") == -2
        for bad in ("0.5", "1e-3", "a/b", "1/2/3"):
            with pytest.raises(ParseError):
                parse_fraction(bad)
