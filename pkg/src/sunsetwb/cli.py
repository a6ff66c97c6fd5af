"""Command-line front end.

Command groups: ``sunset`` (representation, relation, numeric verification),
``hyper`` (series evaluation, differential reduction, basis counting) and
``ibp`` (Laporta reduction, master listing, cross-checks).

Exit codes: 0 success, 1 verification failure, 2 usage or domain error,
3 internal contradiction with the expected reduction structure.

Numeric inputs are strictly rational ("1/4", "3/10"); decimals are rejected
so runs are exactly reproducible.  The default precision is 50 digits,
overridable with SUNSETWB_PRECISION or --prec.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import mpmath

from . import hyper, ibp, kernel, sunset
from .errors import ContradictionError, DomainError, ParseError, SunsetwbError

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_CONTRADICTION = 3


def default_precision() -> int:
    raw = os.environ.get("SUNSETWB_PRECISION", "50")
    try:
        prec = int(raw)
    except ValueError:
        raise DomainError(f"SUNSETWB_PRECISION must be an integer, got {raw!r}")
    if prec < 10:
        raise DomainError("precision must be at least 10 digits")
    return prec


def _prec(args) -> int:
    prec = args.prec if args.prec is not None else default_precision()
    if prec < 10:
        raise DomainError("precision must be at least 10 digits")
    return prec


def _bound(prec: int) -> mpmath.mpf:
    with kernel.workdps(prec):
        return mpmath.mpf(10) ** (-(prec - 10))


def _emit(args, payload: dict, text: str) -> None:
    print(json.dumps(payload, indent=1) if args.json else text)


# -- sunset ---------------------------------------------------------------------


def cmd_sunset_repr(args) -> int:
    idx = sunset.SunsetIndices(args.sigma, args.beta, args.alpha)
    combo = sunset.build_representation(idx)
    collapsed = sunset.collapse(combo)
    if args.json:
        print(
            json.dumps(
                {
                    "indices": [idx.sigma, idx.beta, idx.alpha],
                    "representation": combo.to_json(),
                    "collapsed": collapsed.to_json(),
                },
                indent=1,
            )
        )
        return EXIT_OK
    print(f"{idx.label} =")
    for i, (gp, mult, f) in enumerate(combo.terms, 1):
        print(f"  term {i}: {gp} * ({mult}) * {f}")
    print("collapsed:")
    for i, (gp, mult, f) in enumerate(collapsed.terms, 1):
        print(f"  term {i}: {gp} * ({mult}) * {f}")
    return EXIT_OK


def cmd_sunset_relation(args) -> int:
    lambdas, mu = sunset.find_relation()
    rel = sunset.assemble_main()
    equal = sunset.equal_mass_specialize(rel)
    chosen = equal if args.equal_mass else rel
    if args.json:
        print(json.dumps(chosen.to_json(), indent=1))
        return EXIT_OK
    lam = ", ".join(kernel.poly_str(p) for p in lambdas)
    print(f"reduced-coordinate relation: lambda = ({lam}), mu = {kernel.poly_str(mu)}")

    def wrap(c) -> str:
        text = str(c)
        return f"({text})" if any(s in text[1:] for s in "+-") else text

    for r in ([rel, equal] if not args.equal_mass else [equal]):
        lhs = " + ".join(f"{wrap(c)}*{lab}" for lab, c in zip(r.labels, r.coeffs))
        gammas = "*".join(
            f"Gamma({a})" + (f"^{e}" if e != 1 else "") for a, e in r.rhs_gammas
        )
        print(f"{lhs} = {r.rhs_multiplier}*({r.rhs_mass})^({r.rhs_exponent})*{gammas}")
    return EXIT_OK


def cmd_sunset_verify(args) -> int:
    prec = _prec(args)
    residual = sunset.verify_main_numeric(args.eps, args.z, prec)
    bound = _bound(prec)
    ok = residual < bound
    _emit(
        args,
        {
            "eps": str(args.eps),
            "z": str(args.z),
            "prec": prec,
            "residual": kernel.mpf_str(residual, 10),
            "bound": kernel.mpf_str(bound, 3),
            "pass": ok,
        },
        f"residual {kernel.mpf_str(residual, 10)} (bound {kernel.mpf_str(bound, 3)}) "
        f"at eps={args.eps}, z={args.z}, prec={prec}: {'PASS' if ok else 'FAIL'}",
    )
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def cmd_sunset_eval(args) -> int:
    prec = _prec(args)
    idx = sunset.SunsetIndices(args.sigma, args.beta, args.alpha)
    value = sunset.eval_J(idx, args.eps, args.z, prec)
    text = kernel.mpf_str(value, prec)
    _emit(
        args,
        {"index": idx.label, "eps": str(args.eps), "z": str(args.z), "value": text},
        f"{idx.label}(eps={args.eps}, z={args.z}) = {text}",
    )
    return EXIT_OK


# -- hyper ----------------------------------------------------------------------


def cmd_hyper_eval(args) -> int:
    prec = _prec(args)
    f = hyper.parse_pfq(args.spec)
    n0 = 4 - 2 * Fraction(args.eps)
    value = hyper.series_sum(f, args.z, n0, prec)
    text = kernel.mpf_str(value, prec)
    _emit(args, {"pfq": str(f), "z": str(args.z), "n": str(n0), "value": text}, text)
    return EXIT_OK


def cmd_hyper_reduce(args) -> int:
    f = hyper.parse_pfq(args.spec)
    target = hyper.parse_pfq(args.target) if args.target else hyper.cancel_params(f)
    form = hyper.reduce_shifts(f, target)
    if args.json:
        print(json.dumps(form.to_json(), indent=1))
        return EXIT_OK
    print(f"basis:     {form.basis}")
    print(f"operator:  {form.op}")
    print(f"remainder: {form.remainder}")
    print(f"shifts:    {form.shifts}")
    return EXIT_OK


def cmd_hyper_count(args) -> int:
    f = hyper.parse_pfq(args.spec)
    count = hyper.basis_count(f)
    _emit(args, {"pfq": str(f), "basis_count": count}, str(count))
    return EXIT_OK


# -- ibp ------------------------------------------------------------------------


def _load_table(args) -> ibp.ReductionTable:
    path = Path(args.table) if args.table else None
    if path and path.exists():
        return ibp.ReductionTable.load(path)
    table = ibp.laporta(args.seed_dots, args.seed_nums)
    if path:
        table.save(path)
    return table


def _master_name(m) -> str:
    return m.key if isinstance(m, ibp.GammaModule) else f"I({m.key})"


def cmd_ibp_masters(args) -> int:
    table = _load_table(args)
    if args.with_main_relation:
        table = ibp.apply_external_relation(table, sunset.assemble_main())
    masters = table.masters
    nontrivial = table.nontrivial_masters
    if args.json:
        print(
            json.dumps(
                {
                    "masters": [m.key for m in masters],
                    "gamma_expressible": [
                        m.key for m in masters if m.is_gamma_expressible
                    ],
                    "nontrivial_count": len(nontrivial),
                },
                indent=1,
            )
        )
        return EXIT_OK
    for m in masters:
        tag = "gamma-expressible" if m.is_gamma_expressible else "nontrivial"
        print(f"{_master_name(m)}  [{tag}]")
    print(f"nontrivial masters: {len(nontrivial)}")
    return EXIT_OK


def cmd_ibp_reduce(args) -> int:
    table = _load_table(args)
    if args.with_main_relation:
        table = ibp.apply_external_relation(table, sunset.assemble_main())
    target = ibp.FamilyIndex.parse(args.target)
    combo = table.reduce(target)
    if args.json:
        print(
            json.dumps(
                {"target": target.key, "reduction": [[m.key, str(c)] for m, c in combo]},
                indent=1,
            )
        )
        return EXIT_OK
    if not combo:
        print(f"I({target.key}) = 0")
        return EXIT_OK
    print(f"I({target.key}) =")
    for m, c in combo:
        print(f"  ({c}) * {_master_name(m)}")
    return EXIT_OK


def cmd_ibp_check(args) -> int:
    prec = _prec(args)
    table = _load_table(args)
    target = ibp.FamilyIndex.parse(args.target)
    residual = ibp.cross_check(table, target, args.eps, args.z, prec)
    bound = _bound(prec)
    ok = residual < bound
    _emit(
        args,
        {
            "target": target.key,
            "eps": str(args.eps),
            "z": str(args.z),
            "prec": prec,
            "residual": kernel.mpf_str(residual, 10),
            "bound": kernel.mpf_str(bound, 3),
            "pass": ok,
        },
        f"I({target.key}) residual {kernel.mpf_str(residual, 10)} "
        f"(bound {kernel.mpf_str(bound, 3)}): {'PASS' if ok else 'FAIL'}",
    )
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


# -- wiring ---------------------------------------------------------------------


def _fraction(text: str) -> Fraction:
    try:
        return kernel.parse_fraction(text)
    except ParseError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _add_common(p, prec=True):
    p.add_argument("--json", action="store_true", help="machine-readable output")
    if prec:
        p.add_argument("--prec", type=int, default=None, help="decimal precision")


def _add_table_opts(p):
    p.add_argument("--seed-dots", type=int, default=2, help="max extra dots in seeds")
    p.add_argument("--seed-nums", type=int, default=1, help="max numerator powers in seeds")
    p.add_argument("--table", default=None, help="reduction-table cache path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sunsetwb",
        description="Master-integral workbench for the on-shell two-loop sunset diagram",
    )
    top = parser.add_subparsers(dest="group", required=True)

    ps = top.add_parser("sunset", help="hypergeometric representation and relation")
    sub = ps.add_subparsers(dest="command", required=True)

    p = sub.add_parser("repr", help="two-term 4F3 representation, raw and collapsed")
    p.add_argument("--sigma", type=_positive_int, required=True)
    p.add_argument("--beta", type=_positive_int, required=True)
    p.add_argument("--alpha", type=_positive_int, required=True)
    _add_common(p, prec=False)
    p.set_defaults(func=cmd_sunset_repr)

    p = sub.add_parser("relation", help="the algebraic relation among the masters")
    p.add_argument("--equal-mass", action="store_true", help="specialize to m = M")
    _add_common(p, prec=False)
    p.set_defaults(func=cmd_sunset_relation)

    p = sub.add_parser("verify", help="numeric residual of the master relation")
    p.add_argument("--eps", type=_fraction, required=True)
    p.add_argument("--z", type=_fraction, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_sunset_verify)

    p = sub.add_parser("eval", help="numeric value of J(sigma,beta,alpha)")
    p.add_argument("--sigma", type=_positive_int, required=True)
    p.add_argument("--beta", type=_positive_int, required=True)
    p.add_argument("--alpha", type=_positive_int, required=True)
    p.add_argument("--eps", type=_fraction, required=True)
    p.add_argument("--z", type=_fraction, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_sunset_eval)

    ph = top.add_parser("hyper", help="pFq series, reduction and counting")
    sub = ph.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="sum the series of a pFq")
    p.add_argument("spec", help="e.g. \"2F1[1,1;2]\"")
    p.add_argument("--z", type=_fraction, required=True)
    p.add_argument("--eps", type=_fraction, default=Fraction(0))
    _add_common(p)
    p.set_defaults(func=cmd_hyper_eval)

    p = sub.add_parser("reduce", help="differential reduction onto a basis function")
    p.add_argument("spec")
    p.add_argument("--target", default=None, help="basis pFq (default: cancelled input)")
    _add_common(p, prec=False)
    p.set_defaults(func=cmd_hyper_reduce)

    p = sub.add_parser("count", help="number of basis elements after reduction")
    p.add_argument("spec")
    _add_common(p, prec=False)
    p.set_defaults(func=cmd_hyper_count)

    pi = top.add_parser("ibp", help="integration-by-parts reduction")
    sub = pi.add_subparsers(dest="command", required=True)

    p = sub.add_parser("masters", help="master integrals of the family")
    p.add_argument("--with-main-relation", action="store_true",
                   help="inject the Gamma-inhomogeneous relation")
    _add_table_opts(p)
    _add_common(p, prec=False)
    p.set_defaults(func=cmd_ibp_masters)

    p = sub.add_parser("reduce", help="reduce one integral to masters")
    p.add_argument("--target", required=True, help="indices a1,a2,a3,a4,a5")
    p.add_argument("--with-main-relation", action="store_true")
    _add_table_opts(p)
    _add_common(p, prec=False)
    p.set_defaults(func=cmd_ibp_reduce)

    p = sub.add_parser("check", help="cross-check a reduction numerically")
    p.add_argument("--target", required=True)
    p.add_argument("--eps", type=_fraction, required=True)
    p.add_argument("--z", type=_fraction, required=True)
    _add_table_opts(p)
    _add_common(p)
    p.set_defaults(func=cmd_ibp_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors already; normalize other codes
        return EXIT_USAGE if exc.code not in (0,) else EXIT_OK
    try:
        return args.func(args)
    except ParseError as exc:
        print(exc.caret_diagnostic(), file=sys.stderr)
        return EXIT_USAGE
    except ContradictionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRADICTION
    except (DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SunsetwbError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
