"""Command-line front end.

Every subcommand prints one JSON document (or CSV for tables) to stdout,
or to ``--output``.  Exit status: 0 on success, 1 when a verification
fails, 2 on usage, input or capacity errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from .basis import (
    as_float_vector,
    basis_from_json,
    basis_to_json,
    c2n_basis,
    gks_check,
    hadamard4_basis,
    helmert_basis,
    hypergroup_check,
    is_strongly_monotone,
    s3_basis,
    xu_basis,
)
from .chains import (
    CIRCULANT_SCHEMES,
    circulant_chain,
    circulant_kernel,
    ehrenfest_chain,
    eigen_tables,
    flip_kernel,
    hoare_rahmann_chain,
    hoare_rahmann_kernel,
    lancaster_kernel,
    lightbulb_chain,
    metropolis_chain,
    simulate,
    single_site_chain,
    spectrum_matches,
    verify_eigen,
)
from .combinatorics import DEFAULT_CAPACITY, multi_indices, set_capacity
from .errors import CapacityError, HypergroupPreconditionError, KrawtchoukError
from .lancaster import (
    all_triple_sums,
    bivariate_from_correlations,
    extract_correlations,
    linearization_distribution,
    read_contingency_csv,
)
from .polynomials import (
    build_table,
    check_duality,
    kernel_invariance_deviation,
    recurrence_coefficients,
    transform_check,
    xu_identity_deviation,
)
from .scalar import format_scalar, parse_scalar, parse_vector

BASES = ("helmert", "xu", "s3", "hadamard4", "c2n")
CHAINS = ("metropolis", "ehrenfest", "hoare-rahmann", "circulant", "lightbulb", "lancaster")


class VerificationFailed(Exception):
    pass


# ---------------------------------------------------------------------------
# argument helpers


def _exact(args) -> bool:
    return args.backend == "exact"


def _vec(args, text):
    v = parse_vector(text)
    return v if _exact(args) else tuple(float(t) for t in v)


def _scalar(args, text):
    v = parse_scalar(text)
    return v if _exact(args) else float(v)


def _tol(args):
    return 0 if _exact(args) else args.tol


def _require(args, name):
    if getattr(args, name, None) is None:
        raise UsageError(f"--{name.replace('_', '-')} is required here")
    return getattr(args, name)


class UsageError(Exception):
    pass


def _basis(args):
    kind = args.basis
    if getattr(args, "basis_file", None):
        with open(args.basis_file) as fh:
            u = basis_from_json(json.load(fh))
    elif kind in ("helmert", "xu"):
        p = _vec(args, _require(args, "p"))
        u = helmert_basis(p) if kind == "helmert" else xu_basis(p)
    elif kind == "s3":
        u = s3_basis()
    elif kind == "hadamard4":
        u = hadamard4_basis()
    elif kind == "c2n":
        u = c2n_basis(args.n)
    else:
        raise UsageError(f"unknown basis {kind!r}")
    if not _exact(args) and u.exact:
        u = u.as_float()
    return u


def _parse_rho(args, text) -> dict:
    """'1,0=1/3;0,1=-1/4' -> {(1,0): 1/3, (0,1): -1/4}."""
    out = {}
    for item in filter(None, (t.strip() for t in text.split(";"))):
        key, val = item.split("=")
        out[tuple(int(k) for k in key.split(","))] = _scalar(args, val)
    return out


def _composition(text) -> tuple:
    return tuple(int(t) for t in text.split(","))


def _emit(args, payload):
    if isinstance(payload, str):
        text = payload
    else:
        text = json.dumps(payload, indent=2) + "\n"
    if getattr(args, "output", None):
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dev(x):
    return format_scalar(x)


# ---------------------------------------------------------------------------
# basis


def cmd_basis(args):
    if args.kind == "check":
        return cmd_basis_check(args)
    if args.kind == "character":
        args.basis = args.group
    else:
        args.basis = args.kind
    u = _basis(args)
    _emit(args, basis_to_json(u))


def cmd_basis_check(args):
    u = _basis(args)
    checks = {}
    if args.strong_monotone:
        checks["strong_monotone"] = {"holds": is_strongly_monotone(u.p)}
    if args.hypergroup:
        checks["hypergroup"] = hypergroup_check(u.H(), _tol(args) if not u.exact else 0).to_json()
    if args.gks:
        checks["gks"] = gks_check(u, tol=_tol(args) if not u.exact else 0).to_json()
    if not checks:
        raise UsageError("choose at least one of --hypergroup, --gks, --strong-monotone")
    holds = all(c["holds"] for c in checks.values())
    _emit(args, {"schema": 1, "basis": u.name, "p": [format_scalar(v) for v in u.p], "holds": holds, "checks": checks})
    if not holds:
        raise VerificationFailed


# ---------------------------------------------------------------------------
# poly


def cmd_poly_table(args):
    u = _basis(args)
    table = build_table(u, args.N)
    if args.format == "csv":
        _emit(args, table.to_csv())
    else:
        _emit(args, table.to_json())


def cmd_poly_verify(args):
    u = _basis(args)
    N = args.N
    tol = 0 if u.exact else args.tol
    results = {}
    if args.orthogonality:
        dev = build_table(u, N).orthogonality_deviation()
        results["orthogonality"] = {"max_deviation": _dev(dev), "passed": bool(dev <= tol)}
    if args.duality:
        rep = check_duality(u.H(), N)
        results["duality"] = {
            "duality_deviation": _dev(rep.duality_deviation),
            "first_orthogonality_deviation": _dev(rep.first_orthogonality_deviation),
            "second_orthogonality_deviation": _dev(rep.second_orthogonality_deviation),
            "passed": bool(rep.max_deviation() <= tol),
        }
    if args.xu_identity:
        dev = xu_identity_deviation(u.p, N)
        results["xu_identity"] = {"max_deviation": _dev(dev), "passed": bool(dev <= tol)}
    if args.recurrence:
        table = build_table(u, N)
        total = derived = published = 0
        for i in range(1, u.d):
            for n in table.indices:
                if sum(n) == N:
                    continue
                r = recurrence_coefficients(i, n, u, N, table=table)
                total += 1
                derived += r.matches_derived
                published += r.matches_published
        results["recurrence"] = {
            "cases": total,
            "derived_matches": derived,
            "published_matches": published,
            "passed": derived == total,
        }
    if args.transform:
        phi = _vec(args, args.phi) if args.phi else tuple(Fraction(k + 1, u.d) if u.exact else (k + 1) / u.d for k in range(u.d))
        worst = 0
        for n in multi_indices(u.d, N):
            lhs, rhs = transform_check(phi, n, u, N=N)
            worst = max(worst, abs(lhs - rhs))
        results["transform"] = {"max_deviation": _dev(worst), "passed": bool(worst <= tol)}
    if args.kernel_invariance:
        rng = np.random.default_rng(args.seed)
        R, _ = np.linalg.qr(rng.standard_normal((u.d - 1, u.d - 1)))
        dev = kernel_invariance_deviation(u, N, R)
        results["kernel_invariance"] = {"max_deviation": dev, "passed": bool(dev <= args.tol)}
    if not results:
        raise UsageError("choose at least one verification flag")
    passed = all(r["passed"] for r in results.values())
    _emit(args, {"schema": 1, "basis": u.name, "N": N, "passed": passed, "checks": results})
    if not passed:
        raise VerificationFailed


# ---------------------------------------------------------------------------
# chain


def _single_kernel(args):
    kind = args.kind
    if kind == "metropolis":
        K, _ = metropolis_chain(_vec(args, _require(args, "p")))
        return K
    if kind == "lancaster":
        u = _basis(args)
        res = lancaster_kernel(_vec(args, _require(args, "beta")), u)
        if not res.member:
            raise VerificationFailed(f"beta is not in the Lancaster set (K{res.witness} = {format_scalar(res.min_entry)})")
        return res.kernel
    if kind == "hoare-rahmann":
        return hoare_rahmann_kernel(_vec(args, _require(args, "alpha")), _vec(args, _require(args, "theta")))
    if kind == "circulant":
        return circulant_kernel(_circulant_q(args))
    if kind in ("ehrenfest", "lightbulb"):
        return flip_kernel(_scalar(args, args.q) if args.q else (Fraction(1) if _exact(args) else 1.0))
    raise UsageError(f"unknown chain {kind!r}")


def _circulant_q(args):
    if args.q:
        return _vec(args, args.q)
    if args.scheme:
        q = CIRCULANT_SCHEMES[args.scheme](_require(args, "d"))
        return tuple(Fraction(v) for v in q) if _exact(args) else tuple(float(v) for v in q)
    raise UsageError("circulant needs --q or --scheme with -d")


def _chain(args, need_N: bool = False):
    kind = args.kind
    N = args.N
    if N is None:
        if need_N or kind in ("ehrenfest", "lightbulb"):
            raise UsageError("-N is required for this command")
        return _single_kernel(args)
    if kind == "metropolis":
        return single_site_chain(_single_kernel(args), N)
    if kind == "lancaster":
        return single_site_chain(_single_kernel(args), N)
    if kind == "hoare-rahmann":
        return hoare_rahmann_chain(_vec(args, args.alpha), _vec(args, args.theta), N)
    if kind == "circulant":
        return circulant_chain(_circulant_q(args), N, args.variant)
    if kind == "ehrenfest":
        K = ehrenfest_chain(_single_kernel(args), N, args.k)
        return K
    if kind == "lightbulb":
        return lightbulb_chain(N, args.k)
    raise UsageError(f"unknown chain {kind!r}")


def cmd_chain_build(args):
    K = _chain(args)
    if args.format == "csv":
        _emit(args, K.to_csv())
    else:
        _emit(args, K.to_json())


def cmd_chain_verify(args):
    K = _chain(args, need_N=True)
    right, left = eigen_tables(K)
    rep = verify_eigen(K, right, K.eigenvalues, tol=None if K.exact else args.tol, left_table=left)
    spectrum = spectrum_matches(K.matrix, list(K.eigenvalues.values()), tol=max(args.tol, 1e-8))
    passed = rep.passed and spectrum
    _emit(
        args,
        {
            "schema": 1,
            "chain": K.name,
            "N": K.N,
            "passed": passed,
            "max_residual": format_scalar(max(rep.max_residual, rep.left_max_residual)),
            "spectrum_matches": spectrum,
            "stationarity_deviation": format_scalar(K.stationarity_deviation()),
            "reversible": K.is_reversible(None if K.exact else args.tol),
            "report": rep.to_json(),
        },
    )
    if not passed:
        raise VerificationFailed


def cmd_chain_simulate(args):
    K = _chain(args, need_N=True)
    x0 = _composition(args.x0) if args.x0 else K.states[0]
    res = simulate(K, x0, args.steps, args.seed)
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write(res.trace_jsonl())
    out = res.to_json()
    out["chain"] = K.name
    out["x0"] = list(x0)
    _emit(args, out)


# ---------------------------------------------------------------------------
# lancaster


def cmd_lancaster(args):
    u = _basis(args)
    action = args.action
    if action in ("build", "check"):
        rho = _parse_rho(args, args.rho or "")
        B, rep = bivariate_from_correlations(rho, u, args.N, tol=None if u.exact else args.tol)
        out = B.to_json()
        out["positivity"] = rep.to_json()
        out["positivity"]["witness"] = [list(s) for s in rep.witness]
        passed = rep.holds
        if action == "check" and args.triples:
            sums = all_triple_sums(u, args.N)
            key = min(sums, key=sums.get)
            ok = sums[key] >= -(0 if u.exact else args.tol)
            out["triple_sums"] = {"min_value": format_scalar(sums[key]), "witness": [list(s) for s in key], "holds": bool(ok)}
            passed = passed and ok
        out["passed"] = passed
        if action == "build" and args.format == "csv":
            _emit(args, B.to_csv())
        else:
            _emit(args, out)
        if action == "check" and not passed:
            raise VerificationFailed
        return
    if action == "extract":
        with open(_require(args, "table")) as fh:
            B = read_contingency_csv(fh.read(), u.p)
        rep = extract_correlations(B, u, tol=args.tol if not B.exact else None, check_margins=not args.no_margin_check)
        _emit(args, rep.to_json())
        return
    if action == "linearize":
        x = _composition(_require(args, "x"))
        y = _composition(_require(args, "y"))
        lin = linearization_distribution(x, y, u, tol=None if u.exact else args.tol)
        out = lin.to_json()
        ok = lin.is_probability(None if u.exact else args.tol)
        out["is_probability"] = ok
        _emit(args, out)
        if not ok:
            raise VerificationFailed
        return
    raise UsageError(f"unknown action {action!r}")


# ---------------------------------------------------------------------------
# parser


def _common() -> argparse.ArgumentParser:
    c = argparse.ArgumentParser(add_help=False)
    c.add_argument("--backend", choices=("float", "exact"), default="float")
    c.add_argument("--tol", type=float, default=1e-10)
    c.add_argument("--capacity", type=int, default=None, help="max table cells (env KRAWTCHOUK_CAPACITY)")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--format", choices=("json", "csv"), default="json")
    c.add_argument("-o", "--output", help="write to this file instead of stdout")
    return c


def _basis_opts(parser, default="helmert"):
    parser.add_argument("-p", help="probability vector, e.g. 1/2,1/3,1/6")
    parser.add_argument("--basis", choices=BASES, default=default)
    parser.add_argument("--basis-file", help="JSON basis as written by 'basis helmert' etc.")
    parser.add_argument("--n", type=int, default=2, help="n for the C_2^n character basis")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="krawtchouk", description="Multivariate Krawtchouk polynomials and urn chains.")
    parser.add_argument("--version", action="version", version=__version__)
    top = parser.add_subparsers(dest="group", required=True)

    b = top.add_parser("basis", help="construct or check a basis on [d]", parents=[common])
    b.add_argument("kind", choices=("helmert", "xu", "character", "check"))
    _basis_opts(b)
    b.add_argument("--group", choices=("s3", "hadamard4", "c2n"), default="s3")
    b.add_argument("--hypergroup", action="store_true")
    b.add_argument("--gks", action="store_true")
    b.add_argument("--strong-monotone", action="store_true")
    b.set_defaults(func=cmd_basis)

    poly = top.add_parser("poly", help="polynomial tables and identities").add_subparsers(dest="action", required=True)
    t = poly.add_parser("table", parents=[common])
    _basis_opts(t)
    t.add_argument("-d", type=int)
    t.add_argument("-N", type=int, required=True)
    t.set_defaults(func=cmd_poly_table)
    v = poly.add_parser("verify", parents=[common])
    _basis_opts(v)
    v.add_argument("-d", type=int)
    v.add_argument("-N", type=int, required=True)
    for flag in ("orthogonality", "duality", "xu-identity", "recurrence", "transform", "kernel-invariance"):
        v.add_argument(f"--{flag}", action="store_true")
    v.add_argument("--phi", help="argument vector for --transform")
    v.set_defaults(func=cmd_poly_verify)

    chain = top.add_parser("chain", help="Markov chains on [d] and on compositions").add_subparsers(dest="action", required=True)
    for name, func in (("build", cmd_chain_build), ("verify-eigen", cmd_chain_verify), ("simulate", cmd_chain_simulate)):
        c = chain.add_parser(name, parents=[common])
        c.add_argument("kind", choices=CHAINS)
        _basis_opts(c)
        c.add_argument("-d", type=int, help="number of states for --scheme")
        c.add_argument("-N", type=int, help="number of balls (omit for the kernel on [d])")
        c.add_argument("-k", type=int, default=1, help="subset size for ehrenfest/lightbulb")
        c.add_argument("--q", help="flip probability (ehrenfest) or first row (circulant)")
        c.add_argument("--scheme", choices=sorted(CIRCULANT_SCHEMES))
        c.add_argument("--variant", choices=("single", "all"), default="single")
        c.add_argument("--alpha")
        c.add_argument("--theta")
        c.add_argument("--beta")
        if name == "simulate":
            c.add_argument("--x0", help="starting composition, e.g. 4,0")
            c.add_argument("--steps", type=int, default=1000)
            c.add_argument("--trace", help="write the trajectory as JSON lines")
        c.set_defaults(func=func)

    lan = top.add_parser("lancaster", help="bivariate Lancaster distributions", parents=[common])
    lan.add_argument("action", choices=("build", "extract", "check", "linearize"))
    _basis_opts(lan)
    lan.add_argument("-N", type=int)
    lan.add_argument("--rho", help="correlations as 'n1,n2=value;...'")
    lan.add_argument("--table", help="contingency table CSV for extract")
    lan.add_argument("--no-margin-check", action="store_true")
    lan.add_argument("--triples", action="store_true", help="also check all hypergroup triple sums")
    lan.add_argument("-x")
    lan.add_argument("-y")
    lan.set_defaults(func=cmd_lancaster)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    cap = args.capacity if args.capacity is not None else int(os.environ.get("KRAWTCHOUK_CAPACITY", DEFAULT_CAPACITY))
    old = set_capacity(cap)
    try:
        args.func(args)
    except VerificationFailed as exc:
        if str(exc):
            print(f"verification failed: {exc}", file=sys.stderr)
        return 1
    except HypergroupPreconditionError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 1
    except (UsageError, CapacityError, KrawtchoukError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    finally:
        set_capacity(old)
    return 0


if __name__ == "__main__":
    sys.exit(main())
