"""``walktail`` command line: spectrum, bound, plan, oracle, simulate, verify.

Exit codes: 0 success, 1 verification counterexample, 2 input error. Text
output uses 12 significant digits; ``--json`` keeps full precision.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

import numpy as np

from . import bounds as B
from . import oracle as O
from . import verify as V
from .chain import (ChainError, NotConverged, as_observable, initial_distribution, load_chain, load_vector,
                    normalize_function, spectrum)
from .simulate import empirical_tail

EXIT_OK, EXIT_COUNTEREXAMPLE, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _g(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def _emit(report: dict, args, text_lines):
    if args.json:
        print(json.dumps(report, sort_keys=True, allow_nan=True))
    else:
        print("\n".join(text_lines))


# ---------------------------------------------------------------------------
# Input loading


def _chain(args):
    if not args.chain:
        raise InputError("--chain FILE is required")
    try:
        return load_chain(args.chain)
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.chain}: malformed JSON ({exc})") from None
    except (OSError, KeyError, TypeError) as exc:
        raise InputError(f"{args.chain}: {exc}") from None


def _profile(args, f_inf):
    C, K = getattr(args, "C", None), getattr(args, "K", None)
    if C is None and K is None:
        return None
    if C is None or K is None:
        raise InputError("subgaussian profile needs both --C and --K")
    return B.SubgaussianProfile(C=C, K=K, f_inf=f_inf)


def _function(args, chain):
    if not args.function:
        raise InputError("--function FILE is required")
    try:
        raw = load_vector(args.function)
    except (OSError, ValueError) as exc:
        raise InputError(f"{args.function}: {exc}") from None
    mode = "subgaussian" if getattr(args, "C", None) is not None or getattr(args, "K", None) is not None else "bounded"
    if args.normalize:
        return normalize_function(raw, chain, mode)
    return as_observable(raw, chain, mode)


def _start(args, chain):
    if args.q in (None, "stationary"):
        return None
    try:
        q = load_vector(args.q)
    except (OSError, ValueError) as exc:
        raise InputError(f"{args.q}: {exc}") from None
    return initial_distribution(q, chain)


def _families(args, default):
    if not args.family:
        return tuple(default)
    fams = tuple(x.strip() for x in args.family.split(",") if x.strip())
    unknown = [x for x in fams if x not in B.FAMILIES]
    if unknown:
        raise InputError(f"unknown family {unknown[0]!r}; choose from {', '.join(B.FAMILIES)}")
    return fams


def _function_echo(f):
    return {"values": f.values.tolist(), "variance": f.variance, "maxAbs": f.max_abs, "mode": f.mode,
            "shift": f.shift, "scale": f.scale}


def _query_echo(q: B.BoundQuery):
    return {"gamma": q.gamma, "n": q.n, "V": q.V, "alpha": q.alpha, "beta": q.beta, "qNorm": q.q_norm,
            "t": q.t, "fMax": q.f_max,
            "profile": None if q.profile is None else {"C": q.profile.C, "K": q.profile.K,
                                                       "fInf": q.profile.f_inf}}


def query_from_echo(d: dict) -> B.BoundQuery:
    """Rebuild the ``BoundQuery`` echoed in a JSON report."""
    p = d.get("profile")
    profile = None if p is None else B.SubgaussianProfile(C=p["C"], K=p["K"], f_inf=p["fInf"])
    return B.BoundQuery(gamma=d["gamma"], n=d["n"], V=d["V"], alpha=d["alpha"], beta=d["beta"],
                        q_norm=d["qNorm"], t=d["t"], profile=profile, f_max=d["fMax"])


def _default_families(f, profile):
    fams = B.BOUNDED_FAMILIES if f.max_abs <= 1 + 1e-12 else ()
    return fams + (B.SUBGAUSSIAN_FAMILIES if profile is not None else ())


def _profile_check(f, chain, profile):
    if profile is None:
        return None
    chk = B.verify_subgaussian(f, chain.s, profile)
    return {"passed": chk.passed, "worstMargin": chk.worst_margin}


# ---------------------------------------------------------------------------
# Commands


def cmd_spectrum(args) -> int:
    chain = _chain(args)
    sp = spectrum(chain)
    warnings = ["bipartite: beta-bounds trivial"] if sp.bipartite else []
    report = {"command": "spectrum", "inputs": {"chain": chain.spec.to_dict()}, "N": chain.n_states,
              "stationary": chain.s.tolist(), "eigenvalues": sp.eigenvalues.tolist(),
              "alpha": sp.alpha, "beta": sp.beta, "warnings": warnings}
    lines = [f"N = {chain.n_states}",
             "s = " + " ".join(_g(x) for x in chain.s),
             "eigenvalues = " + " ".join(_g(x) for x in sp.eigenvalues),
             f"alpha = {_g(sp.alpha)}", f"beta = {_g(sp.beta)}"]
    lines += [f"warning: {w}" for w in warnings]
    _emit(report, args, lines)
    return EXIT_OK


def _gamma(args, positive=True):
    if args.gamma is None:
        raise InputError("--gamma is required")
    if not math.isfinite(args.gamma) or (positive and not args.gamma > 0):
        raise InputError(f"gamma must be positive, got {args.gamma}")
    return args.gamma


def _setup(args):
    chain = _chain(args)
    f = _function(args, chain)
    q = _start(args, chain)
    sp = spectrum(chain)
    profile = _profile(args, f.max_abs)
    return chain, f, q, sp, profile


def cmd_bound(args) -> int:
    chain, f, q, sp, profile = _setup(args)
    gamma = _gamma(args)
    if args.n is None:
        raise InputError("--n is required")
    query = B.BoundQuery.from_chain(sp, f, gamma, args.n, q, args.t, profile)
    fams = _families(args, _default_families(f, profile))
    results = B.evaluate_all(query, fams, extended=args.extended_range)
    best = B.best_result(results)
    exact = 0.0 if gamma >= float(np.max(f.values)) else None
    report = {"command": "bound", "inputs": {"chain": chain.spec.to_dict(), "function": _function_echo(f),
                                             "query": _query_echo(query), "families": list(fams),
                                             "extendedRange": args.extended_range},
              "results": [r.to_dict() for r in results], "best": None if best is None else best.family,
              "exactTail": exact, "subgaussianProfile": _profile_check(f, chain, profile)}
    lines = [f"gamma = {_g(gamma)}  n = {query.n}  V = {_g(query.V)}  alpha = {_g(query.alpha)}  "
             f"beta = {_g(query.beta)}  qNorm = {_g(query.q_norm)}"]
    if f.shift != 0 or f.scale != 1:
        lines.append(f"normalised: f = (raw - {_g(f.shift)}) / {_g(f.scale)}; "
                     f"threshold on raw average = {_g(f.to_user_threshold(gamma))}")
    lines.append(f"{'family':<18} {'value':>20} {'rUsed':>20} {'rate':>20}  feasible  conditions")
    for r in results:
        mark = " *" if best is not None and r.family == best.family else ""
        conds = "; ".join(f"{c.name}: {'ok' if c.ok else 'FAIL'}" for c in r.conditions)
        notes = "".join(f"  [{n}]" for n in r.notes)
        lines.append(f"{r.family:<18} {_g(r.value):>20} {_g(r.r_used):>20} {_g(r.exponent_per_sample):>20}  "
                     f"{str(r.feasible):<8}  {conds}{notes}{mark}")
    if exact is not None:
        lines.append("exact tail = 0 (gamma is at or above max f)")
    if profile is not None and not report["subgaussianProfile"]["passed"]:
        lines.append("warning: the subgaussian profile does not hold for this f under s")
    _emit(report, args, lines)
    return EXIT_OK


def cmd_plan(args) -> int:
    chain, f, q, sp, profile = _setup(args)
    gamma = _gamma(args)
    if args.epsilon is None:
        raise InputError("--epsilon is required")
    query = B.BoundQuery.from_chain(sp, f, gamma, 1, q, args.t, profile)
    fams = _families(args, _default_families(f, profile))
    comparison = B.compare_plans(query, args.epsilon, fams, extended=args.extended_range)
    best, best_n = B.best_plan(comparison)
    report = {"command": "plan", "inputs": {"chain": chain.spec.to_dict(), "function": _function_echo(f),
                                            "query": _query_echo(query), "epsilon": args.epsilon,
                                            "families": list(fams)},
              "plans": comparison, "bestFamily": best, "bestN": best_n}
    lines = [f"gamma = {_g(gamma)}  epsilon = {_g(args.epsilon)}  V = {_g(query.V)}  "
             f"alpha = {_g(query.alpha)}  beta = {_g(query.beta)}"]
    for fam, p in comparison.items():
        if p["n"] is None:
            lines.append(f"{fam:<18} infeasible: {p['reason']}")
        else:
            lines.append(f"{fam:<18} n = {p['n']:<12} bound(n) = {_g(p['value'])}")
    lines.append("no family reaches epsilon" if best is None else f"minimum: n = {best_n} ({best})")
    _emit(report, args, lines)
    return EXIT_OK if best is not None else EXIT_INPUT


def _lattice_hint(f):
    try:
        O.lattice_embedding(f)
        return "; f has a lattice embedding, try --mode lattice"
    except O.NoLatticeEmbedding:
        return ""


def cmd_oracle(args) -> int:
    chain, f, q, sp, _ = _setup(args)
    kind = args.kind
    n = args.n
    if n is None and kind != "norm":
        raise InputError("--n is required")
    inputs = {"chain": chain.spec.to_dict(), "function": _function_echo(f), "n": n,
              "q": None if q is None else q.q.tolist()}
    budget = None
    mode = None
    if kind == "tail":
        gamma = _gamma(args, positive=False)
        inputs["gamma"] = gamma
        mode = args.mode
        try:
            value = O.exact_tail(chain, f, q, gamma, n, mode=mode)
        except O.TooLarge as exc:
            hint = _lattice_hint(f) if mode == "enumerate" else ""
            raise InputError(f"{exc}{hint}") from None
        if mode == "enumerate" or (mode == "auto" and O.enumeration_size(chain.n_states, n) <= O.ENUMERATION_BUDGET):
            mode, budget = "enumerate", O.enumeration_size(chain.n_states, n)
        elif gamma >= float(np.max(f.values)) and mode == "auto":
            mode, budget = "range", 0
        else:
            mode, budget = "lattice", O.dp_size(O.lattice_embedding(f), chain.n_states, n)
        extra = {}
    elif kind == "mgf":
        r = 0.0 if args.r is None else args.r
        inputs["r"] = r
        value = O.mgf(chain, f, q, r, n)
        extra = {"logMgf": float(O.log_mgf(chain, f, q, r, n)[0])}
    elif kind == "chernoff":
        gamma = _gamma(args, positive=False)
        inputs["gamma"] = gamma
        value, r_star = O.chernoff_exact(chain, f, q, gamma, n)
        extra = {"rStar": r_star}
    else:
        if args.r is None:
            raise InputError("--r is required for the operator norm")
        inputs["r"] = args.r
        value = O.operator_norm(chain, f, args.r)
        extra = {}
        try:
            chk = O.norm_bound_check(chain, f, args.r, sp.beta)
            extra = {"normSquared": chk.norm_squared, "closedFormBound": chk.bound, "boundHolds": chk.ok}
        except B.InfeasibleR:
            extra = {"closedFormBound": None, "boundHolds": None}
    report = {"command": "oracle", "kind": kind, "inputs": inputs, "value": value, "mode": mode,
              "budgetUsed": budget, **extra}
    lines = [f"{kind} = {_g(value)}"]
    if mode is not None:
        lines.append(f"mode = {mode}  budget used = {budget}")
    lines += [f"{k} = {_g(v)}" for k, v in extra.items()]
    _emit(report, args, lines)
    return EXIT_OK


def cmd_simulate(args) -> int:
    chain, f, q, _, _ = _setup(args)
    gamma = _gamma(args, positive=False)
    if args.n is None or args.n < 1:
        raise InputError("--n must be a positive integer")
    if args.trials < 1:
        raise InputError("--trials must be at least 1")
    est = empirical_tail(chain, f, q, gamma, args.n, args.trials, args.seed)
    report = {"command": "simulate", "inputs": {"chain": chain.spec.to_dict(), "function": _function_echo(f),
                                                "q": None if q is None else q.q.tolist()},
              **est.to_dict()}
    lines = [f"estimate = {_g(est.estimate)}  ({est.count}/{est.trials})",
             f"95% CI = [{_g(est.ci_low)}, {_g(est.ci_high)}]", f"seed = {est.seed}"]
    _emit(report, args, lines)
    return EXIT_OK


def cmd_verify(args) -> int:
    start = time.perf_counter()
    config = V.SuiteConfig(n_chains=args.chains, seed=args.seed if args.seed is not None else V.SuiteConfig.seed)
    cases = None
    if args.chain:
        chain = _chain(args)
        if not args.function:
            raise InputError("--function FILE is required with --chain")
        try:
            raw = load_vector(args.function)
        except (OSError, ValueError) as exc:
            raise InputError(f"{args.function}: {exc}") from None
        cases = [V.case_from_chain(chain, raw)]
    results = V.run_suite(config, cases, monte_carlo=not args.no_monte_carlo)
    for r in sorted(results, key=lambda r: r.name):
        print(json.dumps(r.to_dict(), sort_keys=True))
    failed = [r for r in results if not r.passed]
    if failed:
        first = failed[0]
        witness = first.failures[0] if first.failures else first.details
        print(f"counterexample in {first.name}: {json.dumps(witness, sort_keys=True)}", file=sys.stderr)
    print(f"verify: {len(results) - len(failed)}/{len(results)} checks passed "
          f"in {time.perf_counter() - start:.1f}s", file=sys.stderr)
    return EXIT_COUNTEREXAMPLE if failed else EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--chain", help="chain JSON file (edges or matrix form)")
    common.add_argument("--json", action="store_true", help="machine-readable output")

    obs = argparse.ArgumentParser(add_help=False)
    obs.add_argument("--function", help="observable f as a JSON array or one value per line")
    obs.add_argument("--normalize", action="store_true", help="centre (and rescale) f, reporting the affine map")
    obs.add_argument("--q", default="stationary", help="initial distribution FILE, or 'stationary'")
    obs.add_argument("--gamma", type=float)
    obs.add_argument("--n", type=int)

    bnd = argparse.ArgumentParser(add_help=False)
    bnd.add_argument("--family", help="comma-separated bound families")
    bnd.add_argument("--t", type=float, help="Bennett slack t >= 1")
    bnd.add_argument("--C", type=float, help="subgaussian profile constant")
    bnd.add_argument("--K", type=float, help="subgaussian profile rate")
    bnd.add_argument("--extended-range", action="store_true", help="use the wider subgaussian range")

    parser = argparse.ArgumentParser(prog="walktail", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="stationary law, eigenvalues, alpha and beta")
    sub.add_parser("bound", parents=[common, obs, bnd], help="evaluate tail bounds")
    p = sub.add_parser("plan", parents=[common, obs, bnd], help="smallest n reaching a target")
    p.add_argument("--epsilon", type=float)
    p = sub.add_parser("oracle", parents=[common, obs], help="exact tail, MGF, Chernoff or operator norm")
    p.add_argument("--kind", choices=("tail", "mgf", "chernoff", "norm"), default="tail")
    p.add_argument("--mode", choices=("auto", "enumerate", "lattice"), default="auto")
    p.add_argument("--r", type=float)
    p = sub.add_parser("simulate", parents=[common, obs], help="Monte Carlo tail estimate")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p = sub.add_parser("verify", parents=[common], help="run the verification suite")
    p.add_argument("--function", help="observable for a user chain")
    p.add_argument("--seed", type=int)
    p.add_argument("--chains", type=int, default=V.SuiteConfig.n_chains)
    p.add_argument("--no-monte-carlo", action="store_true")
    p.add_argument("--suite", action="store_true", help="run the built-in suite (the default)")
    return parser


COMMANDS = {"spectrum": cmd_spectrum, "bound": cmd_bound, "plan": cmd_plan, "oracle": cmd_oracle,
            "simulate": cmd_simulate, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (InputError, ChainError, B.BoundError, O.OracleError, NotConverged, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
