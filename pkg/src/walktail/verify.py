"""Seeded verification suite: analytic bounds against exact oracles.

Each check returns a ``CheckResult``; failures carry the full inputs of the
offending cell so it can be replayed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bounds as B
from . import oracle as O
from .chain import (ChainSpec, ReversibleChain, Spectrum, ObservableFunction, build_chain, spectrum,
                    normalize_function, initial_distribution)
from .simulate import empirical_tail

ABS_SLACK = 1e-12
REL_SLACK = 1e-9
T_SCAN = (None, 1.25, 1.5, 2.0, 4.0)    # None: the default slack


@dataclass(frozen=True)
class SuiteConfig:
    n_chains: int = 20
    seed: int = 20061025
    min_states: int = 2
    max_states: int = 8
    ns: tuple = (1, 2, 4, 8, 12)
    gammas: tuple = (0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85)
    r_points: int = 20
    r_span_cap: float = 3.0
    mc_cells: int = 10
    mc_trials: int = 100_000
    mc_seed: int = 42
    plan_queries: int = 50
    lopsided_case: bool = True


@dataclass(frozen=True, eq=False)
class SuiteCase:
    name: str
    chain: ReversibleChain
    spectrum: Spectrum
    f: ObservableFunction
    raw: tuple

    def replay(self) -> dict:
        return {"case": self.name, "chain": self.chain.spec.to_dict(), "f": self.f.values.tolist(),
                "raw": list(self.raw)}


@dataclass
class CheckResult:
    name: str
    checked: int = 0
    failures: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures and self.details.get("passed", True)

    def fail(self, **info):
        self.failures.append(info)

    def to_dict(self) -> dict:
        return {"check": self.name, "passed": self.passed, "checked": self.checked,
                "failures": len(self.failures), "firstFailure": self.failures[0] if self.failures else None,
                "details": self.details}


def random_edges(rng: np.random.Generator, N: int):
    """Random spanning tree plus extra edges and self-loops, weights in [0.1, 1]."""
    edges = [(i, int(rng.integers(0, i)), float(rng.uniform(0.1, 1.0))) for i in range(1, N)]
    tree = {(min(u, v), max(u, v)) for u, v, _ in edges}
    for u in range(N):
        for v in range(u + 1, N):
            if (u, v) not in tree and rng.random() < 0.4:
                edges.append((u, v, float(rng.uniform(0.1, 1.0))))
        if rng.random() < 0.25:
            edges.append((u, u, float(rng.uniform(0.1, 1.0))))
    return edges


def suite_cases(config: SuiteConfig = SuiteConfig()) -> list[SuiteCase]:
    rng = np.random.default_rng(config.seed)
    cases = []
    for k in range(config.n_chains):
        N = int(rng.integers(config.min_states, config.max_states + 1))
        chain = build_chain(ChainSpec(states=N, edges=tuple(random_edges(rng, N))))
        raw = rng.integers(-4, 5, N)
        while np.all(raw == raw[0]):
            raw = rng.integers(-4, 5, N)
        cases.append(SuiteCase(f"chain{k:02d}", chain, spectrum(chain),
                               normalize_function(raw, chain), tuple(int(v) for v in raw)))
    if config.lopsided_case:
        # rare state with small V: the regime where the dependence term dominates
        chain = build_chain(ChainSpec(states=2, matrix=((0.99, 0.5), (0.01, 0.5))))
        cases.append(case_from_chain(chain, (0, 1), name="lopsided"))
    return cases


def case_from_chain(chain: ReversibleChain, raw, name: str = "user") -> SuiteCase:
    return SuiteCase(name, chain, spectrum(chain), normalize_function(raw, chain),
                     tuple(float(v) for v in raw))


def start_distributions(case: SuiteCase):
    """Stationary start and a point mass on state 0."""
    point = np.zeros(case.chain.n_states)
    point[0] = 1.0
    return {"stationary": initial_distribution(case.chain.s, case.chain),
            "point0": initial_distribution(point, case.chain)}


# ---------------------------------------------------------------------------


def check_dominance(cases, config: SuiteConfig = SuiteConfig(), families=B.BOUNDED_FAMILIES):
    """exact tail <= exact Chernoff <= every feasible analytic family.

    Also cross-checks enumeration against the lattice DP wherever both fit
    the budgets, and that the MGF is 1 at ``r = 0``.
    """
    dom = CheckResult("dominance")
    cross = CheckResult("oracle-crosscheck")
    for case in cases:
        for qname, q in start_distributions(case).items():
            for n in config.ns:
                m0 = O.mgf(case.chain, case.f, q, 0.0, n)
                cross.checked += 1
                if abs(m0 - 1) > 1e-12:
                    cross.fail(kind="mgf(r=0)", value=m0, n=n, q=qname, **case.replay())
                for gamma in config.gammas:
                    tail = O.exact_tail(case.chain, case.f, q, gamma, n)
                    if O.enumeration_size(case.chain.n_states, n) <= O.ENUMERATION_BUDGET:
                        t_enum = O.exact_tail(case.chain, case.f, q, gamma, n, mode="enumerate")
                        t_dp = O.exact_tail(case.chain, case.f, q, gamma, n, mode="lattice")
                        cross.checked += 1
                        if abs(t_enum - t_dp) > 1e-10:
                            cross.fail(kind="enumerate-vs-lattice", enumerate=t_enum, lattice=t_dp,
                                       gamma=gamma, n=n, q=qname, **case.replay())
                    cher, r_star = O.chernoff_exact(case.chain, case.f, q, gamma, n)
                    query = B.BoundQuery.from_chain(case.spectrum, case.f, gamma, n, q)
                    dom.checked += 1
                    if tail > cher + ABS_SLACK:
                        dom.fail(kind="tail>chernoff", tail=tail, chernoff=cher, gamma=gamma, n=n,
                                 q=qname, **case.replay())
                    for res in B.evaluate_all(query, families):
                        if not res.feasible:
                            continue
                        dom.checked += 1
                        if cher > res.value + ABS_SLACK:
                            dom.fail(kind="chernoff>bound", family=res.family, chernoff=cher, bound=res.value,
                                     rUsed=res.r_used, gamma=gamma, n=n, q=qname, **case.replay())
    return dom, cross


def norm_r_values(beta: float, V: float, config: SuiteConfig = SuiteConfig()):
    r_max = B.feasible_r_max(beta * beta, V)
    # beta = 0 leaves r unbounded; span up to the cap instead
    top = 0.9 * (r_max if math.isfinite(r_max) else config.r_span_cap)
    if top <= 0:
        return np.array([])
    return np.linspace(0.0, top, config.r_points + 1)[1:]


def check_norm_bound(cases, config: SuiteConfig = SuiteConfig()):
    res = CheckResult("norm-bound")
    skipped = 0
    for case in cases:
        rs = norm_r_values(case.spectrum.beta, case.f.variance, config)
        if rs.size == 0:
            skipped += 1
        for r in rs:
            chk = O.norm_bound_check(case.chain, case.f, float(r), case.spectrum.beta)
            res.checked += 1
            if not chk.ok:
                res.fail(r=float(r), normSquared=chk.norm_squared, bound=chk.bound, **case.replay())
    res.details["bipartiteSkipped"] = skipped
    return res


def degeneration_grid(n_points: int = 100, seed: int = 7):
    rng = np.random.default_rng(seed)
    return [(float(rng.uniform(0.01, 1.0)), float(rng.uniform(0.01, 1.0)), float(rng.uniform(0.001, 2.0)),
             int(rng.integers(1, 200))) for _ in range(n_points)]


def check_degeneration(n_points: int = 100, tol: float = 1e-14):
    """At zero spectral parameter the exponents reduce to the independent-sample ones."""
    res = CheckResult("beta0-degeneration")
    for gamma, V, r, n in degeneration_grid(n_points):
        got = float(B.theorem1_exponent(0.0, r, V, gamma))
        ref = 2 * gamma * r - V * (math.exp(2 * r) - 1 - 2 * r)
        scale = abs(2 * gamma * r) + V * (math.exp(2 * r) - 1 + 2 * r)
        res.checked += 1
        if abs(got - ref) > tol * scale:
            res.fail(kind="theorem1", gamma=gamma, V=V, r=r, got=got, expected=ref)
        q = B.BoundQuery(gamma=gamma, n=n, V=V, alpha=0.0, beta=0.0)
        got = B.bernstein_bound(q, "beta").value
        ref = math.exp(-n * gamma ** 2 / (4 * (V + gamma)))
        res.checked += 1
        if abs(got - ref) > tol * ref:
            res.fail(kind="bernstein", gamma=gamma, V=V, n=n, got=got, expected=ref)
    return res


def corollary_queries(cases, config: SuiteConfig = SuiteConfig()):
    """Suite-derived queries plus a synthetic grid over (gamma, V, beta, n, Bennett t)."""
    out = []
    for case in cases:
        for n in config.ns:
            for gamma in config.gammas:
                out.append(B.BoundQuery.from_chain(case.spectrum, case.f, gamma, n))
    for gamma in (0.02, 0.1, 0.3, 0.6, 0.95):
        for V in (0.05, 0.2, 0.5, 1.0):
            for beta in (0.0, 0.2, 0.5, 0.8):
                for n in (1, 10, 100, 1000):
                    for t in T_SCAN:
                        out.append(B.BoundQuery(gamma=gamma, n=n, V=V, alpha=beta * 0.7, beta=beta, t=t))
    return out


def check_corollaries(queries):
    """Bennett form-1 <= form-2, and the optimised theorem1 bound beats both corollaries."""
    forms = CheckResult("bennett-forms")
    relax = CheckResult("relaxation-ordering")
    for q in queries:
        if q.V <= 0:
            continue
        for form in ("beta", "alpha"):
            ben = B.bennett_bound(q, form)
            t1 = B.theorem1_bound(q, form)
            ber = B.bernstein_bound(q, form)
            if ben.feasible:
                forms.checked += 1
                if ben.value > ben.extras["logFormValue"] * (1 + REL_SLACK):
                    forms.fail(form=form, form1=ben.value, form2=ben.extras["logFormValue"], query=_query_dict(q))
                relax.checked += 1
                if t1.value > ben.value * (1 + REL_SLACK):
                    relax.fail(kind=f"theorem1>bennett-{form}", theorem1=t1.value, corollary=ben.value,
                               query=_query_dict(q))
            if ber.feasible:
                relax.checked += 1
                if t1.value > ber.value * (1 + REL_SLACK):
                    relax.fail(kind=f"theorem1>bernstein-{form}", theorem1=t1.value, corollary=ber.value,
                               query=_query_dict(q))
    return forms, relax


def _query_dict(q: B.BoundQuery) -> dict:
    d = dict(q.__dict__)
    d["profile"] = None if q.profile is None else q.profile.__dict__
    return d


def monte_carlo_cells(cases, config: SuiteConfig = SuiteConfig()):
    """First ``mc_cells`` suite cells (stationary start) with a non-degenerate exact tail."""
    cells = []
    for case in cases:
        for n in config.ns[1:]:
            for gamma in config.gammas[::4]:
                p = O.exact_tail(case.chain, case.f, None, gamma, n)
                if 1e-3 < p < 1 - 1e-3:
                    cells.append((case, gamma, n, p))
                    break
            if cells and cells[-1][0] is case:
                break
        if len(cells) >= config.mc_cells:
            break
    return cells


def check_monte_carlo(cases, config: SuiteConfig = SuiteConfig()):
    res = CheckResult("monte-carlo-calibration")
    cells = monte_carlo_cells(cases, config)
    covered = 0
    for case, gamma, n, p in cells:
        est = empirical_tail(case.chain, case.f, None, gamma, n, config.mc_trials, config.mc_seed)
        res.checked += 1
        if est.covers(p):
            covered += 1
        else:
            res.details.setdefault("missed", []).append(
                {"case": case.name, "gamma": gamma, "n": n, "exact": p, "ci": [est.ci_low, est.ci_high]})
    need = math.ceil(0.9 * len(cells))
    res.details.update(covered=covered, cells=len(cells), required=need, passed=covered >= need)
    return res


def random_plan_queries(count: int, seed: int = 11):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        fam = B.BOUNDED_FAMILIES[int(rng.integers(0, len(B.BOUNDED_FAMILIES)))]
        beta = float(rng.uniform(0, 0.9))
        q = B.BoundQuery(gamma=float(rng.uniform(0.02, 0.9)), n=1, V=float(rng.uniform(0.02, 1.0)),
                         alpha=float(rng.uniform(0, beta)), beta=beta, q_norm=float(rng.uniform(1, 3)))
        eps = float(10 ** rng.uniform(-6, -0.5))
        out.append((fam, q, eps))
    return out


def check_planner(count: int = 50, seed: int = 11):
    res = CheckResult("planner-bracketing")
    skipped = 0
    for fam, q, eps in random_plan_queries(count, seed):
        try:
            plan = B.plan_samples(fam, q, eps, families=(fam,))
        except B.InfeasibleTarget:
            skipped += 1
            continue
        res.checked += 1
        at_n = B.evaluate(q.with_n(plan.n), fam).value
        before = B.evaluate(q.with_n(plan.n - 1), fam).value if plan.n > 1 else math.inf
        if not (at_n <= eps < before):
            res.fail(family=fam, epsilon=eps, n=plan.n, atN=at_n, before=before, query=_query_dict(q))
    res.details["infeasibleSkipped"] = skipped
    return res


def run_suite(config: SuiteConfig = SuiteConfig(), cases=None, monte_carlo: bool = True):
    cases = suite_cases(config) if cases is None else cases
    results = list(check_dominance(cases, config))
    results.append(check_norm_bound(cases, config))
    results.append(check_degeneration())
    results.extend(check_corollaries(corollary_queries(cases, config)))
    if monte_carlo:
        results.append(check_monte_carlo(cases, config))
    results.append(check_planner(config.plan_queries))
    return results
