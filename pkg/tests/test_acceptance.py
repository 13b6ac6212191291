"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, printed in the terminal summary.
"""

import json
import math
import time

import numpy as np
import pytest

from walktail import bounds as B
from walktail import oracle as O
from walktail import verify as V
from walktail.chain import chain_from_edges, chain_from_matrix, normalize_function, spectrum
from walktail.simulate import empirical_tail

CONFIG = V.SuiteConfig()


@pytest.fixture(scope="module")
def cases():
    return V.suite_cases(CONFIG)


@pytest.fixture(scope="module")
def dominance(cases):
    start = time.perf_counter()
    dom, cross = V.check_dominance(cases, CONFIG)
    return dom, cross, time.perf_counter() - start


def test_1_dominance(criterion, cases, dominance):
    dom, _, seconds = dominance
    random_cases = [c for c in cases if c.name.startswith("chain")]
    with criterion(1, f"exact tail <= Chernoff <= every feasible bound, {dom.checked} checks, {seconds:.0f}s"):
        assert len(random_cases) == 20
        assert {c.chain.n_states for c in random_cases} <= set(range(2, 9))
        assert all(abs(c.f.max_abs - 1) <= 1e-12 and abs(c.f.mean_under_s) <= 1e-12 for c in cases)
        assert CONFIG.ns == (1, 2, 4, 8, 12) and len(CONFIG.gammas) == 9
        assert all(0 < g < 1 for g in CONFIG.gammas)
        assert dom.checked > 0 and dom.passed, dom.failures[:1]
        assert seconds < 180


def test_2_norm_bound(criterion, cases):
    res = V.check_norm_bound(cases, CONFIG)
    skipped = res.details["bipartiteSkipped"]
    with criterion(2, f"operator norm^2 <= closed form at {res.checked} (chain, r) points, {skipped} bipartite skipped"):
        for case in cases:
            rs = V.norm_r_values(case.spectrum.beta, case.f.variance, CONFIG)
            assert rs.size in (0, 20)
            if rs.size:
                r_max = B.feasible_r_max(case.spectrum.beta ** 2, case.f.variance)
                assert rs.max() <= 0.9 * r_max
        assert res.checked == 20 * (len(cases) - skipped) and res.passed, res.failures[:1]


def test_3_degeneration(criterion):
    res = V.check_degeneration(100, 1e-14)
    with criterion(3, f"beta = 0 exponents match the independent-sample forms at {res.checked // 2} points"):
        assert res.checked == 200 and res.passed, res.failures[:1]


def _two_state(p):
    return chain_from_matrix([[1 - p, p], [p, 1 - p]])


def test_4_closed_form_spectra(criterion):
    with criterion(4, "K_3..K_6, 4-cycle and 2-state p in {0.1, 0.5, 0.9} spectra within 1e-9"):
        for N in (3, 4, 5, 6):
            sp = spectrum(chain_from_edges(N, [(i, j, 1.0) for i in range(N) for j in range(i + 1, N)]))
            np.testing.assert_allclose(sp.eigenvalues, [1.0] + [-1 / (N - 1)] * (N - 1), atol=1e-9)
            assert abs(sp.beta - 1 / (N - 1)) <= 1e-9 and sp.alpha == 0
        sp = spectrum(chain_from_edges(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)]))
        np.testing.assert_allclose(sp.eigenvalues, [1, 0, 0, -1], atol=1e-9)
        assert abs(sp.beta - 1) <= 1e-9 and abs(sp.alpha) <= 1e-9
        for p in (0.1, 0.5, 0.9):
            sp = spectrum(_two_state(p))
            np.testing.assert_allclose(sp.eigenvalues, [1, 1 - 2 * p], atol=1e-9)


def test_5_oracle_crosscheck(criterion, dominance):
    _, cross, _ = dominance
    with criterion(5, f"enumeration = lattice DP to 1e-10 and mgf(0) = 1 to 1e-12, {cross.checked} checks"):
        assert cross.checked > 0 and cross.passed, cross.failures[:1]


def test_6_corollary_inequalities(criterion, cases):
    forms, relax = V.check_corollaries(V.corollary_queries(cases, CONFIG))
    with criterion(6, f"Bennett form-1 <= form-2 ({forms.checked}) and theorem1 <= corollaries ({relax.checked})"):
        assert forms.checked > 0 and forms.passed, forms.failures[:1]
        assert relax.checked > 0 and relax.passed, relax.failures[:1]


def test_7_subgaussian(criterion):
    s = np.array([0.5, 0.5])
    f = np.array([1.0, -1.0])
    profile = B.SubgaussianProfile(C=1.0, K=math.log(2), f_inf=1.0)
    checked = 0
    with criterion(7, "subgaussian beta bound dominates the exact tail; profile examples match"):
        report = B.verify_subgaussian(f, s, profile)
        assert report.passed and abs(report.worst_margin) <= 1e-15
        assert not B.verify_subgaussian(f, s, B.SubgaussianProfile(1.0, 1.0, 1.0)).passed
        assert B.fit_subgaussian_C(f, s, math.log(2)) == pytest.approx(1.0, rel=1e-15)
        for p in (0.5, 0.45, 0.3):
            chain = _two_state(p)
            sp = spectrum(chain)
            fo = normalize_function(f, chain, mode="subgaussian")
            limit = B.subgaussian_threshold(sp.beta, profile)
            for n in CONFIG.ns:
                for gamma in CONFIG.gammas:
                    if gamma > limit:
                        continue
                    q = B.BoundQuery.from_chain(sp, fo, gamma, n, profile=profile)
                    res = B.subgaussian_bound(q, "beta")
                    assert res.feasible
                    assert O.exact_tail(chain, fo, None, gamma, n) <= res.value + 1e-12
                    checked += 1
        assert checked > 0


def test_8_monte_carlo(criterion, cases):
    res = V.check_monte_carlo(cases, CONFIG)
    again = V.check_monte_carlo(cases, CONFIG)
    d = res.details
    with criterion(8, f"95% CIs cover the exact tail in {d['covered']}/{d['cells']} cells, reruns identical"):
        assert CONFIG.mc_trials == 10 ** 5 and d["cells"] == 10
        assert d["covered"] >= 9
        assert json.dumps(res.to_dict(), sort_keys=True) == json.dumps(again.to_dict(), sort_keys=True)
        case = cases[0]
        a = empirical_tail(case.chain, case.f, None, 0.25, 4, 10 ** 5, 42).to_dict()
        b = empirical_tail(case.chain, case.f, None, 0.25, 4, 10 ** 5, 42).to_dict()
        assert json.dumps(a) == json.dumps(b)


def test_9_planner(criterion):
    res = V.check_planner(50)
    plan = B.plan_samples("bernstein-beta", B.BoundQuery(gamma=0.1, n=1, V=0.1, alpha=0.0, beta=0.0), 0.01)
    with criterion(9, f"bound(n) <= eps < bound(n-1) on {res.checked} queries; reference n = {plan.n}"):
        assert res.checked == 50 and res.passed, res.failures[:1]
        assert plan.n == 369
