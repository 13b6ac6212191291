import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from walktail import bounds as B
from walktail.bounds import (
    BoundError, BoundQuery, InfeasibleR, InfeasibleTarget, InvalidProfile, InvalidT, SubgaussianProfile,
    ZeroVariance, big_delta, bennett_bound, bernstein_bound, delta, evaluate_all, feasible_r_max,
    fit_subgaussian_C, optimize_r, plan_samples, simplified_bound, subgaussian_bound, theorem1_bound,
    theorem1_exponent, verify_subgaussian,
)

# reference values below were computed with mpmath at 50 digits


def q(**kw):
    base = dict(gamma=0.5, n=10, V=1.0, alpha=0.0, beta=0.0)
    base.update(kw)
    return BoundQuery(**base)


queries = st.builds(
    lambda g, n, V, a, b, qn: BoundQuery(gamma=g, n=n, V=V, alpha=min(a, b), beta=max(a, b), q_norm=qn),
    st.floats(0.01, 1.0), st.integers(1, 2000), st.floats(0.01, 1.0),
    st.floats(0, 0.95), st.floats(0, 0.95), st.floats(1, 3),
)


# ---------------------------------------------------------------------------
# delta, big_delta, feasible range


def test_delta_identities():
    for x in (0.0, 0.3, 1.0):
        for V in (0.0, 0.5, 1.0):
            assert delta(x, 0.0, V) == x
            assert big_delta(min(x, 0.9), 0.0, V) == 0.0
    assert delta(0.0, 0.7, 1.0) == 0.0
    assert big_delta(0.0, 0.7, 1.0) == 0.0


def test_delta_reference():
    assert delta(1, 0.1, 1) == pytest.approx(1.2324636801690444, rel=1e-14)


def test_big_delta_reference():
    assert big_delta(0.25, 0.1, 1) == pytest.approx(0.019526162027400805, rel=1e-13)


def test_big_delta_infeasible():
    with pytest.raises(InfeasibleR):
        big_delta(0.5, 1.0, 1.0)


def _r_max_closed_form(x, V):
    # delta = 1 is a quadratic in y = e^r: (1+V) y^2 - 2V y + V - 1/x = 0
    a, b, c = 1 + V, -2 * V, V - 1 / x
    return math.log((-b + math.sqrt(b * b - 4 * a * c)) / (2 * a))


def test_feasible_r_max_reference():
    assert feasible_r_max(0.25, 1.0) == pytest.approx(0.600415284666035, abs=1e-11)
    assert delta(0.25, feasible_r_max(0.25, 1.0), 1.0) == pytest.approx(1.0, abs=1e-10)


@given(st.floats(1e-6, 0.999), st.floats(0, 5))
def test_feasible_r_max_matches_quadratic(x, V):
    assert feasible_r_max(x, V) == pytest.approx(_r_max_closed_form(x, V), abs=1e-10)


def test_feasible_r_max_edges():
    assert feasible_r_max(0.0, 1.0) == math.inf
    assert feasible_r_max(1.0, 1.0) == 0.0
    assert feasible_r_max(1.5, 1.0) == 0.0


@given(st.floats(0.01, 0.99), st.floats(0, 2), st.floats(0, 2), st.floats(0, 2))
def test_delta_monotone(x, V, r1, r2):
    lo, hi = sorted((r1, r2))
    assert delta(x, lo, V) <= delta(x, hi, V)
    assert delta(x * 0.5, lo, V) <= delta(x, lo, V)


# ---------------------------------------------------------------------------
# theorem1 bound


def test_theorem1_reference_two_state():
    res = theorem1_bound(q())
    assert res.feasible
    assert res.value <= 0.5822376904475184
    fixed = theorem1_bound(q(), r=0.2)
    assert fixed.value == pytest.approx(0.5822376904475184, rel=1e-12)


def test_theorem1_beta_zero_is_iid_exponent():
    for r in np.linspace(0.01, 3, 40):
        expected = 2 * 0.3 * r - 0.7 * (math.exp(2 * r) - 1 - 2 * r)
        assert theorem1_exponent(0.0, r, 0.7, 0.3) == pytest.approx(expected, rel=1e-14, abs=1e-15)


def test_theorem1_r_zero_trivial():
    res = theorem1_bound(q(q_norm=1.5), r=0.0)
    assert res.value == 1.0 and res.trivial
    assert res.prefactor == pytest.approx(1.5)


def test_theorem1_rejects_infeasible_r():
    with pytest.raises(InfeasibleR):
        theorem1_bound(q(beta=0.5), r=5.0)


def test_theorem1_bipartite_trivial():
    res = theorem1_bound(q(beta=1.0))
    assert not res.feasible and res.value == 1.0
    assert theorem1_bound(q(beta=1.0), "alpha").feasible


# ---------------------------------------------------------------------------
# Closed-form corollaries


def test_bennett_reference():
    res = bennett_bound(BoundQuery(gamma=0.4, n=100, V=0.1, alpha=0, beta=0, t=1.0))
    assert res.value == pytest.approx(2.3564161820566e-6, rel=1e-11)
    assert res.extras["g"] == pytest.approx(2.0)


def test_bennett_h_taylor():
    u = 1e-8
    assert B._h(u) / (u * u / 2) == pytest.approx(1, abs=1e-6)


def test_bennett_errors():
    with pytest.raises(InvalidT):
        BoundQuery(gamma=0.1, n=1, V=0.1, alpha=0, beta=0, t=0.5)
    with pytest.raises(ZeroVariance):
        bennett_bound(q(V=0.0))


def test_bennett_side_condition():
    res = bennett_bound(q(beta=0.5, gamma=0.9, V=0.1, t=1.01))
    assert not res.feasible and res.value == 1.0
    assert bennett_bound(q(beta=0.5, gamma=0.9, V=0.1)).feasible


@given(queries)
@settings(max_examples=200)
def test_bennett_first_form_below_log_form(query):
    for form in ("beta", "alpha"):
        res = bennett_bound(query, form)
        if res.feasible:
            assert res.value <= res.extras["logFormValue"] * (1 + 1e-9)


def test_bernstein_reference():
    res = bernstein_bound(BoundQuery(gamma=0.3, n=200, V=0.2, alpha=0, beta=math.sqrt(1 / 3)))
    assert res.value == pytest.approx(0.011108996538242306, rel=1e-12)
    assert res.value == pytest.approx(math.exp(-4.5), rel=1e-12)


def test_bernstein_classical_shape():
    res = bernstein_bound(q(gamma=0.2, V=0.2))
    assert res.exponent_per_sample == pytest.approx(0.2 / 8, rel=1e-14)


def test_bernstein_alpha_prefactor_is_e_2r():
    res = bernstein_bound(q(alpha=0.3, beta=0.3, gamma=0.4, V=0.2), "alpha")
    assert res.prefactor == pytest.approx(math.exp(2 * res.r_used), rel=1e-14)
    c = 0.7 / 1.3
    assert res.extras["statedPrefactor"] == pytest.approx(math.exp(c * 0.16 / 0.6), rel=1e-14)


def test_simplified_reference():
    res = simplified_bound(BoundQuery(gamma=1, n=80, V=1, alpha=0, beta=0))
    assert res.value == pytest.approx(5.829466373086881e-5, rel=1e-12)


@given(st.floats(0, 0.95), st.floats(0.01, 1), st.integers(1, 500))
def test_simplified_branches_meet(alpha, V, n):
    res = simplified_bound(BoundQuery(gamma=V, n=n, V=V, alpha=alpha, beta=alpha))
    expected = min(1.0, math.exp((1 - alpha) * V / 4 - n * (1 - alpha) * V / 8))
    assert res.value == pytest.approx(expected, rel=1e-12)


def test_simplified_relaxes_stated_bernstein_alpha():
    for a in np.linspace(0, 0.9, 7):
        for V in np.geomspace(0.01, 1, 7):
            for g in np.linspace(0.02, 1, 9):
                for n in (1, 10, 100, 1000):
                    query = BoundQuery(gamma=g, n=n, V=V, alpha=a, beta=a)
                    stated = bernstein_bound(query, "alpha").extras["statedPrefactorValue"]
                    assert simplified_bound(query).value >= stated * (1 - 1e-12)


@given(queries)
@settings(max_examples=200, deadline=None)
def test_relaxation_ordering(query):
    for form in ("beta", "alpha"):
        t1 = theorem1_bound(query, form).value
        for cor in (bernstein_bound(query, form), bennett_bound(query, form)):
            if cor.feasible:
                assert t1 <= cor.value * (1 + 1e-9)


# ---------------------------------------------------------------------------
# Subgaussian


def test_subgaussian_reference():
    prof = SubgaussianProfile(C=1, K=1, f_inf=3)
    res = subgaussian_bound(BoundQuery(gamma=3, n=20, V=1, alpha=0, beta=0, profile=prof))
    assert res.feasible
    assert res.value == pytest.approx(3.6061332507708727e-31, rel=1e-11)
    assert res.r_used == 3


def test_subgaussian_threshold_half():
    prof = SubgaussianProfile(C=1, K=2, f_inf=1.5)
    assert B.subgaussian_threshold(0.5, prof) == pytest.approx(math.log(1.5) / (2 * 2 * 1.5), rel=1e-15)
    assert B.subgaussian_threshold(0.0, prof) == math.inf


def test_subgaussian_small_gamma_flagged():
    prof = SubgaussianProfile(C=1, K=1, f_inf=1)
    res = subgaussian_bound(BoundQuery(gamma=1e-3, n=50, V=1, alpha=0, beta=0, profile=prof))
    assert res.value == 1.0
    assert any("non-decaying" in n for n in res.notes)
    cross = res.extras["crossoverGamma"]
    assert cross ** 2 - math.log(math.sqrt(math.pi) * cross + 2) == pytest.approx(0, abs=1e-12)


def test_subgaussian_extended_range_opt_in():
    prof = SubgaussianProfile(C=1, K=1, f_inf=1)
    query = BoundQuery(gamma=0.3, n=50, V=1, alpha=0.5, beta=0.5, profile=prof)
    plain = subgaussian_bound(query)
    wide = subgaussian_bound(query, extended=True)
    assert wide.extras["threshold"] > plain.extras["threshold"]
    assert not plain.feasible and wide.feasible


def test_subgaussian_profile_validation():
    with pytest.raises(InvalidProfile):
        SubgaussianProfile(C=0, K=1, f_inf=1)
    with pytest.raises(InvalidProfile):
        subgaussian_bound(q())


def test_verify_subgaussian_examples():
    s = np.array([0.5, 0.5])
    f = np.array([1.0, -1.0])
    ok = verify_subgaussian(f, s, SubgaussianProfile(1, math.log(2), 1))
    assert ok.passed and ok.worst_margin == pytest.approx(0, abs=1e-15)
    assert not verify_subgaussian(f, s, SubgaussianProfile(1, 1, 1)).passed
    assert fit_subgaussian_C(f, s, math.log(2)) == pytest.approx(1, rel=1e-15)


# ---------------------------------------------------------------------------
# Optimiser, invariants, planner


def test_optimize_r_toy_quadratic():
    gamma, c = 0.3, 2.0
    r, g = optimize_r(lambda r: 2 * gamma * np.asarray(r) - c * np.asarray(r) ** 2, 10.0)
    assert r == pytest.approx(gamma / c, abs=1e-6)
    assert g == pytest.approx(gamma ** 2 / c, rel=1e-10)


def test_optimize_r_decreasing_returns_zero():
    r, g = optimize_r(lambda r: -np.asarray(r), 5.0)
    assert r == 0.0 and g == 0.0


def test_optimize_r_respects_cap():
    r, _ = optimize_r(lambda r: np.asarray(r, dtype=float), 0.5)
    assert r < 0.5


@given(queries)
@settings(max_examples=100, deadline=None)
def test_values_clamped_and_consistent(query):
    for res in evaluate_all(query):
        assert 0 <= res.value <= 1
        if res.feasible:
            expected = min(1.0, res.prefactor * math.exp(-query.n * res.exponent_per_sample))
            assert res.value == pytest.approx(expected, rel=1e-9)
        else:
            assert res.value == 1.0 and res.trivial


@given(queries, st.integers(1, 1000))
@settings(max_examples=100, deadline=None)
def test_monotone_in_n(query, extra):
    for a, b in zip(evaluate_all(query), evaluate_all(query.with_n(query.n + extra))):
        assert b.value <= a.value * (1 + 1e-12)


@given(queries, st.floats(0, 2))
@settings(max_examples=100, deadline=None)
def test_monotone_in_q_norm(query, extra):
    bigger = BoundQuery(**{**query.__dict__, "q_norm": query.q_norm + extra})
    for a, b in zip(evaluate_all(query), evaluate_all(bigger)):
        assert b.value >= a.value * (1 - 1e-12)


@given(queries, st.floats(0, 0.5))
@settings(max_examples=100, deadline=None)
def test_theorem1_monotone_in_spectrum(query, bump):
    beta = min(query.beta + bump, 0.99)
    bigger = BoundQuery(**{**query.__dict__, "beta": beta, "alpha": min(query.alpha + bump, beta)})
    for form in ("beta", "alpha"):
        assert theorem1_bound(bigger, form).value >= theorem1_bound(query, form).value * (1 - 1e-9)


def test_vacuous_annotation():
    res = theorem1_bound(q(gamma=1.5))
    assert "vacuous: deviation exceeds range" in res.notes


def test_plan_reference():
    plan = plan_samples("bernstein-beta", BoundQuery(gamma=0.1, n=1, V=0.1, alpha=0, beta=0), 0.01)
    assert plan.n == 369
    assert 4 * 0.2 * math.log(100) / 0.01 == pytest.approx(368.41, abs=0.01)
    assert plan.best_n <= plan.n
    assert plan.comparison[plan.best_family]["n"] == plan.best_n


@pytest.mark.parametrize("eps", [0.0, 1.0, 1.5, -0.1])
def test_plan_rejects_bad_epsilon(eps):
    with pytest.raises(BoundError):
        plan_samples("bernstein-beta", q(), eps)


def test_plan_bipartite_beta_family():
    query = q(beta=1.0, alpha=0.0, gamma=0.01)
    with pytest.raises(InfeasibleTarget):
        plan_samples("bernstein-beta", query, 0.5)
    plan = plan_samples("bernstein-alpha", query, 0.5)
    assert plan.comparison["theorem1-beta"]["n"] is None
    assert plan.n >= 1


@given(queries, st.floats(1e-6, 0.5), st.sampled_from(B.BOUNDED_FAMILIES))
@settings(max_examples=60, deadline=None)
def test_plan_brackets(query, eps, family):
    try:
        plan = plan_samples(family, query, eps, families=[family])
    except InfeasibleTarget:
        return
    assert B.evaluate(query.with_n(plan.n), family).value <= eps
    if plan.n > 1:
        assert B.evaluate(query.with_n(plan.n - 1), family).value > eps


def test_plan_squared_epsilon_sanity():
    query = q(gamma=0.2, V=0.3, beta=0.4, alpha=0.2)
    n1 = plan_samples("bernstein-beta", query, 0.1).n
    n2 = plan_samples("bernstein-beta", query, 0.01).n
    assert n2 <= 2 * n1 + 2


def test_result_json_schema():
    d = theorem1_bound(q()).to_dict()
    for key in ("family", "value", "rUsed", "exponentPerSample", "prefactor", "feasible", "conditions"):
        assert key in d
    assert set(d["conditions"][0]) == {"name", "ok", "detail"}


def test_query_validation():
    with pytest.raises(BoundError):
        q(gamma=0.0)
    with pytest.raises(BoundError):
        q(n=0)
    with pytest.raises(BoundError):
        q(alpha=0.5, beta=0.2)
    with pytest.raises(BoundError):
        q(q_norm=0.5)
