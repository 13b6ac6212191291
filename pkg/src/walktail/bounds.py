"""Analytic tail bounds for ``P_q(S_n / n > gamma)`` along a reversible walk.

Every family is reported in the common shape

    value = min(1, prefactor * exp(-n * exponent_per_sample))

so that families can be compared and inverted for the sample size. All
functions assume the observable is centred under the stationary law; the
bounded families additionally assume ``|f| <= 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

R_CAP = 20.0
GRID_POINTS = 512
N_CEILING = 2 ** 53

BETA_FAMILIES = ("theorem1-beta", "bennett-beta", "bernstein-beta")
ALPHA_FAMILIES = ("theorem1-alpha", "bennett-alpha", "bernstein-alpha", "simplified-alpha")
BOUNDED_FAMILIES = (
    "theorem1-beta", "theorem1-alpha",
    "bennett-beta", "bennett-alpha",
    "bernstein-beta", "bernstein-alpha",
    "simplified-alpha",
)
SUBGAUSSIAN_FAMILIES = ("subgaussian-beta", "subgaussian-alpha")
FAMILIES = BOUNDED_FAMILIES + SUBGAUSSIAN_FAMILIES


class BoundError(ValueError):
    pass


class InfeasibleR(BoundError):
    pass


class InvalidT(BoundError):
    pass


class ZeroVariance(BoundError):
    pass


class InvalidProfile(BoundError):
    pass


class InfeasibleTarget(BoundError):
    pass


@dataclass(frozen=True)
class SubgaussianProfile:
    """Tail profile ``s(f >= t) <= C exp(-K t^2)`` for ``t > 0``."""

    C: float
    K: float
    f_inf: float

    def __post_init__(self):
        for name in ("C", "K", "f_inf"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InvalidProfile(f"{name} must be a positive finite number, got {v!r}")


@dataclass(frozen=True)
class BoundQuery:
    gamma: float
    n: int
    V: float
    alpha: float
    beta: float
    q_norm: float = 1.0
    t: float | None = None
    profile: SubgaussianProfile | None = None
    f_max: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise BoundError(f"gamma must be positive, got {self.gamma}")
        if int(self.n) != self.n or self.n < 1:
            raise BoundError(f"n must be a positive integer, got {self.n}")
        if not self.V >= 0:
            raise BoundError(f"variance must be non-negative, got {self.V}")
        if not (0 <= self.alpha <= self.beta <= 1):
            raise BoundError(f"need 0 <= alpha <= beta <= 1, got alpha={self.alpha}, beta={self.beta}")
        if not self.q_norm >= 1 - 1e-12:
            raise BoundError(f"q_norm must be >= 1, got {self.q_norm}")
        if self.t is not None and not self.t >= 1:
            raise InvalidT(f"Bennett slack t must be >= 1, got {self.t}")

    @classmethod
    def from_chain(cls, spec, f, gamma, n, q=None, t=None, profile=None):
        """Build a query from a ``Spectrum``, an ``ObservableFunction`` and optional ``InitialDistribution``."""
        return cls(
            gamma=float(gamma), n=int(n), V=f.variance,
            alpha=spec.alpha, beta=spec.beta,
            q_norm=1.0 if q is None else max(q.q_norm, 1.0),
            t=t, profile=profile, f_max=f.max_abs,
        )

    def with_n(self, n: int) -> "BoundQuery":
        return replace(self, n=int(n))


@dataclass(frozen=True)
class Condition:
    name: str
    ok: bool
    detail: str = ""


@dataclass(frozen=True)
class BoundResult:
    family: str
    value: float
    r_used: float | None
    exponent_per_sample: float
    prefactor: float
    feasible: bool
    conditions: tuple = ()
    notes: tuple = ()
    extras: dict = field(default_factory=dict)

    @property
    def trivial(self) -> bool:
        return (not self.feasible) or self.value >= 1.0

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "value": self.value,
            "rUsed": self.r_used,
            "exponentPerSample": self.exponent_per_sample,
            "prefactor": self.prefactor,
            "feasible": self.feasible,
            "trivial": self.trivial,
            "conditions": [{"name": c.name, "ok": c.ok, "detail": c.detail} for c in self.conditions],
            "notes": list(self.notes),
            "extras": dict(self.extras),
        }


def _clamped(log_prefactor: float, rate: float, n: int) -> float:
    log_value = log_prefactor - n * rate
    return 1.0 if log_value >= 0 else math.exp(log_value)


def _result(family, query, r, rate, log_prefactor, conditions=(), notes=(), extras=None):
    feasible = all(c.ok for c in conditions)
    notes = tuple(notes)
    if query.gamma > query.f_max:
        notes += ("vacuous: deviation exceeds range",)
    value = _clamped(log_prefactor, rate, query.n) if feasible else 1.0
    return BoundResult(
        family=family, value=value, r_used=r, exponent_per_sample=float(rate),
        prefactor=math.exp(log_prefactor), feasible=feasible,
        conditions=tuple(conditions), notes=notes, extras=extras or {},
    )


def _infeasible(family, query, conditions, notes=()):
    return _result(family, query, None, 0.0, math.log(query.q_norm), conditions, notes)


# ---------------------------------------------------------------------------
# theorem1 building blocks


def delta(x, r, V):
    """Feasibility term ``x (e^{2r} + V (e^r - 1)^2)``."""
    return x * (np.exp(2 * r) + V * np.expm1(r) ** 2)


def big_delta(x, r, V):
    """Dependence correction ``4 x e^{2r} (e^r - 1)^2 / (1 - delta(x, r, V))``."""
    num = 4 * x * math.exp(2 * r) * math.expm1(r) ** 2
    if num == 0.0:
        return 0.0
    d = delta(x, r, V)
    if d >= 1:
        raise InfeasibleR(f"delta({x}, {r}, {V}) = {d} >= 1")
    return num / (1 - d)


def _big_delta_array(x, r, V):
    r = np.asarray(r, dtype=float)
    num = 4 * x * np.exp(2 * r) * np.expm1(r) ** 2
    d = delta(x, r, V)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(d < 1, num / (1 - d), np.inf)
    return np.where(num == 0, 0.0, out)


def feasible_r_max(x: float, V: float) -> float:
    """Largest Chernoff parameter with ``delta(x, r, V) <= 1`` (bisection)."""
    if x <= 0:
        return math.inf
    if x >= 1:
        return 0.0
    # delta >= x e^{2r}, so the root lies below -log(x)/2; for subnormal x
    # delta overflows to inf on the way, which still compares correctly
    lo, hi = 0.0, -0.5 * math.log(x)
    with np.errstate(over="ignore"):
        while hi - lo > 1e-12:
            mid = 0.5 * (lo + hi)
            if delta(x, mid, V) < 1:
                lo = mid
            else:
                hi = mid
    return lo


def theorem1_exponent(x, r, V, gamma):
    """``2 gamma r - V (e^{2r} - 1 - 2r + Delta(x, r))``; vectorised in ``r``."""
    r = np.asarray(r, dtype=float)
    return 2 * gamma * r - V * (np.expm1(2 * r) - 2 * r + _big_delta_array(x, r, V))


# ---------------------------------------------------------------------------
# One-dimensional maximisation of the Chernoff gain


_INV_PHI = (math.sqrt(5) - 1) / 2


def golden_section_max(fun, a: float, b: float, rel_tol: float = 1e-10, max_iter: int = 300):
    """Golden-section search for a maximum of ``fun`` on ``[a, b]``."""
    x1 = b - _INV_PHI * (b - a)
    x2 = a + _INV_PHI * (b - a)
    f1, f2 = fun(x1), fun(x2)
    for _ in range(max_iter):
        if b - a <= rel_tol * max(abs(a), abs(b), 1e-300):
            break
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INV_PHI * (b - a)
            f1 = fun(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_PHI * (b - a)
            f2 = fun(x2)
    return (x1, f1) if f1 >= f2 else (x2, f2)


def r_grid(r_cap: float) -> np.ndarray:
    """Geometric points near 0 merged with linear points up to ``r_cap``."""
    half = GRID_POINTS // 2
    geo = np.geomspace(r_cap * 1e-6, r_cap, half)
    lin = np.linspace(r_cap / half, r_cap, half)
    return np.unique(np.concatenate([geo, lin]))


def optimize_r(gain, r_max: float, candidates=()):
    """Maximise ``gain(r)`` over ``[0, min(r_max (1 - 1e-9), 20)]``.

    ``gain`` must accept a numpy array. Returns ``(r_star, gain(r_star))``;
    ``r = 0`` is always a candidate, so the result is never infeasible.
    """
    r_cap = min(r_max * (1 - 1e-9), R_CAP)
    best_r, best_g = 0.0, float(gain(np.array([0.0]))[0])
    if not r_cap > 0:
        return best_r, best_g
    grid = r_grid(r_cap)
    vals = np.asarray(gain(grid), dtype=float)
    vals = np.where(np.isnan(vals), -np.inf, vals)
    k = int(np.argmax(vals))
    if vals[k] > best_g:
        best_r, best_g = float(grid[k]), float(vals[k])
        lo = grid[k - 1] if k > 0 else 0.0
        hi = grid[k + 1] if k + 1 < grid.size else r_cap
        r_ref, g_ref = golden_section_max(lambda r: float(gain(np.array([r]))[0]), lo, hi)
        if g_ref > best_g:
            best_r, best_g = float(r_ref), float(g_ref)
    for c in candidates:
        if c is None or not (0 <= c <= r_cap):
            continue
        g = float(gain(np.array([c]))[0])
        if g > best_g:
            best_r, best_g = float(c), g
    return best_r, best_g


# ---------------------------------------------------------------------------
# Bound families


def _spectral_x(query: BoundQuery, form: str) -> float:
    if form == "beta":
        return query.beta ** 2
    if form == "alpha":
        return query.alpha
    raise ValueError(f"form must be 'beta' or 'alpha', got {form!r}")


def default_t(x: float, gamma: float, V: float) -> float:
    """Smallest slack satisfying Bennett's side condition, padded by 1e-9."""
    base = 1.0 if x == 0 else 1 + x * gamma / ((1 + x) * V)
    return max(base, 1.0) + 1e-9


def bennett_r(x: float, gamma: float, V: float, t: float | None = None):
    if V <= 0 or x >= 1:
        return None
    t = default_t(x, gamma, V) if t is None else t
    C = 2 * (1 + x) / (1 - x)
    return 0.5 * math.log1p(gamma / (t * C * V))


def bernstein_r(x: float, gamma: float, V: float):
    if x >= 1:
        return None
    return (1 - x) / (1 + x) * gamma / (2 * (gamma + V))


def theorem1_bound(query: BoundQuery, form: str = "beta", r: float | None = None) -> BoundResult:
    """Optimised theorem1 bound; pass ``r`` to evaluate at a fixed parameter instead."""
    x = _spectral_x(query, form)
    family = f"theorem1-{form}"
    gamma, V, n = query.gamma, query.V, query.n
    if x >= 1:
        return _infeasible(family, query, [Condition("delta(x,0) < 1", False, f"x = {x} (bipartite walk)")])
    r_max = feasible_r_max(x, V)
    if form == "beta":
        gain = lambda rr: 0.5 * n * theorem1_exponent(x, rr, V, gamma)
    else:
        gain = lambda rr: n * theorem1_exponent(x, rr, V, gamma) - 2 * np.asarray(rr)
    if r is None:
        cands = (bernstein_r(x, gamma, V), bennett_r(x, gamma, V, query.t))
        r_star, _ = optimize_r(gain, r_max, cands)
    else:
        if not (0 <= r < r_max):
            raise InfeasibleR(f"r = {r} outside the feasible range [0, {r_max})")
        r_star = float(r)
    E = float(theorem1_exponent(x, r_star, V, gamma))
    if form == "beta":
        rate, log_pref = E / 2, math.log(query.q_norm)
    else:
        rate, log_pref = E, math.log(query.q_norm) + 2 * r_star
    conds = [Condition("delta(x,r) < 1", True, f"x = {x:.12g}, r = {r_star:.12g}, rMax = {r_max:.12g}")]
    notes = ("optimum at r = 0: trivial bound",) if r_star == 0 else ()
    return _result(family, query, r_star, rate, log_pref, conds, notes, {"x": x, "rMax": r_max})


def _h(u):
    return (1 + u) * math.log1p(u) - u


def bennett_bound(query: BoundQuery, form: str = "beta") -> BoundResult:
    x = _spectral_x(query, form)
    family = f"bennett-{form}"
    gamma, V = query.gamma, query.V
    if V <= 0:
        raise ZeroVariance("Bennett bound needs positive variance")
    if x >= 1:
        return _infeasible(family, query, [Condition(f"{form} < 1", False, f"x = {x}")])
    t = default_t(x, gamma, V) if query.t is None else query.t
    C = 2 * (1 + x) / (1 - x)
    scale = t * C * V
    g = gamma / scale
    if x == 0:
        cond = Condition("gamma <= (t-1)(1+x)/x V", True, "vacuous at x = 0")
    else:
        limit = (t - 1) * (1 + x) / x * V
        cond = Condition("gamma <= (t-1)(1+x)/x V", gamma <= limit, f"gamma = {gamma:.12g}, limit = {limit:.12g}")
    log_rate = gamma * math.log(gamma / (math.e * scale))
    if form == "beta":
        rate = 0.5 * scale * _h(g)
        log_pref = math.log(query.q_norm)
        log_rate *= 0.5
    else:
        rate = scale * _h(g)
        log_pref = math.log(query.q_norm) + math.log1p(g)
    log_form = _clamped(log_pref, log_rate, query.n) if cond.ok else 1.0
    extras = {"t": t, "C": C, "g": g, "logFormValue": log_form, "logFormExponentPerSample": log_rate}
    r = 0.5 * math.log1p(g)
    return _result(family, query, r, rate, log_pref, [cond], (), extras)


def bernstein_bound(query: BoundQuery, form: str = "beta") -> BoundResult:
    x = _spectral_x(query, form)
    family = f"bernstein-{form}"
    gamma, V = query.gamma, query.V
    if x >= 1:
        return _infeasible(family, query, [Condition(f"{form} < 1", False, f"x = {x}")])
    c = (1 - x) / (1 + x)
    r = c * gamma / (2 * (gamma + V))
    extras = {}
    if form == "beta":
        rate = c * gamma ** 2 / (4 * (V + gamma))
        log_pref = math.log(query.q_norm)
    else:
        rate = c * gamma ** 2 / (2 * (V + gamma))
        # the alpha prefactor is e^{2r} at the chosen r; the gamma^2 variant is
        # smaller and not implied by the norm estimate, so it is only reported
        log_pref = math.log(query.q_norm) + 2 * r
        stated = math.log(query.q_norm) + c * gamma ** 2 / (V + gamma)
        extras = {"statedPrefactor": math.exp(stated),
                  "statedPrefactorValue": _clamped(stated, rate, query.n)}
    return _result(family, query, r, rate, log_pref, [Condition(f"{form} < 1", True, f"x = {x:.12g}")],
                   extras=extras)


def simplified_bound(query: BoundQuery) -> BoundResult:
    """Bernstein-alpha relaxed to the two regimes ``gamma <= V`` and ``gamma >= V``."""
    family = "simplified-alpha"
    a = 1 - query.alpha
    gamma, V = query.gamma, query.V
    if a <= 0:
        return _infeasible(family, query, [Condition("alpha < 1", False, "alpha = 1")])
    if gamma <= V:
        rate = a * gamma ** 2 / (8 * V)
        extra = a * gamma ** 2 / (4 * V)
        regime = "gamma <= V"
    else:
        rate = a * gamma / 8
        extra = a * gamma / 4
        regime = "gamma > V"
    return _result(family, query, None, rate, math.log(query.q_norm) + extra,
                   [Condition("alpha < 1", True, regime)])


def subgaussian_threshold(spectral: float, profile: SubgaussianProfile) -> float:
    """``log(1/(2b) + 1/2) / (2 K ||f||_inf)``, infinite when ``b == 0``."""
    if spectral <= 0:
        return math.inf
    return math.log(0.5 / spectral + 0.5) / (2 * profile.K * profile.f_inf)


def subgaussian_crossover(profile: SubgaussianProfile) -> float:
    """Deviation above which the subgaussian exponent becomes a decay."""
    a = profile.C * math.sqrt(math.pi * profile.K)
    g = lambda y: y * y * profile.K - math.log(a * y + 2)
    hi = 1.0
    while g(hi) <= 0:
        hi *= 2
    return brentq(g, 0.0, hi, xtol=1e-14)


def subgaussian_bound(query: BoundQuery, form: str = "beta", extended: bool = False) -> BoundResult:
    """Bound for unbounded observables with ``s(f >= t) <= C exp(-K t^2)``.

    ``extended`` uses the wider range that squares the spectral quantity; the
    estimate becomes trivial at its endpoint, so it is off by default.
    """
    p = query.profile
    if p is None:
        raise InvalidProfile("subgaussian bound requires a SubgaussianProfile")
    family = f"subgaussian-{form}"
    gamma, K = query.gamma, p.K
    if form == "beta":
        b = query.beta ** 2 if extended else query.beta
    elif form == "alpha":
        b = query.alpha if extended else math.sqrt(query.alpha)
    else:
        raise ValueError(f"form must be 'beta' or 'alpha', got {form!r}")
    thr = subgaussian_threshold(b, p)
    cond = Condition("gamma <= subgaussian range", gamma <= thr,
                     f"gamma = {gamma:.12g}, limit = {thr:.12g}" + (" (extended)" if extended else ""))
    core = gamma ** 2 * K - math.log(p.C * math.sqrt(math.pi * K) * gamma + 2)
    if form == "beta":
        rate, log_pref = core / 2, math.log(query.q_norm)
    else:
        rate, log_pref = core, math.log(query.q_norm) + 2 * gamma * K
    cross = subgaussian_crossover(p)
    notes = () if core > 0 else (f"non-decaying exponent: needs gamma > {cross:.12g}",)
    extras = {"crossoverGamma": cross, "threshold": thr, "extended": extended}
    return _result(family, query, gamma * K, rate, log_pref, [cond], notes, extras)


def evaluate(query: BoundQuery, family: str, extended: bool = False) -> BoundResult:
    kind, _, form = family.rpartition("-")
    if family == "simplified-alpha":
        return simplified_bound(query)
    if kind == "theorem1":
        return theorem1_bound(query, form)
    if kind == "bennett":
        return bennett_bound(query, form)
    if kind == "bernstein":
        return bernstein_bound(query, form)
    if kind == "subgaussian":
        return subgaussian_bound(query, form, extended)
    raise ValueError(f"unknown bound family {family!r}")


def evaluate_all(query: BoundQuery, families=None, extended: bool = False) -> list[BoundResult]:
    if families is None:
        families = BOUNDED_FAMILIES + (SUBGAUSSIAN_FAMILIES if query.profile is not None else ())
    out = []
    for fam in families:
        if fam.startswith("bennett") and query.V <= 0:
            out.append(_infeasible(fam, query, [Condition("V > 0", False, "zero variance")]))
            continue
        out.append(evaluate(query, fam, extended))
    return out


def best_result(results) -> BoundResult | None:
    feasible = [r for r in results if r.feasible]
    return min(feasible, key=lambda r: r.value) if feasible else None


# ---------------------------------------------------------------------------
# Subgaussian profile checks


@dataclass(frozen=True)
class SubgaussianCheck:
    passed: bool
    worst_margin: float
    thresholds: tuple


def verify_subgaussian(f, s, profile: SubgaussianProfile, tol: float = 1e-12) -> SubgaussianCheck:
    """Check ``s(f >= t) <= C exp(-K t^2)`` at every positive value of ``f``.

    The tail is a left-continuous step function with jumps at the values of
    ``f`` and the profile decreases, so these thresholds suffice.
    """
    f = np.asarray(getattr(f, "values", f), dtype=float)
    s = np.asarray(s, dtype=float)
    ts = np.unique(f[f > 0])
    margins = [profile.C * math.exp(-profile.K * t * t) - float(s[f >= t].sum()) for t in ts]
    worst = min(margins) if margins else math.inf
    return SubgaussianCheck(passed=worst >= -tol, worst_margin=worst, thresholds=tuple(ts.tolist()))


def fit_subgaussian_C(f, s, K: float) -> float:
    """Smallest ``C`` for which the profile holds at rate ``K``."""
    f = np.asarray(getattr(f, "values", f), dtype=float)
    s = np.asarray(s, dtype=float)
    ts = np.unique(f[f > 0])
    if ts.size == 0:
        return 0.0
    return max(float(s[f >= t].sum()) * math.exp(K * t * t) for t in ts)


def fit_subgaussian(f, s, K_grid=None) -> list[tuple[float, float]]:
    """``(C, K)`` pairs along a grid of rates."""
    if K_grid is None:
        K_grid = np.geomspace(1e-2, 1e2, 41)
    return [(fit_subgaussian_C(f, s, float(K)), float(K)) for K in K_grid]


# ---------------------------------------------------------------------------
# Sample-size planning


@dataclass(frozen=True)
class SamplePlan:
    family: str
    n: int
    value: float
    comparison: dict
    best_family: str | None
    best_n: int | None

    def to_dict(self) -> dict:
        return {
            "family": self.family, "n": self.n, "value": self.value,
            "comparison": self.comparison, "bestFamily": self.best_family, "bestN": self.best_n,
        }


def _smallest_n(query: BoundQuery, family: str, epsilon: float, extended: bool):
    value = lambda n: evaluate(query.with_n(n), family, extended).value
    at_n = {}

    def ok(n):
        at_n[n] = value(n)
        return at_n[n] <= epsilon

    if ok(1):
        return 1, at_n[1]
    if not evaluate(query.with_n(1), family, extended).feasible:
        raise InfeasibleTarget(f"{family}: side conditions fail, the bound is trivial for every n")
    lo, hi = 1, 2
    while not ok(hi):
        lo, hi = hi, 2 * hi
        if hi > N_CEILING:
            raise InfeasibleTarget(f"{family}: no n <= 2^53 reaches epsilon = {epsilon}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi, at_n[hi]


def compare_plans(query: BoundQuery, epsilon: float, families, extended: bool = False) -> dict:
    """``{family: {"n", "value"}}``, or ``{"n": None, "reason"}`` when the target is out of reach."""
    if not 0 < epsilon < 1:
        raise BoundError(f"epsilon must lie in (0, 1), got {epsilon}")
    comparison = {}
    for fam in dict.fromkeys(families):
        if fam.startswith("bennett") and query.V <= 0:
            comparison[fam] = {"n": None, "reason": f"{fam}: zero variance"}
            continue
        try:
            n, v = _smallest_n(query, fam, epsilon, extended)
            comparison[fam] = {"n": n, "value": v}
        except InfeasibleTarget as exc:
            comparison[fam] = {"n": None, "reason": str(exc)}
    return comparison


def best_plan(comparison: dict):
    """``(family, n)`` with the smallest reachable ``n``, ties broken by name; ``(None, None)`` if none."""
    reachable = {k: v["n"] for k, v in comparison.items() if v["n"] is not None}
    if not reachable:
        return None, None
    best = min(reachable, key=lambda k: (reachable[k], k))
    return best, reachable[best]


def plan_samples(family: str, query: BoundQuery, epsilon: float, families=None,
                 extended: bool = False) -> SamplePlan:
    """Smallest ``n`` with ``bound(n) <= epsilon`` for ``family``, plus a cross-family comparison.

    ``query.n`` is ignored. The binary search keeps ``bound(hi) <= epsilon <
    bound(lo)``, so the returned ``n`` always brackets exactly.
    """
    if families is None:
        families = BOUNDED_FAMILIES + (SUBGAUSSIAN_FAMILIES if query.profile is not None else ())
    comparison = compare_plans(query, epsilon, tuple(families) + (family,), extended)
    if comparison[family]["n"] is None:
        raise InfeasibleTarget(comparison[family]["reason"])
    best, best_n = best_plan(comparison)
    return SamplePlan(family=family, n=comparison[family]["n"], value=comparison[family]["value"],
                      comparison=comparison, best_family=best, best_n=best_n)
