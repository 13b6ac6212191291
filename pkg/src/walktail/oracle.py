"""Exact reference computations on small chains.

These are the ground truth every analytic bound is checked against: the
moment generating function of ``S_n``, its exact tail (by enumerating
trajectories or by a lattice dynamic program), the best Chernoff bound the
exact MGF allows, and the exact weighted operator norm of ``P e^{rf}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import big_delta, delta, optimize_r, InfeasibleR
from .chain import ReversibleChain, jacobi_eigh, spectrum

ENUMERATION_BUDGET = 2 ** 22
DP_BUDGET = 10 ** 8
DENOMINATOR_CAP = 10 ** 4


class OracleError(ValueError):
    pass


class TooLarge(OracleError):
    pass


class NoLatticeEmbedding(OracleError):
    pass


def _values(f) -> np.ndarray:
    return np.asarray(getattr(f, "values", f), dtype=float)


def _q(chain, q) -> np.ndarray:
    if q is None:
        return np.asarray(chain.s, dtype=float)
    return np.asarray(getattr(q, "q", q), dtype=float)


def _tie_threshold(gamma: float, n: int) -> float:
    # sums within 1e-12 * n of n * gamma count as not exceeding
    return n * gamma + 1e-12 * n


def log_mgf(chain: ReversibleChain, f, q, r, n: int):
    """``log E_q exp(r S_n)``; vectorised over an array of ``r``.

    Iterates ``v <- diag(e^{rf}) P v`` from ``v = q`` and rescales every step,
    so large ``r n`` does not overflow.
    """
    fv = _values(f)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    E = np.exp(np.outer(fv, r))                          # (N, R)
    v = np.repeat(_q(chain, q)[:, None], r.size, axis=1)
    acc = np.zeros(r.size)
    for _ in range(n):
        v = E * (chain.P @ v)
        tot = v.sum(axis=0)
        acc += np.log(tot)
        v = v / tot
    return acc


def mgf(chain: ReversibleChain, f, q, r: float, n: int) -> float:
    """``<s, (e^{rf} P)^n q>``, which equals ``E_q exp(r S_n)``."""
    fv = _values(f)
    v = _q(chain, q).copy()
    E = np.exp(r * fv)
    for _ in range(n):
        v = E * (chain.P @ v)
    return float(v.sum())


# ---------------------------------------------------------------------------
# Exact distribution of S_n


@dataclass(frozen=True)
class LatticeEmbedding:
    """``f(i) = offset + step * m(i)`` with integer ``m(i) >= 0``.

    ``step = span / denominator``; for rational ``f`` with ``offset == 0`` this
    is the usual ``m(i) / d`` embedding.
    """

    offset: float
    step: float
    m: np.ndarray
    denominator: int


def lattice_embedding(f, cap: int = DENOMINATOR_CAP, tol: float = 1e-12) -> LatticeEmbedding:
    fv = _values(f)
    lo = float(fv.min())
    span = float(fv.max()) - lo
    if span == 0:
        return LatticeEmbedding(lo, 1.0, np.zeros(fv.size, dtype=np.int64), 1)
    h = (fv - lo) / span
    for d in range(1, cap + 1):
        m = np.rint(h * d)
        step = span / d
        if np.all(np.abs(lo + step * m - fv) <= tol):
            return LatticeEmbedding(lo, step, m.astype(np.int64), d)
    raise NoLatticeEmbedding(f"no affine lattice with denominator <= {cap} fits f within {tol}")


def enumeration_size(n_states: int, n: int) -> int:
    return n_states ** (n + 1)


def dp_size(emb: LatticeEmbedding, n_states: int, n: int) -> int:
    return (n + 1) * n_states * (n * int(emb.m.max()) + 1)


def _tail_enumerate(chain, fv, q, gamma, n):
    N = chain.n_states
    size = enumeration_size(N, n)
    if size > ENUMERATION_BUDGET:
        raise TooLarge(f"enumeration needs N^(n+1) = {N}^{n + 1} = {size} > {ENUMERATION_BUDGET} trajectories")
    prob = q.copy()
    state = np.arange(N)
    total = np.zeros(N)
    for _ in range(n):
        # expand every path by every next state; P[i, j] = Pr(j -> i)
        prob = (prob[:, None] * chain.P[:, state].T).ravel()
        total = (total[:, None] + fv[None, :]).ravel()
        state = np.tile(np.arange(N), state.size)
    return float(prob[total > _tie_threshold(gamma, n)].sum())


def _lattice_table(chain, emb, q, n):
    """Forward recursion ``table[i, k]`` = Pr(X_n = i, sum of m over steps 1..n = k)."""
    width = n * int(emb.m.max()) + 1
    table = np.zeros((chain.n_states, width))
    table[:, 0] = q
    for _ in range(n):
        moved = chain.P @ table
        nxt = np.zeros_like(table)
        for i in range(chain.n_states):
            k = int(emb.m[i])
            nxt[i, k:] = moved[i, :width - k]
        table = nxt
    return n * emb.offset + emb.step * np.arange(width), table


def _tail_lattice(chain, fv, q, gamma, n, emb=None):
    emb = lattice_embedding(fv) if emb is None else emb
    size = dp_size(emb, chain.n_states, n)
    if size > DP_BUDGET:
        raise TooLarge(f"lattice DP needs (n+1)*N*(n*max m+1) = {size} > {DP_BUDGET} cells")
    sums, table = _lattice_table(chain, emb, q, n)
    return float(table[:, sums > _tie_threshold(gamma, n)].sum())


def exact_tail(chain: ReversibleChain, f, q, gamma: float, n: int, mode: str = "auto") -> float:
    """``P_q(S_n / n > gamma)`` computed exactly.

    ``mode`` is ``"enumerate"``, ``"lattice"`` or ``"auto"`` (enumeration
    when within budget, else the lattice DP). ``X_0 ~ q`` does not enter
    ``S_n``.
    """
    fv = _values(f)
    qv = _q(chain, q)
    if mode == "enumerate":
        return _tail_enumerate(chain, fv, qv, gamma, n)
    if mode == "lattice":
        return _tail_lattice(chain, fv, qv, gamma, n)
    if mode != "auto":
        raise ValueError(f"unknown mode {mode!r}")
    if gamma >= fv.max():
        return 0.0
    if enumeration_size(chain.n_states, n) <= ENUMERATION_BUDGET:
        return _tail_enumerate(chain, fv, qv, gamma, n)
    try:
        emb = lattice_embedding(fv)
    except NoLatticeEmbedding:
        raise TooLarge(
            f"enumeration needs {chain.n_states}^{n + 1} trajectories (budget {ENUMERATION_BUDGET}) "
            "and f has no lattice embedding for the DP"
        ) from None
    return _tail_lattice(chain, fv, qv, gamma, n, emb)


def exact_distribution(chain: ReversibleChain, f, q, n: int):
    """Law of ``S_n`` as ``(values, probabilities)`` via the lattice DP."""
    sums, table = _lattice_table(chain, lattice_embedding(_values(f)), _q(chain, q), n)
    return sums, table.sum(axis=0)


# ---------------------------------------------------------------------------
# Chernoff bound from the exact MGF


def chernoff_exact(chain: ReversibleChain, f, q, gamma: float, n: int):
    """``min_r exp(-r n gamma) E_q exp(r S_n)`` over the optimiser's grid.

    Returns ``(bound, r_star)``. Valid for every ``r >= 0``; comparing it to
    the analytic families isolates the looseness of the norm estimates.
    """
    gain = lambda r: n * gamma * np.asarray(r) - log_mgf(chain, f, q, r, n)
    r_star, g = optimize_r(gain, math.inf)
    return min(1.0, math.exp(-g)), r_star


# ---------------------------------------------------------------------------
# Weighted operator norm


def tilted_operator(chain: ReversibleChain, f, r: float) -> np.ndarray:
    """``D^{-1/2} P E D^{1/2}``: ``u -> P (e^{rf} u)`` in Euclidean coordinates."""
    d = np.sqrt(chain.s)
    E = np.exp(r * _values(f))
    return chain.P * (E * d)[None, :] / d[:, None]


def operator_norm(chain: ReversibleChain, f, r: float) -> float:
    """``||P e^{rf}||_{1/s}`` via the top eigenvalue of ``A^T A`` (Jacobi)."""
    A = tilted_operator(chain, f, r)
    G = A.T @ A
    lam, _ = jacobi_eigh(0.5 * (G + G.T))
    return float(math.sqrt(max(lam.max(), 0.0)))


@dataclass(frozen=True)
class NormCheck:
    r: float
    norm_squared: float
    bound: float
    ok: bool

    @property
    def gap(self) -> float:
        return self.bound - self.norm_squared


def norm_bound_value(V: float, beta: float, r: float) -> float:
    """``exp(V (e^{2r} - 1 - 2r + Delta(beta^2, r)))``."""
    exponent = V * (math.expm1(2 * r) - 2 * r + big_delta(beta * beta, r, V))
    return math.exp(exponent) if exponent < 709 else math.inf


def norm_bound_check(chain: ReversibleChain, f, r: float, beta: float | None = None,
                     rel_slack: float = 1e-9) -> NormCheck:
    """Compare the exact squared norm with the closed-form estimate at ``r``."""
    fv = _values(f)
    if beta is None:
        beta = spectrum(chain).beta
    V = float(fv * fv @ chain.s)
    if r > 0 and delta(beta * beta, r, V) >= 1:
        raise InfeasibleR(f"delta(beta^2, {r}) >= 1")
    lhs = operator_norm(chain, fv, r) ** 2
    rhs = norm_bound_value(V, beta, r)
    return NormCheck(r=r, norm_squared=lhs, bound=rhs, ok=lhs <= rhs * (1 + rel_slack))
