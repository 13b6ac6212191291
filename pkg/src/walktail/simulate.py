"""Seeded Monte Carlo random walks with exact binomial confidence intervals.

Randomness is counter based: the uniform for walk ``k`` at step ``t`` is a
hash of ``(seed, k, t)``. Walks therefore do not share state, and any
partition of the walk indices into batches (or threads) gives bit-identical
sums.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import beta as beta_dist

from .chain import ReversibleChain

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_STEP_KEY = np.uint64(0xD1B54A32D192ED03)


def _mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finaliser on a uint64 array (wrapping arithmetic)."""
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return z


def counter_bits(seed: int, walk_index, step: int) -> np.ndarray:
    """64 random bits keyed by ``(seed, walk_index, step)``."""
    walk_index = np.asarray(walk_index, dtype=np.uint64)
    key = _mix64(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))[0]
    z = _mix64(key ^ (walk_index * _GOLDEN))
    offset = np.array([step], dtype=np.uint64) * _STEP_KEY + _GOLDEN
    return _mix64(z + offset)


def counter_uniform(seed: int, walk_index, step: int) -> np.ndarray:
    """Uniforms in ``[0, 1)`` with 53 random bits, built by integer ops only."""
    return (counter_bits(seed, walk_index, step) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def _draw(cum_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    # inverse CDF: number of cumulative entries <= u
    idx = (cum_rows <= u[:, None]).sum(axis=1)
    return np.minimum(idx, cum_rows.shape[1] - 1)


def walk_sums(chain: ReversibleChain, f, q, n: int, seed: int, walk_indices) -> np.ndarray:
    """``S_n`` for each listed walk; walk ``k`` only reads streams ``(seed, k, .)``."""
    fv = np.asarray(getattr(f, "values", f), dtype=float)
    qv = chain.s if q is None else np.asarray(getattr(q, "q", q), dtype=float)
    idx = np.asarray(walk_indices, dtype=np.uint64)
    cum_q = np.cumsum(qv)
    cum_cols = np.cumsum(chain.P, axis=0).T      # row j = CDF of the move out of j
    x = _draw(np.broadcast_to(cum_q, (idx.size, cum_q.size)), counter_uniform(seed, idx, 0))
    total = np.zeros(idx.size)
    for t in range(1, n + 1):
        x = _draw(cum_cols[x], counter_uniform(seed, idx, t))
        total += fv[x]
    return total


def walk(chain: ReversibleChain, f, q, n: int, seed: int, walk_index: int = 0) -> float:
    return float(walk_sums(chain, f, q, n, seed, [walk_index])[0])


def clopper_pearson(k: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    a = 1 - level
    lo = 0.0 if k == 0 else float(beta_dist.ppf(a / 2, k, trials - k + 1))
    hi = 1.0 if k == trials else float(beta_dist.ppf(1 - a / 2, k + 1, trials - k))
    return lo, hi


@dataclass(frozen=True)
class TailEstimate:
    gamma: float
    n: int
    trials: int
    seed: int
    count: int
    estimate: float
    ci_low: float
    ci_high: float

    def covers(self, p: float) -> bool:
        return self.ci_low <= p <= self.ci_high

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ciLow"] = d.pop("ci_low")
        d["ciHigh"] = d.pop("ci_high")
        return d


def empirical_tail(chain: ReversibleChain, f, q, gamma: float, n: int, trials: int, seed: int,
                   batch: int = 50_000) -> TailEstimate:
    """Fraction of ``trials`` walks with ``S_n / n > gamma`` and its 95% Clopper-Pearson interval."""
    if trials < 1 or n < 1:
        raise ValueError("need trials >= 1 and n >= 1")
    threshold = n * gamma + 1e-12 * n
    count = 0
    for start in range(0, trials, batch):
        sums = walk_sums(chain, f, q, n, seed, np.arange(start, min(start + batch, trials)))
        count += int(np.count_nonzero(sums > threshold))
    lo, hi = clopper_pearson(count, trials)
    return TailEstimate(gamma=float(gamma), n=int(n), trials=int(trials), seed=int(seed), count=count,
                        estimate=count / trials, ci_low=lo, ci_high=hi)
