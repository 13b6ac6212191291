"""Reversible chains: construction, stationary law, spectrum, observables.

Storage convention throughout the package: ``P[i, j]`` is the probability of
moving from state ``j`` to state ``i``, so every *column* of ``P`` sums to 1
and the stationary vector satisfies ``P @ s == s``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components

STRUCTURAL_TOL = 1e-10
SPECTRAL_TOL = 1e-9
NORMALIZATION_TOL = 1e-12
EIGEN_ZERO = 1e-14


class ChainError(ValueError):
    """Base class for invalid chain or observable input."""


class DisconnectedGraph(ChainError):
    pass


class NotStochastic(ChainError):
    pass


class NotReversible(ChainError):
    pass


class NonPositiveStationary(ChainError):
    pass


class Reducible(ChainError):
    pass


class NotConverged(ArithmeticError):
    pass


class ConstantFunction(ChainError):
    pass


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ChainSpec:
    """Raw chain input: either an undirected weighted edge list or a matrix.

    ``matrix`` follows the column-stochastic convention (``matrix[i][j]`` is
    the probability of j -> i).
    """

    states: int
    edges: tuple | None = None
    matrix: tuple | None = None
    stationary: tuple | None = None

    def __post_init__(self):
        if self.states < 2:
            raise ChainError(f"need at least 2 states, got {self.states}")
        if (self.edges is None) == (self.matrix is None):
            raise ChainError("exactly one of 'edges' or 'matrix' must be given")
        if self.edges is not None:
            for u, v, w in self.edges:
                if not (0 <= u < self.states and 0 <= v < self.states):
                    raise ChainError(f"edge ({u}, {v}) out of range for {self.states} states")
                if not w > 0:
                    raise ChainError(f"edge ({u}, {v}) has non-positive weight {w}")
        if self.stationary is not None and self.matrix is None:
            raise ChainError("'stationary' is only accepted together with 'matrix'")

    @classmethod
    def from_dict(cls, data: dict) -> "ChainSpec":
        if not isinstance(data, dict) or "states" not in data:
            raise ChainError("chain description must be an object with a 'states' field")
        edges = data.get("edges")
        matrix = data.get("matrix")
        stationary = data.get("stationary")
        return cls(
            states=int(data["states"]),
            edges=None if edges is None else tuple((int(u), int(v), float(w)) for u, v, w in edges),
            matrix=None if matrix is None else tuple(tuple(float(x) for x in row) for row in matrix),
            stationary=None if stationary is None else tuple(float(x) for x in stationary),
        )

    def to_dict(self) -> dict:
        out = {"states": self.states}
        if self.edges is not None:
            out["edges"] = [list(e) for e in self.edges]
        else:
            out["matrix"] = [list(row) for row in self.matrix]
            if self.stationary is not None:
                out["stationary"] = list(self.stationary)
        return out


@dataclass(frozen=True, eq=False)
class ReversibleChain:
    P: np.ndarray
    s: np.ndarray
    spec: ChainSpec | None = field(default=None, repr=False)

    @property
    def n_states(self) -> int:
        return self.P.shape[0]


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    alpha: float
    beta: float

    @property
    def bipartite(self) -> bool:
        return self.beta >= 1.0 - SPECTRAL_TOL


@dataclass(frozen=True, eq=False)
class ObservableFunction:
    """A centred observable together with the affine map from user scale.

    ``values == (raw - shift) / scale``.
    """

    values: np.ndarray
    variance: float
    max_abs: float
    mean_under_s: float
    mode: str = "bounded"
    shift: float = 0.0
    scale: float = 1.0

    def to_user_threshold(self, gamma: float) -> float:
        """Threshold on the raw running average equivalent to ``S_n/n > gamma``."""
        return self.shift + self.scale * gamma

    def from_user_threshold(self, threshold: float) -> float:
        return (threshold - self.shift) / self.scale


@dataclass(frozen=True, eq=False)
class InitialDistribution:
    q: np.ndarray
    q_norm: float


def weighted_norm(u, s) -> float:
    """``sqrt(sum u_i^2 / s_i)``, the norm under which ``P`` is self-adjoint."""
    u = np.asarray(u, dtype=float)
    s = np.asarray(s, dtype=float)
    return float(np.sqrt(np.sum(u * u / s)))


def _strongly_connected(adjacency: np.ndarray) -> bool:
    n_comp, _ = connected_components(adjacency > 0, directed=True, connection="strong")
    return n_comp == 1


def stationary(P) -> np.ndarray:
    """Unique stationary vector of an irreducible column-stochastic matrix.

    Solves ``(P - I) s = 0`` with the last equation replaced by ``sum(s) = 1``.
    """
    P = np.asarray(P, dtype=float)
    N = P.shape[0]
    if not _strongly_connected(P):
        raise Reducible("transition support graph is not strongly connected")
    A = P - np.eye(N)
    A[-1, :] = 1.0
    b = np.zeros(N)
    b[-1] = 1.0
    s = np.linalg.solve(A, b)
    if np.any(s <= 0):
        raise NonPositiveStationary(f"stationary solve produced non-positive entries: {s}")
    return s / s.sum()


def _check_reversible(P: np.ndarray, s: np.ndarray, tol: float = STRUCTURAL_TOL):
    if np.any(s <= 0):
        raise NonPositiveStationary("stationary distribution must be strictly positive")
    if abs(s.sum() - 1.0) > NORMALIZATION_TOL:
        raise NonPositiveStationary(f"stationary distribution sums to {s.sum()!r}, not 1")
    resid = np.max(np.abs(P @ s - s))
    if resid > tol:
        raise NotReversible(f"supplied vector is not stationary (residual {resid:.3e})")
    flow = P * s[None, :]  # flow[i, j] = s_j P_ij
    resid = np.max(np.abs(flow - flow.T))
    if resid > tol:
        raise NotReversible(f"detailed balance violated (residual {resid:.3e})")


def build_chain(spec: ChainSpec) -> ReversibleChain:
    N = spec.states
    if spec.edges is not None:
        W = np.zeros((N, N))
        for u, v, w in spec.edges:
            W[u, v] += w
            if u != v:
                W[v, u] += w
        if not _strongly_connected(W):
            raise DisconnectedGraph("edge list does not connect all states")
        deg = W.sum(axis=0)
        P = W / deg[None, :]
        s = deg / deg.sum()
    else:
        P = np.array(spec.matrix, dtype=float)
        if P.shape != (N, N):
            raise NotStochastic(f"matrix has shape {P.shape}, expected ({N}, {N})")
        if np.any(P < 0):
            raise NotStochastic("matrix has negative entries")
        col = P.sum(axis=0)
        bad = np.flatnonzero(np.abs(col - 1.0) > STRUCTURAL_TOL)
        if bad.size:
            raise NotStochastic(f"column {bad[0]} sums to {col[bad[0]]!r}")
        if spec.stationary is not None:
            s = np.array(spec.stationary, dtype=float)
            if s.shape != (N,):
                raise NonPositiveStationary(f"stationary vector has length {s.size}, expected {N}")
        else:
            s = stationary(P)
    _check_reversible(P, s)
    return ReversibleChain(P=_frozen(P), s=_frozen(s), spec=spec)


def chain_from_matrix(P, s=None) -> ReversibleChain:
    P = np.asarray(P, dtype=float)
    return build_chain(ChainSpec(
        states=P.shape[0],
        matrix=tuple(map(tuple, P.tolist())),
        stationary=None if s is None else tuple(np.asarray(s, dtype=float).tolist()),
    ))


def chain_from_edges(n_states: int, edges) -> ReversibleChain:
    return build_chain(ChainSpec(states=n_states, edges=tuple((int(u), int(v), float(w)) for u, v, w in edges)))


def jacobi_eigh(A, tol: float = 1e-12, max_sweeps: int = 100):
    """Cyclic Jacobi diagonalisation of a symmetric matrix.

    Returns ``(eigenvalues, eigenvectors)`` unsorted; columns of the second
    array are the eigenvectors. Sweeps stop once the off-diagonal Frobenius
    norm is below ``tol`` times ``max(1, ||A||_F)``.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    scale = max(1.0, np.linalg.norm(A))
    for _ in range(max_sweeps):
        off = np.sqrt(2.0 * np.sum(np.triu(A, 1) ** 2))
        if off <= tol * scale:
            return np.diag(A).copy(), V
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                elif theta != 0:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                else:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                sn = t * c
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - sn * aq
                A[:, q] = sn * ap + c * aq
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - sn * rq
                A[q, :] = sn * rp + c * rq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                V[:, p] = c * vp - sn * V[:, q]
                V[:, q] = sn * vp + c * V[:, q]
    raise NotConverged(f"Jacobi did not converge in {max_sweeps} sweeps")


def symmetrized(chain: ReversibleChain) -> np.ndarray:
    """``D^{-1/2} P D^{1/2}``, symmetric for a reversible chain."""
    r = np.sqrt(chain.s)
    M = chain.P * r[None, :] / r[:, None]
    return 0.5 * (M + M.T)


def spectrum(chain: ReversibleChain) -> Spectrum:
    lam, _ = jacobi_eigh(symmetrized(chain))
    lam = np.sort(lam)[::-1]
    # rotation round-off leaves ~1e-17 where the exact value is 0
    snap = lambda x: 0.0 if x < EIGEN_ZERO else min(x, 1.0)
    alpha = snap(lam[1])
    beta = snap(max(abs(lam[1]), abs(lam[-1])))
    return Spectrum(eigenvalues=_frozen(lam), alpha=float(alpha), beta=float(beta))


def normalize_function(raw, chain: ReversibleChain, mode: str = "bounded") -> ObservableFunction:
    """Centre ``raw`` under ``s`` and, in bounded mode, rescale to max-abs 1.

    Already-normalised input is passed through with the identity map, which
    makes the operation idempotent.
    """
    if mode not in ("bounded", "subgaussian"):
        raise ValueError(f"unknown mode {mode!r}")
    raw = np.asarray(raw, dtype=float)
    s = chain.s
    if raw.shape != s.shape:
        raise ChainError(f"function has {raw.size} values, chain has {s.size} states")
    mean = float(raw @ s)
    shift = mean if abs(mean) > 1e-15 else 0.0
    f = raw - shift
    scale = 1.0
    if mode == "bounded":
        m = float(np.max(np.abs(f)))
        if m <= 1e-15 * max(1.0, float(np.max(np.abs(raw)))):
            raise ConstantFunction("function is constant under the stationary distribution")
        if abs(m - 1.0) > 1e-15:
            scale = m
            f = f / m
    return ObservableFunction(
        values=_frozen(f),
        variance=float(f * f @ s),
        max_abs=float(np.max(np.abs(f))),
        mean_under_s=float(f @ s),
        mode=mode,
        shift=shift,
        scale=scale,
    )


def as_observable(values, chain: ReversibleChain, mode: str = "bounded", tol: float = 1e-9) -> ObservableFunction:
    """Wrap an already-centred ``f`` without rescaling; rejects inputs needing normalisation."""
    f = np.asarray(values, dtype=float)
    if f.shape != chain.s.shape:
        raise ChainError(f"function has {f.size} values, chain has {chain.n_states} states")
    mean = float(f @ chain.s)
    if abs(mean) > tol:
        raise ChainError(f"function is not centred under s (mean {mean:.3g}); use normalisation")
    m = float(np.max(np.abs(f)))
    if mode == "bounded" and m > 1 + tol:
        raise ChainError(f"bounded mode needs max |f| <= 1, got {m:.12g}; use normalisation")
    if m == 0:
        raise ConstantFunction("function is identically zero")
    return ObservableFunction(values=_frozen(f), variance=float(f * f @ chain.s), max_abs=m,
                              mean_under_s=mean, mode=mode)


def initial_distribution(q, chain: ReversibleChain) -> InitialDistribution:
    q = np.asarray(q, dtype=float)
    if q.shape != chain.s.shape:
        raise ChainError(f"initial distribution has {q.size} entries, chain has {chain.n_states} states")
    if np.any(q < 0) or abs(q.sum() - 1.0) > NORMALIZATION_TOL:
        raise ChainError("initial distribution must be non-negative and sum to 1")
    return InitialDistribution(q=_frozen(q), q_norm=weighted_norm(q, chain.s))


def load_chain(path) -> ReversibleChain:
    with open(path) as fh:
        data = json.load(fh)
    return build_chain(ChainSpec.from_dict(data))


def load_vector(path) -> np.ndarray:
    """Read a JSON array or a CSV file with one value per line."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("["):
        values = json.loads(text)
    else:
        values = [float(line.split(",")[0]) for line in text.splitlines() if line.strip()]
    return np.asarray(values, dtype=float)
