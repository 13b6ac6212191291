"""Tail bounds, exact oracles and simulation for sums along reversible random walks."""

from .chain import (
    ChainSpec, ReversibleChain, Spectrum, ObservableFunction, InitialDistribution,
    build_chain, chain_from_edges, chain_from_matrix, stationary, spectrum,
    normalize_function, weighted_norm, initial_distribution, load_chain, load_vector,
)
from .bounds import (
    BoundQuery, BoundResult, SubgaussianProfile, evaluate, evaluate_all, plan_samples,
    theorem1_bound, bennett_bound, bernstein_bound, simplified_bound, subgaussian_bound,
    verify_subgaussian,
)
from .oracle import mgf, exact_tail, chernoff_exact, operator_norm, norm_bound_check
from .simulate import empirical_tail, walk

__version__ = "0.1.0"
