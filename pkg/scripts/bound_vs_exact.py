"""Tabulate every bound next to the exact tail and the optimal Chernoff value.

    python3 scripts/bound_vs_exact.py --states 6 --gamma 0.2 --seed 3
"""

import argparse

import numpy as np

from walktail import bounds as B
from walktail.chain import chain_from_matrix, normalize_function, spectrum
from walktail.oracle import chernoff_exact, exact_tail

FAMILIES = B.BETA_FAMILIES + B.ALPHA_FAMILIES


def random_chain(rng, N, laziness):
    W = rng.uniform(0.1, 1.0, (N, N))
    W = np.triu(W) + np.triu(W, 1).T
    P = W / W.sum(axis=0)
    return chain_from_matrix(laziness * np.eye(N) + (1 - laziness) * P)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--states", type=int, default=6)
    ap.add_argument("--gamma", type=float, default=0.2)
    ap.add_argument("--laziness", type=float, default=0.5)
    ap.add_argument("--ns", type=int, nargs="+", default=[2, 4, 8, 12, 16])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    chain = random_chain(rng, args.states, args.laziness)
    f = normalize_function(rng.integers(-3, 4, args.states), chain)
    sp = spectrum(chain)
    print(f"alpha={sp.alpha:.4f} beta={sp.beta:.4f} V={f.variance:.4f} gamma={args.gamma}")
    print("n".rjust(4), *(name.rjust(16) for name in ("exact", "chernoff", *FAMILIES)))
    for n in args.ns:
        q = B.BoundQuery.from_chain(sp, f, args.gamma, n)
        row = [exact_tail(chain, f, None, args.gamma, n), chernoff_exact(chain, f, None, args.gamma, n)[0]]
        row += [B.evaluate(q, fam).value for fam in FAMILIES]
        print(str(n).rjust(4), *(f"{v:16.6g}" for v in row))


if __name__ == "__main__":
    main()
