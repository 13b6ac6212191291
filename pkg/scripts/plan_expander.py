"""Walk length needed on a random regular graph versus independent sampling.

The graph is a union of random permutations and their inverses, so it is
regular and reversible with uniform stationary law. The observable is the
centred indicator of a random set of the given density.

    python3 scripts/plan_expander.py --nodes 200 --degree 8 --gamma 0.05
"""

import argparse

import numpy as np

from walktail import bounds as B
from walktail.chain import chain_from_edges, normalize_function, spectrum


def permutation_graph(rng, nodes, degree):
    edges = [(i, int(j), 1.0) for _ in range(degree // 2) for i, j in enumerate(rng.permutation(nodes))]
    return chain_from_edges(nodes, edges)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=200)
    ap.add_argument("--degree", type=int, default=8)
    ap.add_argument("--density", type=float, default=0.3)
    ap.add_argument("--gamma", type=float, default=0.05)
    ap.add_argument("--epsilon", type=float, default=1e-3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    chain = permutation_graph(rng, args.nodes, args.degree)
    sp = spectrum(chain)
    marked = (rng.random(args.nodes) < args.density).astype(float)
    f = normalize_function(marked, chain)
    print(f"nodes={args.nodes} degree={args.degree} alpha={sp.alpha:.4f} beta={sp.beta:.4f} "
          f"V={f.variance:.4f} scale={f.scale:.4f}")

    gamma = args.gamma / f.scale   # deviation of the indicator mean, in normalised units
    walk = B.BoundQuery.from_chain(sp, f, gamma, 1)
    independent = B.BoundQuery(gamma=gamma, n=1, V=f.variance, alpha=0.0, beta=0.0, f_max=f.max_abs)
    families = ("theorem1-beta", "theorem1-alpha", "bennett-beta", "bernstein-beta", "bernstein-alpha")
    print("family".ljust(18), "walk n".rjust(10), "iid n".rjust(10))
    for fam in families:
        a = B.compare_plans(walk, args.epsilon, [fam])[fam]["n"]
        b = B.compare_plans(independent, args.epsilon, [fam])[fam]["n"]
        print(fam.ljust(18), str(a).rjust(10), str(b).rjust(10))


if __name__ == "__main__":
    main()
