"""Canonical and enumerated equilibria of the game without commitments.

For each (n, d, alpha) prints the canonical profile's utilities, whether it is
subgame perfect, and every distinct utility vector of a pure SPE (buyer tie
mixtures included).
"""
import argparse

from mevcommit.equilibrium import SubgameSolver, is_subgame_perfect, utility_set
from mevcommit.popsicle import PopsicleParams, build_popsicle, to_strategy_profile, vanilla_equilibrium
from mevcommit.rational import fmt_vector, parse_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--prices", default="0,1/4,1/2,3/4,1")
    ap.add_argument("--d-list", default="1/4,1/2,3/4,1")
    ap.add_argument("--alpha-list", default="0,1/4,1/2")
    ap.add_argument("--n-list", default="2,3")
    args = ap.parse_args()
    for n in map(int, args.n_list.split(",")):
        for d in parse_grid(args.d_list):
            for a in parse_grid(args.alpha_list):
                p = PopsicleParams(n, d, a, prices=args.prices, q_grid="0,1")
                tree = build_popsicle(p)
                rep = is_subgame_perfect(tree, to_strategy_profile(p, vanilla_equilibrium(p)))
                spe = sorted(utility_set(SubgameSolver(tree, tie_mixtures=True).outcomes()))
                print(f"n={n} d={d} alpha={a}: canonical {fmt_vector(rep.utilities)} "
                      f"spe={'yes' if rep.verdict else 'no'}; {len(spe)} SPE utility vectors")
                for u in spe:
                    flag = "" if u[0] == (1 if d == 1 else d) else "  <- differs from the closed form"
                    print(f"    {fmt_vector(u)}{flag}")


if __name__ == "__main__":
    main()
