"""Verify the conditional-contract attack and its sweetened variant on small instances."""
from fractions import Fraction

from mevcommit.contract_dsl import builtin_sweetened, builtin_theorem2, pretty
from mevcommit.popsicle import PopsicleParams
from mevcommit.resilience import check_resilience, verify_attack

if __name__ == "__main__":
    for n, alpha in [(2, "1/4"), (3, "1/4"), (3, "0")]:
        p = PopsicleParams(n, "1/2", alpha, prices="0,1/2,1", q_grid="0,1")
        rep = verify_attack(p, builtin_theorem2(p))
        print(f"n={n} alpha={alpha}: {'ok' if rep.verdict else 'FAILED'}")
        for line in rep.trace:
            print("   ", line)
    p = PopsicleParams(2, "1/2", "1/4", prices="0,1/2,1", q_grid="0,3/4,1")
    c = builtin_sweetened(p, Fraction(1, 4))
    print(pretty(c))
    rep = verify_attack(p, c)
    print("sweetened:", "ok" if rep.verdict else "FAILED", rep.trace[4])
    p = PopsicleParams(2, "1/2", "1/4", prices="0,1/2,1", q_grid="0,1")
    print(check_resilience(p).dumps())
