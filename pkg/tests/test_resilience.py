import json
import random
from fractions import Fraction

import pytest

from mevcommit.contract_dsl import builtin_sweetened, builtin_theorem2, parse
from mevcommit.equilibrium import EXHAUSTIVE, RAW_ACTIONS, enumerate_equilibria, is_equilibrium
from mevcommit.errors import ContractCompileError
from mevcommit.game_core import Decision, GameTree, StrategyProfile, leaf
from mevcommit.popsicle import PopsicleParams, build_popsicle
from mevcommit.resilience import (
    Compliance, all_orderings, build_attack_game, check_game_resilience, check_resilience,
    compilable, default_orderings, paper_ordering, vanilla_utilities, verify_attack,
)

from conftest import fig2_game

F = Fraction


def test_attack_n2(attack_params):
    rep = verify_attack(attack_params)
    assert rep.verdict
    assert rep.utilities == (0, 1, 0)
    assert all(rep.checks.values())
    assert rep.raw_only.verdict and rep.spe.verdict
    assert "vendor 2 commits p2=1/2: u2=0 (undercut)" in rep.trace


def test_attack_sweetened():
    p = PopsicleParams(2, "1/2", "1/4", prices="0,1/2,1", q_grid="0,3/4,1")
    rep = verify_attack(p, builtin_sweetened(p, "1/4"))
    assert rep.verdict
    assert rep.utilities == (F(1, 4), F(3, 4), 0)


def test_attack_untaxed_three_vendors():
    p = PopsicleParams(3, "1/2", 0, prices="0,1/2,1", q_grid="0,1")
    rep = verify_attack(p)
    assert rep.verdict and rep.utilities == (0, 1, 0, 0)


def test_attack_invariant_to_more_constant_prices():
    p = PopsicleParams(2, "1/2", "1/4", prices="0,1/4,1/2,1", q_grid="0,1")
    rep = verify_attack(p)
    assert rep.verdict and rep.utilities == (0, 1, 0)


def test_alternative_compliance_reading_fails(attack_params):
    # other vendors pricing at 0 leave the buyer a free outside option
    comp = Compliance(((2, F(0)),), (1, F(1)))
    rep = verify_attack(attack_params, compliance=comp)
    assert not rep.verdict
    assert rep.equilibrium.witness.player == 0
    assert rep.equilibrium.witness.gain == 1


def test_attack_requires_vendor1_contract(attack_params):
    c = parse("owner 2\nif committed(1) != 1 then commit_price(0) else commit_price(1)", attack_params)
    with pytest.raises(ContractCompileError):
        verify_attack(attack_params, c)


def test_report_serializes(attack_params):
    doc = json.loads(verify_attack(attack_params).dumps())
    assert doc["verdict"] is True
    assert doc["utilities"] == ["0/1", "1/1", "0/1"]
    assert doc["equilibrium"]["scope"] == "exhaustive"


def test_raw_failure_implies_exhaustive_failure(attack_params):
    ex = build_attack_game(attack_params, builtin_theorem2(attack_params))
    rng = random.Random(1)
    seen = 0
    for _ in range(40):
        prof = StrategyProfile.pure({s: rng.choice(i.actions) for s, i in ex.tree.info_sets.items()})
        if not is_equilibrium(ex.tree, prof, RAW_ACTIONS).verdict:
            seen += 1
            assert not is_equilibrium(ex.tree, prof, EXHAUSTIVE).verdict
    assert seen


def test_not_resilient(attack_params):
    rep = check_resilience(attack_params)
    assert rep.verdict == "not resilient (schema-witnessed)"
    assert not rep.resilient
    w = rep.witness
    assert w["ordering"] == [1, 2, 0]
    assert w["utilities"] == ["0/1", "1/1", "0/1"]
    assert w["verified_equilibrium"] is True
    assert (0, 1, 0) not in rep.vanilla
    rows = rep.csv().splitlines()
    assert rows[0] == "ordering,commitments,utilities,matches_vanilla"
    assert any('"(0, 1, 0)",no' in r for r in rows)


def test_contract_skipped_when_ordering_does_not_allow_it(attack_params):
    rep = check_resilience(attack_params, orderings=[(0, 2, 1)])
    assert rep.results[0].skipped == ["contract[1]"]
    assert not compilable(builtin_theorem2(attack_params), (0, 2, 1), 2)
    assert compilable(builtin_theorem2(attack_params), (1, 2, 0), 2)


def test_constant_price_schema_compared_with_vanilla_set():
    p = PopsicleParams(2, 1, "1/4", prices="0,1", q_grid="0,1")
    vanilla = vanilla_utilities(p)
    brute = {rep.utilities for _, rep in
             enumerate_equilibria(build_popsicle(p), refinement="spe", mixtures=True)}
    assert vanilla == brute
    rep = check_resilience(p, orderings=[(2, 1, 0)], contracts=[])
    for u, _, ok in rep.results[0].outcomes:
        assert ok == (u in vanilla)


def test_orderings_validated(attack_params):
    with pytest.raises(ValueError):
        check_resilience(attack_params, orderings=[(1, 2)])


def test_ordering_helpers():
    assert paper_ordering(3) == (1, 2, 3, 0)
    assert default_orderings(2) == [(1, 2, 0), (0, 2, 1)]
    assert len(all_orderings(2)) == 6


def test_constant_game_is_resilient():
    c = leaf(1, 1, 1)
    tree = GameTree(Decision(1, "a", (0, 1), (Decision(2, "b", (0, 1), (c, c)), c)), 3)
    rep = check_game_resilience(tree)
    assert rep.resilient and rep.witness is None
    assert len(rep.results) == 6


def test_single_mover_is_resilient():
    tree = GameTree(Decision(0, "a", (0, 1), (Decision(0, "b", (0, 1), (leaf(1, 0), leaf(2, 5))),
                                              leaf(0, 9))), 2)
    assert check_game_resilience(tree).resilient


def test_fig2_game_not_resilient():
    rep = check_game_resilience(fig2_game(), orderings=[(2, 1, 0)])
    assert rep.verdict == "not resilient"
    assert rep.witness["utilities"] == ["0/1", "2/1", "1/1"]
    assert rep.to_dict()["params"] is None
