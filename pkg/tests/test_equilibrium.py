import random
from fractions import Fraction

import pytest

from mevcommit.equilibrium import (
    EXHAUSTIVE, FIRST_INDEX, RAW_ACTIONS, UNIFORM, EquilibriumReport, SubgameSolver, Witness,
    best_response, enumerate_equilibria, is_equilibrium, is_subgame_perfect, iter_pure_profiles,
    pure_profile_count, solve_backward_induction, spe_outcomes, utility_set,
)
from mevcommit.errors import BudgetExceeded, GameStructureError
from mevcommit.game_core import (
    Decision, GameTree, Leaf, StrategyProfile, expected_utility, leaf,
)
from mevcommit.micro import random_imperfect_game, random_perfect_info_game
from mevcommit.popsicle import (
    PopsicleParams, PopsicleProfile, best_response_policy, build_popsicle, to_strategy_profile,
    vanilla_equilibrium,
)

F = Fraction
GRID5 = "0,1/4,1/2,3/4,1"


def _buyer_on_vendor2_at(params, prices):
    policy = dict(best_response_policy(params, "first"))
    policy[prices] = {(2, F(0)): F(1)}
    return to_strategy_profile(params, PopsicleProfile(prices, policy))


def test_perfect_competition_is_equilibrium():
    p = PopsicleParams(2, 1, "1/4", prices=GRID5)
    prof = to_strategy_profile(p, vanilla_equilibrium(p))
    rep = is_equilibrium(build_popsicle(p), prof)
    assert rep.verdict and rep.witness is None
    assert rep.utilities == (1, 0, 0)


def test_undercut_witness():
    # on a grid the smallest undercut from 1/2 is 1/4; a single step above 0
    # (the continuous argument's (1/4, 1/4)) is already stable
    p = PopsicleParams(2, 1, "1/4", prices=GRID5)
    tree = build_popsicle(p)
    assert is_equilibrium(tree, _buyer_on_vendor2_at(p, (F(1, 4), F(1, 4)))).verdict
    rep = is_equilibrium(tree, _buyer_on_vendor2_at(p, (F(1, 2), F(1, 2))))
    assert not rep.verdict
    w = rep.witness
    assert w.player == 1
    assert w.deviation == {"v1": p.price_index(F(1, 4))}
    assert w.gain == F(3, 16)


def test_single_leaf():
    tree = GameTree(leaf(1, 2), 2)
    assert is_equilibrium(tree, StrategyProfile()).verdict
    assert is_subgame_perfect(tree, StrategyProfile()).verdict


def test_discounting_profile_is_spe():
    p = PopsicleParams(3, "1/2", "1/4", prices=GRID5)
    rep = is_subgame_perfect(build_popsicle(p), to_strategy_profile(p, vanilla_equilibrium(p)))
    assert rep.verdict and rep.kind == "spe"
    assert rep.utilities == (F(1, 2), F(3, 8), 0, 0)


def test_non_credible_threat():
    p = PopsicleParams(2, "1/2", "1/4", prices="0,1/2,1", q_grid="0")
    tree = build_popsicle(p)
    prof = to_strategy_profile(p, vanilla_equilibrium(p))
    # off path, at (0, 1/2), the buyer buys from the worse vendor 2
    off = p.price_index(0), p.price_index(F(1, 2))
    bad = prof.updated({f"b:{off[0]}.{off[1]}": p.buyer_label(2, 0)})
    assert is_equilibrium(tree, bad).verdict
    rep = is_subgame_perfect(tree, bad)
    assert not rep.verdict
    assert rep.witness.player == 0
    assert rep.witness.subgame == off


def test_report_invariants():
    with pytest.raises(ValueError):
        EquilibriumReport(False, (0,), "exhaustive")
    with pytest.raises(ValueError):
        EquilibriumReport(False, (0,), "exhaustive", witness=Witness(0, {}, F(0), F(0)))
    rep = EquilibriumReport(True, (F(1, 2),), "exhaustive")
    assert '"1/2"' in rep.dumps()


def test_witness_replay():
    rng = random.Random(3)
    checked = 0
    for _ in range(200):
        g = random_perfect_info_game(rng, players=3)
        prof = StrategyProfile.pure({s: rng.choice(i.actions) for s, i in g.info_sets.items()})
        rep = is_equilibrium(g, prof)
        if rep.verdict:
            continue
        w = rep.witness
        u = expected_utility(g, prof.updated(w.deviation))
        assert u[w.player] == w.deviation_utility
        assert u[w.player] - rep.utilities[w.player] == w.gain
        checked += 1
    assert checked > 50


def test_best_response_brute_force_agrees_on_imperfect_games():
    rng = random.Random(11)
    for _ in range(60):
        g = random_imperfect_game(rng, players=2)
        prof = StrategyProfile.pure({s: rng.choice(i.actions) for s, i in g.info_sets.items()})
        for player in range(2):
            v, dev = best_response(g, prof, player)
            brute = max(expected_utility(g, prof.updated(dict(zip(
                [s.id for s in g.info_sets_of(player)], combo))))[player]
                for combo in _combos(g, player))
            assert v == brute


def _combos(g, player):
    from itertools import product
    return product(*[s.actions for s in g.info_sets_of(player)])


def test_backward_induction_trivial():
    tree = GameTree(Decision(0, "r", (0, 1), (leaf(0, 1), leaf(1, 0))), 2)
    (prof,) = solve_backward_induction(tree)
    assert prof.action("r") == 1


def test_backward_induction_buyer_tie():
    p = PopsicleParams(2, "1/2", "1/4", prices="0,1/2,1", q_grid="0,1")
    tree = build_popsicle(p)
    sub = tree.subtree((1, 0))
    picks = {prof.action(sub.root.info_set) for prof in solve_backward_induction(sub)}
    assert {p.buyer_action(a) for a in picks} == {(1, 0), (2, 0)}
    (first,) = solve_backward_induction(sub, FIRST_INDEX)
    assert p.buyer_action(first.action(sub.root.info_set)) == (1, 0)
    (mixed,) = solve_backward_induction(sub, UNIFORM)
    assert len(mixed[sub.root.info_set]) == 2


def test_backward_induction_needs_perfect_information():
    p = PopsicleParams(2, 1, 0, prices="0,1", q_grid="0")
    with pytest.raises(GameStructureError):
        solve_backward_induction(build_popsicle(p))


def test_enumeration_duality():
    rng = random.Random(5)
    for _ in range(10):
        g = random_imperfect_game(rng, max_owned=4)
        eqs = {prof for prof, _ in enumerate_equilibria(g)}
        for prof in iter_pure_profiles(g):
            assert (prof in eqs) == is_equilibrium(g, prof).verdict


def test_enumeration_budget():
    p = PopsicleParams(2, 1, 0, prices=GRID5, q_grid="0,1")
    with pytest.raises(BudgetExceeded):
        list(iter_pure_profiles(build_popsicle(p), budget=1000))


def test_constant_game_every_profile_is_equilibrium():
    c = leaf(1, 1)
    tree = GameTree(Decision(0, "r", (0, 1), (Decision(1, "s", (0, 1), (c, c)), c)), 2)
    assert len(enumerate_equilibria(tree)) == pure_profile_count(tree) == 4


def test_perfect_competition_small_grid_contains_closed_form():
    p = PopsicleParams(2, 1, "1/4", prices="0,1", q_grid="0", side_payments=False)
    found = enumerate_equilibria(build_popsicle(p), refinement="spe")
    us = {rep.utilities for _, rep in found}
    assert (1, 0, 0) in us
    # with only {0, 1} a vendor at 1 cannot be undercut profitably
    assert us == {(1, 0, 0), (0, F(3, 4), 0), (0, 0, F(3, 4))}


def test_discounting_small_grid_contains_closed_form():
    p = PopsicleParams(2, "1/2", "1/4", prices="0,1/2,1", q_grid="0", side_payments=False)
    found = enumerate_equilibria(build_popsicle(p), refinement="spe")
    rows = {(prof.action("v1"), prof.action("v2"), rep.utilities) for prof, rep in found}
    assert (1, 0, (F(1, 2), F(3, 8), 0)) in rows
    # the buyer breaking the (1/2, 0) tie against vendor 1 sustains p = (0, 0)
    assert (0, 0, (1, 0, 0)) in rows
    assert all(u[0] >= F(1, 2) for _, _, u in rows)


def test_solver_matches_brute_force():
    p = PopsicleParams(2, "1/2", "1/4", prices="0,1/2,1", q_grid="0", side_payments=False)
    tree = build_popsicle(p)
    brute = {rep.utilities for _, rep in enumerate_equilibria(tree, refinement="spe")}
    outs = SubgameSolver(tree).outcomes()
    assert utility_set(outs) == brute
    for o in outs:
        assert is_subgame_perfect(tree, o.profile()).verdict


def test_solver_matches_brute_force_with_mixtures():
    p = PopsicleParams(2, "1", "1/4", prices="0,1/2,1", q_grid="0", side_payments=False)
    tree = build_popsicle(p)
    brute = {rep.utilities for _, rep in
             enumerate_equilibria(tree, refinement="spe", mixtures=True)}
    assert utility_set(SubgameSolver(tree, tie_mixtures=True).outcomes()) == brute


def test_vanilla_spe_never_pays_side_payment():
    p = PopsicleParams(2, "1/2", "1/4", prices="0,1/2,1", q_grid="0,1")
    tree = build_popsicle(p)
    for o in SubgameSolver(tree, tie_mixtures=True).outcomes():
        for iset, dist in o.profile().items():
            if iset.startswith("b:"):
                assert all(p.buyer_action(a)[1] == 0 for a in dist)


def test_raw_actions_scope_label():
    p = PopsicleParams(2, 1, 0, prices="0,1", q_grid="0")
    prof = to_strategy_profile(p, vanilla_equilibrium(p))
    assert is_equilibrium(build_popsicle(p), prof, RAW_ACTIONS).scope == "raw-actions-only"
    assert is_equilibrium(build_popsicle(p), prof, EXHAUSTIVE).scope == "exhaustive"


def test_scaling_a_players_utilities_keeps_verdicts():
    rng = random.Random(9)
    for _ in range(30):
        g = random_perfect_info_game(rng, max_decisions=6)
        prof = StrategyProfile.pure({s: rng.choice(i.actions) for s, i in g.info_sets.items()})

        def scale(node):
            if isinstance(node, Leaf):
                return Leaf((node.utilities[0] * 3,) + node.utilities[1:])
            return Decision(node.owner, node.info_set, node.actions,
                            tuple(scale(c) for c in node.children))
        scaled = GameTree(scale(g.root), g.players)
        assert is_subgame_perfect(g, prof).verdict == is_subgame_perfect(scaled, prof).verdict


@pytest.mark.parametrize("n,d", [(2, "1/2"), (2, "1"), (3, "1/4")])
def test_vanilla_equilibria_never_pay_the_vendor(n, d):
    p = PopsicleParams(n, d, "1/4", prices="0,1/4,1/2,3/4,1", q_grid="0,1")
    for o in spe_outcomes(build_popsicle(p), tie_mixtures=True):
        qs = {p.buyer_action(lab)[1] for s, dist in o.on_path().items()
              if s.startswith("b:") for lab in dist}
        assert qs == {0}
