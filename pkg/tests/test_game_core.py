import json
from fractions import Fraction

import pytest

from mevcommit.errors import GameStructureError, ProfileError
from mevcommit.game_core import (
    Decision, GameTree, StrategyProfile, check_profile, dumps_game, expected_utility,
    has_perfect_recall, leaf, list_subgames, loads_game, play, validate_game,
)
from mevcommit.popsicle import PopsicleParams, build_popsicle

F = Fraction


def test_single_leaf_is_valid():
    assert validate_game(GameTree(leaf(1, 2, 3), 3)).ok


def test_action_count_mismatch_reported():
    a = Decision(1, "s", (0, 1), (leaf(0, 0), leaf(1, 1)))
    b = Decision(1, "s", (0, 1, 2), (leaf(0, 0), leaf(1, 1), leaf(2, 2)))
    tree = GameTree(Decision(0, "r", (0, 1), (a, b)), 2)
    rep = validate_game(tree)
    assert not rep.ok
    assert any(p.startswith("action-count mismatch") for p in rep.problems)


def test_fig2_game_is_valid(fig2):
    assert validate_game(fig2).ok
    assert fig2.size == 5


@pytest.mark.parametrize("tree,needle", [
    (GameTree(leaf(1, 2), 3), "utility arity"),
    (GameTree(Decision(0, "r", (0,), (Decision(1, "r", (0,), (leaf(0, 0),)),)), 2), "owner mismatch"),
    (GameTree(Decision(0, "r", (0,), (Decision(0, "r", (0,), (leaf(0, 0),)),)), 2), "same-path"),
    (GameTree(Decision(5, "r", (0,), (leaf(0, 0),)), 2), "owner out of range"),
    (GameTree(Decision(0, "r", (0, 0), (leaf(0, 0), leaf(1, 1))), 2), "duplicate labels"),
])
def test_constructed_violations(tree, needle):
    rep = validate_game(tree)
    assert any(needle in p for p in rep.problems), rep.problems


def test_play_leaf_only():
    assert play(GameTree(leaf(3, 4), 2), StrategyProfile()) == (3, 4)


def test_play_perfect_competition():
    p = PopsicleParams(2, 1, 0, prices="0,1/2,1", q_grid="0,1")
    tree = build_popsicle(p)
    prof = StrategyProfile.pure({"v1": 0, "v2": 0, "b:0.0": p.buyer_label(1, 0)})
    assert play(tree, prof) == (1, 0, 0)


def test_play_hand_evaluated_leaf(small_params):
    # u0 = (1 - 1/2) * 1 = 1/2, u1 = (3/4)(1/2) = 3/8
    tree = build_popsicle(small_params)
    prof = StrategyProfile.pure({"v1": 1, "v2": 0, "b:1.0": 0})
    assert play(tree, prof) == (F(1, 2), F(3, 8), 0)


def test_play_missing_assignment():
    tree = GameTree(Decision(0, "r", (0,), (leaf(1),)), 1)
    with pytest.raises(ProfileError):
        play(tree, StrategyProfile())


def test_play_rejects_mixed():
    tree = GameTree(Decision(0, "r", (0, 1), (leaf(1), leaf(0))), 1)
    with pytest.raises(ProfileError):
        play(tree, StrategyProfile({"r": {0: F(1, 2), 1: F(1, 2)}}))


def test_expected_utility_buyer_mix(small_params):
    tree = build_popsicle(small_params)
    prof = StrategyProfile({"v1": 1, "v2": 0, "b:1.0": {0: F(1, 2), 1: F(1, 2)}})
    # vendor 1 at 1/2: (1/2, 3/8, 0); vendor 2 at 0: (1/2, 0, 0)
    assert expected_utility(tree, prof) == (F(1, 2), F(3, 16), 0)


def test_expected_utility_matches_play_on_pure(attack_params):
    tree = build_popsicle(attack_params)
    prof = StrategyProfile.pure({s: s_.actions[-1] for s, s_ in tree.info_sets.items()})
    assert expected_utility(tree, prof) == play(tree, prof)


def test_constant_game_any_profile():
    c = leaf(F(2, 3), F(2, 3))
    tree = GameTree(Decision(0, "r", (0, 1), (Decision(1, "s", (0, 1), (c, c)), c)), 2)
    prof = StrategyProfile({"r": {0: F(1, 3), 1: F(2, 3)}, "s": 1})
    assert expected_utility(tree, prof) == (F(2, 3), F(2, 3))


def test_check_profile():
    tree = GameTree(Decision(0, "r", (0, 1), (leaf(1), leaf(0))), 1)
    check_profile(tree, StrategyProfile({"r": {0: F(1, 2), 1: F(1, 2)}}))
    with pytest.raises(ProfileError):
        check_profile(tree, StrategyProfile({"r": {0: F(1, 2)}}))
    with pytest.raises(ProfileError):
        check_profile(tree, StrategyProfile({"r": 7}))


def test_list_subgames_perfect_information(fig2):
    assert set(list_subgames(fig2)) == set(fig2.nodes)


def test_list_subgames_popsicle(small_params):
    tree = build_popsicle(small_params)
    subs = list_subgames(tree)
    decisions = [p for p in subs if isinstance(tree.nodes[p], Decision)]
    assert subs[0] == ()
    # root plus the 9 buyer nodes; no vendor-2 node heads a subgame
    assert len(decisions) == 10
    assert all(len(p) in (0, 2) for p in decisions)


def test_perfect_recall(small_params):
    assert has_perfect_recall(build_popsicle(small_params), 2)


def test_serialization_round_trip(attack_params):
    tree = build_popsicle(attack_params)
    text = dumps_game(tree)
    again = loads_game(text)
    assert again == tree
    assert dumps_game(again) == text
    doc = json.loads(text)
    assert doc["info_sets"]["v2"] == {"owner": 2, "action_count": 3}
    assert doc["root"]["children"][0]["children"][0]["children"][0]["utilities"] == ["1/1", "0/1", "0/1"]


def test_serialization_rejects_bad_declaration(fig2):
    doc = json.loads(dumps_game(fig2))
    doc["info_sets"]["p2"]["owner"] = 1
    with pytest.raises(GameStructureError):
        loads_game(json.dumps(doc))
