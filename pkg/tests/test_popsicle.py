from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, strategies as st

from mevcommit.equilibrium import is_subgame_perfect
from mevcommit.errors import BudgetExceeded, GridError
from mevcommit.game_core import Leaf, expected_utility, validate_game
from mevcommit.popsicle import (
    LINEAR, PopsicleParams, PopsicleProfile, buyer_best_response, buyer_value, build_popsicle,
    evaluate_profile, load_params, outcome_utilities, to_strategy_profile, tree_size,
    vanilla_equilibrium,
)

F = Fraction
GRID5 = "0,1/4,1/2,3/4,1"


@pytest.mark.parametrize("kwargs", [
    dict(n=1, d=1, alpha=0),
    dict(n=2, d=F(3, 2), alpha=0),
    dict(n=2, d=1, alpha=1),
    dict(n=2, d=1, alpha=0, prices="0,1/2"),
    dict(n=2, d=1, alpha=0, prices="1/2,0,1"),
    dict(n=2, d=1, alpha=0, q_grid="1/2,1"),
    dict(n=2, d=1, alpha=0, discount_mode=LINEAR),
    dict(n=2, d=1, alpha=0, discount_mode="exp"),
])
def test_params_rejected(kwargs):
    with pytest.raises(GridError):
        PopsicleParams(**kwargs)


def test_params_round_trip(tmp_path):
    p = PopsicleParams(3, "1/2", "1/4", prices=GRID5, q_grid="0,3/4,1",
                       discount_mode=LINEAR, kappa="1/8")
    path = tmp_path / "p.json"
    import json
    path.write_text(json.dumps(p.to_dict()))
    assert load_params(path) == p


def test_params_from_dict_rejects_decimal():
    with pytest.raises(GridError):
        PopsicleParams.from_dict({"n": 2, "d": "0.5"})


def test_tree_shape(attack_params):
    tree = build_popsicle(attack_params)
    leaves = [n for n in tree.nodes.values() if isinstance(n, Leaf)]
    assert len(leaves) == 36
    assert tree.size - len(leaves) == 1 + 3 + 9
    assert tree.size == tree_size(attack_params)
    assert validate_game(tree).ok
    assert len(tree.info_sets["v2"].members) == 3


def test_tree_without_side_payments():
    p = PopsicleParams(2, 1, 0, prices="0,1", q_grid="0", side_payments=False)
    tree = build_popsicle(p)
    assert sum(isinstance(n, Leaf) for n in tree.nodes.values()) == 8


def test_side_payments_disabled_ignores_q_grid():
    p = PopsicleParams(2, 1, 0, prices="0,1", q_grid="0,1", side_payments=False)
    assert p.buyer_q == (0,)
    assert tree_size(p) == 1 + 2 + 4 + 8


def test_leaf_utilities(attack_params):
    tree = build_popsicle(attack_params)
    # p = (1/2, 0), buyer picks vendor 1 with q = 0
    label = attack_params.buyer_label(1, 0)
    assert tree.nodes[(1, 0, label)].utilities == (F(1, 2), F(3, 8), 0)


def test_node_budget_guard(attack_params, monkeypatch):
    with pytest.raises(BudgetExceeded):
        build_popsicle(attack_params, budget=10)
    monkeypatch.setenv("MEVCOMMIT_NODE_BUDGET", "20")
    with pytest.raises(BudgetExceeded):
        build_popsicle(attack_params)


def test_linear_mode_is_unclamped():
    p = PopsicleParams(2, 1, 0, discount_mode=LINEAR, kappa="1/2")
    assert buyer_value(p, F(1), F(0), 2) == -1
    assert buyer_value(p, F(0), F(0), 1) == F(1, 2)


def test_evaluate_profile_examples():
    p = PopsicleParams(2, "1/2", "1/4", prices="0,1/2,1", q_grid="0,1")
    prof = PopsicleProfile((F(1, 2), F(0)), {(F(1, 2), F(0)): {(1, F(0)): F(1)}})
    assert evaluate_profile(p, prof) == (F(1, 2), F(3, 8), 0)
    # paying q = 1 to vendor 2 at price 1: buyer value -d
    prof = PopsicleProfile((F(0), F(1)), {(F(0), F(1)): {(2, F(1)): F(1)}})
    assert evaluate_profile(p, prof) == (-F(1, 2), 0, F(7, 4))


def test_evaluate_profile_off_grid(attack_params):
    prof = PopsicleProfile((F(1, 3), F(0)), {(F(1, 3), F(0)): {(1, F(0)): F(1)}})
    with pytest.raises(GridError):
        evaluate_profile(attack_params, prof)


def test_evaluate_profile_matches_tree_exhaustively():
    p = PopsicleParams(2, "1/2", "1/4", prices="0,1/2,1", q_grid="0,1")
    tree = build_popsicle(p)
    for prices in product(p.prices, repeat=2):
        for label in range(p.n * len(p.buyer_q)):
            choice = p.buyer_action(label)
            prof = PopsicleProfile(prices, {prices: {choice: F(1)}})
            assert evaluate_profile(p, prof) == expected_utility(tree, to_strategy_profile(p, prof))


@pytest.mark.parametrize("d,prices,expected", [
    ("1/2", (F(1, 2), F(0)), {(1, 0), (2, 0)}),
    ("1", (F(0), F(0), F(0)), {(1, 0), (2, 0), (3, 0)}),
    ("1/2", (F(0), F(0)), {(1, 0)}),
])
def test_buyer_best_response(d, prices, expected):
    p = PopsicleParams(len(prices), d, "1/4", prices="0,1/2,1", q_grid="0,1")
    assert buyer_best_response(p, prices) == expected


@given(st.lists(st.sampled_from([F(0), F(1, 4), F(1, 2), F(3, 4), F(1)]), min_size=2, max_size=4),
       st.integers(0, 3))
def test_best_response_monotone_in_own_price(prices, k):
    p = PopsicleParams(len(prices), "1/2", 0, prices=GRID5)
    i = k % len(prices)
    before = {v for v, _ in buyer_best_response(p, prices)}
    for higher in p.prices:
        if higher <= prices[i]:
            continue
        raised = list(prices)
        raised[i] = higher
        after = {v for v, _ in buyer_best_response(p, raised)}
        assert i + 1 not in after - before


@given(st.integers(2, 4), st.sampled_from([F(0), F(1, 4), F(1, 2), F(3, 4)]))
def test_equal_prices_earliest_vendor_when_discounting(n, price):
    # at price 1 every choice is worth 0, so only prices below 1 are checked
    p = PopsicleParams(n, "3/4", 0, prices=GRID5)
    assert buyer_best_response(p, [price] * n) == {(1, 0)}


@given(st.lists(st.sampled_from([F(0), F(1, 2), F(1)]), min_size=3, max_size=3))
def test_best_response_permutation_invariant_without_discount(prices):
    p = PopsicleParams(3, 1, 0, prices="0,1/2,1")
    br = buyer_best_response(p, prices)
    rev = buyer_best_response(p, prices[::-1])
    assert {(4 - v, q) for v, q in br} == rev


@pytest.mark.parametrize("n,alpha", [(3, "0"), (3, "1/2"), (2, "1/4")])
def test_vanilla_equilibrium_perfect_competition(n, alpha):
    p = PopsicleParams(n, 1, alpha, prices=GRID5)
    prof = vanilla_equilibrium(p)
    assert prof.prices == (0,) * n
    rep = is_subgame_perfect(build_popsicle(p), to_strategy_profile(p, prof))
    assert rep.verdict
    assert rep.utilities == (1,) + (0,) * n


def test_vanilla_equilibrium_discounting():
    p = PopsicleParams(2, "1/2", "1/4", prices="0,1/2,1")
    prof = vanilla_equilibrium(p)
    assert prof.prices == (F(1, 2), 0)
    rep = is_subgame_perfect(build_popsicle(p), to_strategy_profile(p, prof))
    assert rep.verdict
    assert rep.utilities == (F(1, 2), F(3, 8), 0)


def test_vanilla_equilibrium_grid_compatibility():
    with pytest.raises(GridError, match="grid-compatibility"):
        vanilla_equilibrium(PopsicleParams(2, "1/2", 0, prices="0,1"))


@given(st.lists(st.sampled_from([F(0), F(1, 2), F(1)]), min_size=2, max_size=2),
       st.integers(0, 1), st.sampled_from([F(0), F(1)]))
def test_welfare_identity(prices, vendor, q):
    p = PopsicleParams(2, 1, 0, prices="0,1/2,1", q_grid="0,1")
    assert sum(outcome_utilities(p, prices, vendor + 1, q)) == 1


@given(st.lists(st.sampled_from([F(0), F(1, 2), F(1)]), min_size=3, max_size=3), st.integers(1, 3))
def test_side_payment_neutrality(prices, vendor):
    p = PopsicleParams(3, 1, 0, prices="0,1/2,1", q_grid="0,1/2,1")
    totals = {sum(outcome_utilities(p, prices, vendor, q)) for q in p.q_grid}
    assert len(totals) == 1
