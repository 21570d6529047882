"""Seeded random micro games, cuts and profiles for oracle cross-checks."""
from __future__ import annotations

import random
from fractions import Fraction

from .commitment import Cut, owned_sets
from .game_core import Decision, GameTree, Leaf, StrategyProfile


def _utilities(rng: random.Random, players: int, denom: int) -> tuple[Fraction, ...]:
    # small numerators on purpose: ties exercise the keep-all paths
    return tuple(Fraction(rng.randint(0, denom), denom) for _ in range(players))


def random_perfect_info_game(rng: random.Random, max_decisions: int = 12, players: int = 2,
                             max_actions: int = 3, denom: int = 4) -> GameTree:
    budget = [rng.randint(1, max_decisions)]
    counter = [0]

    def grow(depth: int):
        if budget[0] <= 0 or (depth > 0 and rng.random() < 0.3):
            return Leaf(_utilities(rng, players, denom))
        budget[0] -= 1
        k = rng.randint(1, max_actions)
        name = f"n{counter[0]}"
        counter[0] += 1
        owner = rng.randrange(players)
        kids = tuple(grow(depth + 1) for _ in range(k))
        return Decision(owner, name, tuple(range(k)), kids)

    return GameTree(grow(0), players)


def random_imperfect_game(rng: random.Random, max_owned: int = 10, players: int = 2,
                          max_actions: int = 2, denom: int = 4, depth: int = 3) -> GameTree:
    """Layered game; same-layer nodes of one owner may share an information set.

    Player 0 owns at most ``max_owned`` decision nodes.
    """
    owned = [0]
    layers: dict[int, dict[tuple[int, int], int]] = {}
    fresh: dict[int, int] = {}

    def grow(level: int):
        if level == depth or (level > 0 and rng.random() < 0.25):
            return Leaf(_utilities(rng, players, denom))
        owner = rng.randrange(players)
        if owner == 0 and owned[0] >= max_owned:
            owner = 1 % players
            if owner == 0:
                return Leaf(_utilities(rng, players, denom))
        if owner == 0:
            owned[0] += 1
        k = rng.randint(1, max_actions)
        groups = layers.setdefault(level, {})
        key = (owner, k)
        if key in groups and rng.random() < 0.5:
            gid = groups[key]
        else:
            gid = fresh.get(level, 0)
            fresh[level] = gid + 1
            groups[key] = gid
        name = f"L{level}.p{owner}.g{gid}"
        kids = tuple(grow(level + 1) for _ in range(k))
        return Decision(owner, name, tuple(range(k)), kids)

    return GameTree(grow(0), players)


def random_cut(rng: random.Random, tree: GameTree, player: int) -> Cut:
    kept = {}
    for s in owned_sets(tree, player):
        acts = list(s.actions)
        size = rng.randint(1, len(acts))
        kept[s.id] = rng.sample(acts, size)
    return Cut.make(tree, player, kept, "random")


def random_pure_profile(rng: random.Random, tree: GameTree) -> StrategyProfile:
    return StrategyProfile.pure({s.id: rng.choice(s.actions) for s in tree.info_sets.values()})
