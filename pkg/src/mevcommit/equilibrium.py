"""Verification and enumeration of Nash and subgame-perfect equilibria.

Everything is exact.  Verification computes each player's best response
against the fixed profile of the others; for players with perfect recall this
is a backward pass over their own information sets, otherwise a brute-force
sweep over their pure strategies.  Finite games with exact payoffs admit a
profitable pure deviation whenever they admit a profitable mixed one, so pure
best responses are a sound test.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Iterable, Iterator, Mapping

from .errors import BudgetExceeded, GameStructureError, ProfileError
from .game_core import (
    Decision,
    GameTree,
    Leaf,
    Node,
    Path,
    StrategyProfile,
    expected_utility,
    list_subgames,
)
from .rational import fmt

DEFAULT_PROFILE_BUDGET = 200_000

KEEP_ALL = "keep_all"
FIRST_INDEX = "first_index"
UNIFORM = "uniform"


@dataclass(frozen=True)
class DeviationSpace:
    """Which information sets a deviating player may re-choose.

    ``raw`` covers ordinary game moves, ``commitment`` covers commitment
    nodes of an expanded game.  ``catalog`` optionally restricts commitment
    deviations to branches whose catalog name is listed.  ``overrides`` maps
    a player to its own ``frozenset`` of kinds.
    """

    kinds: frozenset = frozenset({"raw", "commitment"})
    catalog: frozenset | None = None
    overrides: tuple[tuple[int, frozenset], ...] = ()

    def kinds_for(self, player: int) -> frozenset:
        for p, k in self.overrides:
            if p == player:
                return k
        return self.kinds

    @property
    def label(self) -> str:
        if self.kinds == {"raw", "commitment"}:
            base = "exhaustive" if self.catalog is None else "raw+schema"
        elif self.kinds == {"raw"}:
            base = "raw-actions-only"
        elif self.kinds == {"commitment"}:
            base = "schema"
        else:
            base = "none"
        if self.overrides:
            base += " (per-player overrides)"
        return base


EXHAUSTIVE = DeviationSpace()
RAW_ACTIONS = DeviationSpace(kinds=frozenset({"raw"}))
SCHEMA_ONLY = DeviationSpace(kinds=frozenset({"commitment"}))


@dataclass(frozen=True)
class Witness:
    player: int
    deviation: Mapping[str, int]
    gain: Fraction
    deviation_utility: Fraction
    subgame: Path = ()

    def to_dict(self) -> dict:
        return {
            "player": self.player,
            "subgame": list(self.subgame),
            "deviation": {k: self.deviation[k] for k in sorted(self.deviation)},
            "gain": fmt(self.gain),
            "deviation_utility": fmt(self.deviation_utility),
        }


@dataclass
class EquilibriumReport:
    verdict: bool
    utilities: tuple[Fraction, ...]
    scope: str
    kind: str = "nash"
    witness: Witness | None = None
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.verdict != (self.witness is None):
            raise ValueError("a witness must be present exactly when the verdict is negative")
        if self.witness is not None and not self.witness.gain > 0:
            raise ValueError("witness gain must be strictly positive")

    def __bool__(self) -> bool:
        return self.verdict

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "kind": self.kind,
            "utilities": [fmt(u) for u in self.utilities],
            "witness": None if self.witness is None else self.witness.to_dict(),
            "scope": self.scope,
            "notes": list(self.notes),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


# ------------------------------------------------------------ best response

def _is_free(node: Decision, kinds: frozenset) -> bool:
    return ("commitment" if node.commitment_for is not None else "raw") in kinds


def _allowed_actions(node: Decision, space: DeviationSpace, current) -> tuple[int, ...]:
    if node.commitment_for is None or space.catalog is None or node.notes is None:
        return node.actions
    keep = [a for a, note in zip(node.actions, node.notes)
            if note.name in space.catalog or a in current]
    return tuple(keep)


def best_response(tree: GameTree, profile: Mapping, player: int, at: Path = (),
                  space: DeviationSpace = EXHAUSTIVE,
                  budget: int = DEFAULT_PROFILE_BUDGET) -> tuple[Fraction, dict[str, int]]:
    """Best pure deviation of ``player`` in the subgame at ``at``.

    Returns the best attainable utility and the pure choices at the free
    information sets reached with positive probability by the others.
    Ties pick the earliest action in the node's order.
    """
    kinds = space.kinds_for(player)
    members: dict[str, list[tuple[Path, Decision, Fraction]]] = {}
    seqs: dict[str, set] = {}
    stack: list[tuple[Path, Node, Fraction, tuple]] = [(at, tree.nodes[at], Fraction(1), ())]
    while stack:
        path, node, w, seq = stack.pop()
        if isinstance(node, Leaf):
            continue
        if node.owner == player and _is_free(node, kinds):
            members.setdefault(node.info_set, []).append((path, node, w))
            seqs.setdefault(node.info_set, set()).add(seq)
            for a, c in zip(node.actions, node.children):
                stack.append((path + (a,), c, w, seq + ((node.info_set, a),)))
            continue
        dist = _dist(profile, node)
        for a, p in dist.items():
            if p:
                stack.append((path + (a,), node.child(a), w * p, seq))

    if not members:
        u = expected_utility(tree, profile, at)[player]
        return u, {}
    if any(len(s) > 1 for s in seqs.values()):
        return _brute_best_response(tree, profile, player, at, members, space, budget)

    decision: dict[str, int] = {}
    cache: dict[Path, Fraction] = {}

    def value(path: Path, node: Node) -> Fraction:
        if isinstance(node, Leaf):
            return node.utilities[player]
        hit = cache.get(path)
        if hit is not None:
            return hit
        if node.info_set in decision and node.owner == player:
            a = decision[node.info_set]
            v = value(path + (a,), node.child(a))
        else:
            v = Fraction(0)
            for a, p in _dist(profile, node).items():
                if p:
                    v += p * value(path + (a,), node.child(a))
        cache[path] = v
        return v

    order = sorted(members, key=lambda s: -len(next(iter(seqs[s]))))
    for iset in order:
        mem = members[iset]
        first = mem[0][1]
        current = profile.get(iset, {})
        if isinstance(current, int):
            current = {current: 1}
        best_a, best_v = None, None
        for a in _allowed_actions(first, space, current):
            v = Fraction(0)
            for path, node, w in mem:
                if w:
                    v += w * value(path + (a,), node.child(a))
            if best_v is None or v > best_v:
                best_a, best_v = a, v
        decision[iset] = best_a
    return value(at, tree.nodes[at]), decision


def _brute_best_response(tree, profile, player, at, members, space, budget):
    isets = sorted(members)
    choices = [_allowed_actions(members[s][0][1], space, profile.get(s, {})) for s in isets]
    total = 1
    for c in choices:
        total *= len(c)
    if total > budget:
        raise BudgetExceeded(f"pure strategies of player {player}", total, budget)
    base = StrategyProfile(profile) if not isinstance(profile, StrategyProfile) else profile
    best_v, best_dev = None, None
    for combo in product(*choices):
        dev = dict(zip(isets, combo))
        v = expected_utility(tree, base.updated(dev), at)[player]
        if best_v is None or v > best_v:
            best_v, best_dev = v, dev
    return best_v, best_dev


def _dist(profile: Mapping, node: Decision):
    try:
        d = profile[node.info_set]
    except KeyError:
        raise ProfileError(f"no assignment for reached info set {node.info_set!r}") from None
    if isinstance(d, int):
        return {d: Fraction(1)}
    return d


def _players_in(tree: GameTree, at: Path) -> list[int]:
    owners = set()
    stack = [tree.nodes[at]]
    while stack:
        node = stack.pop()
        if isinstance(node, Decision):
            owners.add(node.owner)
            stack.extend(node.children)
    return sorted(owners)


def is_equilibrium(tree: GameTree, profile: Mapping, space: DeviationSpace = EXHAUSTIVE,
                   at: Path = (), budget: int = DEFAULT_PROFILE_BUDGET,
                   players: Iterable[int] | None = None) -> EquilibriumReport:
    """No player gains strictly by a deviation in ``space`` (subgame at ``at``).

    The witness is the best response of the lowest-indexed player who gains.
    """
    utilities = expected_utility(tree, profile, at)
    for i in players if players is not None else _players_in(tree, at):
        v, dev = best_response(tree, profile, i, at, space, budget)
        if v > utilities[i]:
            w = Witness(i, dev, v - utilities[i], v, at)
            return EquilibriumReport(False, utilities, space.label, witness=w)
    return EquilibriumReport(True, utilities, space.label)


def is_subgame_perfect(tree: GameTree, profile: Mapping, space: DeviationSpace = EXHAUSTIVE,
                       budget: int = DEFAULT_PROFILE_BUDGET,
                       subgames: list[Path] | None = None) -> EquilibriumReport:
    """Equilibrium at every subgame; the first failing subgame in preorder is reported."""
    utilities = expected_utility(tree, profile)
    for root in subgames if subgames is not None else list_subgames(tree):
        if isinstance(tree.nodes[root], Leaf):
            continue
        rep = is_equilibrium(tree, profile, space, at=root, budget=budget)
        if not rep.verdict:
            return EquilibriumReport(False, utilities, space.label, kind="spe", witness=rep.witness)
    return EquilibriumReport(True, utilities, space.label, kind="spe")


# ------------------------------------------------------- backward induction

def solve_backward_induction(tree: GameTree, tie_rule: str = KEEP_ALL,
                             budget: int = DEFAULT_PROFILE_BUDGET) -> list[StrategyProfile]:
    """All (``keep_all``) or one selected pure/uniform SPE of a perfect-information game."""
    for s in tree.info_sets.values():
        if len(s.members) > 1:
            raise GameStructureError(
                f"backward induction needs perfect information; {s.id!r} has {len(s.members)} nodes"
            )
    if tie_rule not in (KEEP_ALL, FIRST_INDEX, UNIFORM):
        raise ValueError(f"unknown tie rule {tie_rule!r}")

    def solve(node: Node) -> list[tuple[dict, tuple[Fraction, ...]]]:
        if isinstance(node, Leaf):
            return [({}, node.utilities)]
        subs = [solve(c) for c in node.children]
        i = node.owner
        if tie_rule == UNIFORM:
            vals = [s[0][1][i] for s in subs]
            best = max(vals)
            arg = [k for k, v in enumerate(vals) if v == best]
            w = Fraction(1, len(arg))
            assign = {}
            for s in subs:
                assign.update(s[0][0])
            assign[node.info_set] = {node.actions[k]: w for k in arg}
            u = tuple(sum(w * subs[k][0][1][j] for k in arg) for j in range(tree.players))
            return [(assign, u)]
        if tie_rule == FIRST_INDEX:
            subs = [s[:1] for s in subs]
        out = []
        count = 1
        for s in subs:
            count *= len(s)
        if count > budget:
            raise BudgetExceeded("backward-induction continuation combinations", count, budget)
        for combo in product(*subs):
            vals = [c[1][i] for c in combo]
            best = max(vals)
            for k, v in enumerate(vals):
                if v != best:
                    continue
                assign = {}
                for c in combo:
                    assign.update(c[0])
                assign[node.info_set] = {node.actions[k]: Fraction(1)}
                out.append((assign, combo[k][1]))
                if tie_rule == FIRST_INDEX:
                    break
                if len(out) > budget:
                    raise BudgetExceeded("backward-induction equilibria", len(out), budget)
        return out

    return [StrategyProfile(a) for a, _ in solve(tree.root)]


# ------------------------------------------------------- brute-force oracle

def pure_profile_count(tree: GameTree, mixtures: bool = False) -> int:
    total = 1
    for s in tree.info_sets.values():
        total *= len(_choices_for(tree, s, mixtures))
    return total


def _terminal_set(tree: GameTree, iset) -> bool:
    return all(
        all(isinstance(c, Leaf) for c in tree.nodes[m].children) for m in iset.members
    )


def _choices_for(tree: GameTree, iset, mixtures: bool) -> list[dict[int, Fraction]]:
    pure = [{a: Fraction(1)} for a in iset.actions]
    if mixtures and iset.owner == 0 and _terminal_set(tree, iset):
        half = Fraction(1, 2)
        pure += [{a: half, b: half} for a, b in combinations(iset.actions, 2)]
    return pure


def iter_pure_profiles(tree: GameTree, budget: int = DEFAULT_PROFILE_BUDGET,
                       mixtures: bool = False) -> Iterator[StrategyProfile]:
    total = pure_profile_count(tree, mixtures)
    if total > budget:
        raise BudgetExceeded("pure strategy profiles", total, budget)
    isets = sorted(tree.info_sets.values(), key=lambda s: s.id)
    choices = [_choices_for(tree, s, mixtures) for s in isets]
    ids = [s.id for s in isets]
    for combo in product(*choices):
        yield StrategyProfile(dict(zip(ids, combo)))


def enumerate_equilibria(tree: GameTree, space: DeviationSpace = EXHAUSTIVE,
                         budget: int = DEFAULT_PROFILE_BUDGET, refinement: str = "nash",
                         mixtures: bool = False) -> list[tuple[StrategyProfile, EquilibriumReport]]:
    """Exhaustively test every pure profile (optionally with buyer two-point tie mixtures).

    When ``mixtures`` is set, the buyer's sets whose moves all end in leaves
    may also play a uniform mixture of two of their actions.
    """
    subgames = list_subgames(tree) if refinement == "spe" else None
    found = []
    for prof in iter_pure_profiles(tree, budget, mixtures):
        if mixtures and not _mixture_on_ties(tree, prof):
            continue
        if refinement == "spe":
            rep = is_subgame_perfect(tree, prof, space, budget, subgames)
        else:
            rep = is_equilibrium(tree, prof, space, budget=budget)
        if rep.verdict:
            found.append((prof, rep))
    return found


def _mixture_on_ties(tree: GameTree, prof: StrategyProfile) -> bool:
    # a two-point mixture is only worth testing when the owner is indifferent
    for iset, dist in prof.items():
        if len(dist) < 2:
            continue
        info = tree.info_sets[iset]
        node = tree.nodes[info.members[0]]
        vals = {node.child(a).utilities[info.owner] for a in dist}
        if len(vals) > 1:
            return False
    return True


# ------------------------------------------------- subgame decomposition

@dataclass(eq=False)
class Outcome:
    """One subgame-perfect equilibrium of the subgame rooted at ``root``.

    ``stage`` holds the pure (or tie-mixed) choices at the information sets
    that sit in this subgame but outside its proper subgames; ``children``
    holds the continuation equilibrium chosen in each proper subgame that the
    stage can lead to.
    """

    root: Path
    utilities: tuple[Fraction, ...]
    stage: dict[str, dict[int, Fraction]]
    terminal: Path
    children: dict[Path, "Outcome"] = field(default_factory=dict)

    def profile(self) -> StrategyProfile:
        out: dict[str, dict[int, Fraction]] = {}
        stack = [self]
        while stack:
            o = stack.pop()
            out.update(o.stage)
            stack.extend(o.children.values())
        return StrategyProfile(out)

    def on_path(self) -> dict[str, dict[int, Fraction]]:
        """Choices at the stage sets plus those along the realized continuation."""
        out: dict[str, dict[int, Fraction]] = {}
        o = self
        while o is not None:
            out.update(o.stage)
            o = o.children.get(o.terminal)
        return out

    def path_outcomes(self) -> list["Outcome"]:
        chain, o = [], self
        while o is not None:
            chain.append(o)
            o = o.children.get(o.terminal)
        return chain


class SubgameSolver:
    """Enumerates pure subgame-perfect equilibria by subgame decomposition.

    Each subgame's equilibria are built from a *stage* (the moves not inside
    a proper subgame) and one equilibrium per proper subgame.  A stage profile
    with a chosen on-path continuation is kept iff no player gains from a
    stage deviation, where any proper subgame entered by a deviation plays the
    continuation that is worst for the deviator.  This is exact for pure stage
    strategies: each off-path subgame is reachable by at most one player's
    unilateral deviation, so punishments never conflict.

    With ``tie_mixtures`` a decision node whose moves all end in leaves may
    also mix uniformly over any subset (size >= 2) of its owner's best moves.
    """

    def __init__(self, tree: GameTree, tie_mixtures: bool = False,
                 budget: int = DEFAULT_PROFILE_BUDGET):
        self.tree = tree
        self.tie_mixtures = tie_mixtures
        self.budget = budget
        self.subgame_roots = set(list_subgames(tree))
        self._memo: dict[Path, list[Outcome]] = {}
        self._worst: dict[tuple[Path, int], Outcome] = {}

    def outcomes(self, at: Path = ()) -> list[Outcome]:
        if at not in self.subgame_roots:
            raise GameStructureError(f"{at} is not a subgame root")
        return self._solve(at)

    def _solve(self, at: Path) -> list[Outcome]:
        hit = self._memo.get(at)
        if hit is not None:
            return hit
        # children first, iteratively, so deep trees never hit the recursion limit
        pending = [at]
        order = []
        seen = set()
        while pending:
            p = pending.pop()
            if p in seen or p in self._memo:
                continue
            seen.add(p)
            order.append(p)
            _, _, boundary = self._stage(p)
            pending.extend(b for b in boundary if b not in self._memo)
        for p in reversed(order):
            if p not in self._memo:
                self._memo[p] = self._solve_stage(p)
        return self._memo[at]

    def _stage(self, at: Path):
        nodes = self.tree.nodes
        stage_sets: dict[str, Decision] = {}
        boundary: list[Path] = []
        stack = [at]
        while stack:
            p = stack.pop()
            node = nodes[p]
            if isinstance(node, Leaf):
                continue
            if p != at and p in self.subgame_roots:
                boundary.append(p)
                continue
            stage_sets.setdefault(node.info_set, node)
            for a in reversed(node.actions):
                stack.append(p + (a,))
        return nodes[at], stage_sets, boundary

    def _worst_for(self, child: Path, player: int) -> Outcome:
        key = (child, player)
        hit = self._worst.get(key)
        if hit is None:
            hit = min(self._memo[child], key=lambda o: o.utilities[player])
            self._worst[key] = hit
        return hit

    def _follow(self, at: Path, choice: Mapping[str, int]) -> Path:
        nodes = self.tree.nodes
        p = at
        while True:
            node = nodes[p]
            if isinstance(node, Leaf) or (p != at and p in self.subgame_roots):
                return p
            p = p + (choice[node.info_set],)

    def _solve_stage(self, at: Path) -> list[Outcome]:
        root, stage_sets, boundary = self._stage(at)
        nodes = self.tree.nodes
        if (self.tie_mixtures and len(stage_sets) == 1 and not boundary
                and all(isinstance(c, Leaf) for c in root.children)):
            return self._terminal_mixtures(at, root)

        ids = list(stage_sets)
        action_lists = [stage_sets[s].actions for s in ids]
        total = 1
        for a in action_lists:
            total *= len(a)
        if total > self.budget:
            raise BudgetExceeded(f"stage profiles at subgame {at}", total, self.budget)
        owners = {s: stage_sets[s].owner for s in ids}
        by_player: dict[int, list[str]] = {}
        for s in ids:
            by_player.setdefault(owners[s], []).append(s)

        results: list[Outcome] = []
        for combo in product(*action_lists):
            choice = dict(zip(ids, combo))
            t0 = self._follow(at, choice)
            if isinstance(nodes[t0], Leaf):
                candidates = [(nodes[t0].utilities, None)]
            else:
                candidates = [(o.utilities, o) for o in self._memo[t0]]
            # deviation terminals depend only on the stage profile
            deviations: list[tuple[int, Path]] = []
            for player, psets in by_player.items():
                alts = [stage_sets[s].actions for s in psets]
                for alt in product(*alts):
                    if all(choice[s] == a for s, a in zip(psets, alt)):
                        continue
                    dev = dict(choice)
                    dev.update(zip(psets, alt))
                    t = self._follow(at, dev)
                    if t != t0:
                        deviations.append((player, t))
            for u, cont in candidates:
                if self._stable(u, deviations):
                    results.append(self._assemble(at, choice, t0, u, cont, deviations, boundary))
        return results

    def _deviation_value(self, player: int, t: Path) -> Fraction:
        node = self.tree.nodes[t]
        if isinstance(node, Leaf):
            return node.utilities[player]
        return self._worst_for(t, player).utilities[player]

    def _stable(self, u, deviations) -> bool:
        return all(self._deviation_value(i, t) <= u[i] for i, t in deviations)

    def _assemble(self, at, choice, t0, u, cont, deviations, boundary) -> Outcome:
        children: dict[Path, Outcome] = {}
        if cont is not None:
            children[t0] = cont
        for i, t in deviations:
            if t not in children and not isinstance(self.tree.nodes[t], Leaf):
                children[t] = self._worst_for(t, i)
        for b in boundary:
            if b not in children:
                children[b] = self._memo[b][0]
        stage = {s: {a: Fraction(1)} for s, a in choice.items()}
        return Outcome(at, u, stage, t0, children)

    def _terminal_mixtures(self, at: Path, node: Decision) -> list[Outcome]:
        i = node.owner
        vals = [c.utilities[i] for c in node.children]
        best = max(vals)
        arg = [k for k, v in enumerate(vals) if v == best]
        out = []
        for size in range(1, len(arg) + 1):
            for subset in combinations(arg, size):
                w = Fraction(1, size)
                u = tuple(
                    sum(w * node.children[k].utilities[j] for k in subset)
                    for j in range(self.tree.players)
                )
                dist = {node.actions[k]: w for k in subset}
                out.append(Outcome(at, u, {node.info_set: dist}, at + (node.actions[subset[0]],)))
        return out


def spe_outcomes(tree: GameTree, at: Path = (), tie_mixtures: bool = False,
                 budget: int = DEFAULT_PROFILE_BUDGET) -> list[Outcome]:
    return SubgameSolver(tree, tie_mixtures, budget).outcomes(at)


def utility_set(outcomes: Iterable[Outcome]) -> set[tuple[Fraction, ...]]:
    return {o.utilities for o in outcomes}
