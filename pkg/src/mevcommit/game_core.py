"""Extensive-form games of imperfect information with exact-rational payoffs.

Nodes are immutable; a node is addressed by its *path*, the tuple of action
labels taken from the root.  Player 0 is the buyer, players ``1..n`` are
vendors, but nothing in this module depends on that convention.
"""
from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Union

from .errors import GameStructureError, ProfileError
from .rational import fmt, parse_rational

Path = tuple[int, ...]


@dataclass(frozen=True, slots=True)
class Leaf:
    utilities: tuple[Fraction, ...]


@dataclass(frozen=True, slots=True)
class CutNote:
    """Annotation on a commitment branch: catalog name and kept-action masks.

    ``kept`` pairs an information-set id of the *committed-over* tree with a
    bitmask over that set's actions, most significant bit = first action.
    """

    name: str
    kept: tuple[tuple[str, int], ...] = ()


@dataclass(frozen=True, slots=True)
class Decision:
    owner: int
    info_set: str
    actions: tuple[int, ...]
    children: tuple["Node", ...]
    commitment_for: int | None = None
    notes: tuple[CutNote, ...] | None = None

    def child(self, action: int) -> "Node":
        try:
            return self.children[self.actions.index(action)]
        except ValueError:
            raise ProfileError(
                f"action {action} not available at info set {self.info_set!r}"
            ) from None


Node = Union[Leaf, Decision]


def leaf(*utilities) -> Leaf:
    return Leaf(tuple(Fraction(u) for u in utilities))


@dataclass(frozen=True)
class InfoSet:
    id: str
    owner: int
    actions: tuple[int, ...]
    members: tuple[Path, ...]
    commitment: bool = False


@dataclass
class ValidationReport:
    problems: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems

    def __bool__(self) -> bool:
        return self.ok


class GameTree:
    """A finite game tree plus its information-set index.

    Construction never raises on structural problems; run
    :func:`validate_game` to find them.
    """

    def __init__(self, root: Node, players: int):
        self.root = root
        self.players = players
        self.nodes: dict[Path, Node] = {}
        members: dict[str, list[Path]] = {}
        stack: list[tuple[Path, Node]] = [((), root)]
        while stack:
            path, node = stack.pop()
            self.nodes[path] = node
            if isinstance(node, Decision):
                members.setdefault(node.info_set, []).append(path)
                for a, c in zip(reversed(node.actions), reversed(node.children)):
                    stack.append((path + (a,), c))
        self.info_sets: dict[str, InfoSet] = {}
        for iset, paths in members.items():
            first = self.nodes[paths[0]]
            self.info_sets[iset] = InfoSet(
                iset, first.owner, first.actions, tuple(paths), first.commitment_for is not None
            )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GameTree):
            return NotImplemented
        return self.players == other.players and self.root == other.root

    __hash__ = None  # type: ignore[assignment]

    def node(self, path: Path) -> Node:
        return self.nodes[path]

    def decision_paths(self) -> Iterator[Path]:
        for path, node in self.nodes.items():
            if isinstance(node, Decision):
                yield path

    def info_sets_of(self, player: int) -> list[InfoSet]:
        """Owned information sets, sorted by id."""
        return sorted(
            (s for s in self.info_sets.values() if s.owner == player), key=lambda s: s.id
        )

    def leaves(self) -> Iterator[tuple[Path, Leaf]]:
        for path, node in self.nodes.items():
            if isinstance(node, Leaf):
                yield path, node

    def subtree(self, path: Path) -> "GameTree":
        return GameTree(self.nodes[path], self.players)

    @property
    def size(self) -> int:
        return len(self.nodes)


def validate_game(tree: GameTree) -> ValidationReport:
    report = ValidationReport()
    bad = report.problems
    for path, node in sorted(tree.nodes.items()):
        if isinstance(node, Leaf):
            if len(node.utilities) != tree.players:
                bad.append(
                    f"utility arity: leaf {path} has {len(node.utilities)} utilities, "
                    f"expected {tree.players}"
                )
            continue
        if not node.children:
            bad.append(f"empty actions: node {path} has no actions")
        if len(node.actions) != len(node.children):
            bad.append(f"label mismatch: node {path} has {len(node.actions)} labels "
                       f"for {len(node.children)} children")
        if len(set(node.actions)) != len(node.actions):
            bad.append(f"duplicate labels: node {path}")
        if not 0 <= node.owner < tree.players:
            bad.append(f"owner out of range: node {path} owned by {node.owner}")
    for iset in tree.info_sets.values():
        nodes = [tree.nodes[p] for p in iset.members]
        if any(n.owner != iset.owner for n in nodes):
            bad.append(f"info-set owner mismatch: {iset.id!r}")
        counts = sorted({len(n.actions) for n in nodes})
        if len(counts) > 1:
            bad.append(f"action-count mismatch: {iset.id!r} has counts {counts}")
        elif any(n.actions != iset.actions for n in nodes):
            bad.append(f"action-label mismatch: {iset.id!r}")
        paths = sorted(iset.members, key=len)
        for i, p in enumerate(paths):
            for q in paths[i + 1:]:
                if q[: len(p)] == p:
                    bad.append(f"same-path membership: {iset.id!r} contains {p} and {q}")
    return report


# ---------------------------------------------------------------- profiles

Distribution = Mapping[int, Fraction]


class StrategyProfile(Mapping[str, Distribution]):
    """Behavioral profile: information-set id -> distribution over actions.

    The owning player of each set is read off the game, so one mapping serves
    all players.  Instances are immutable.
    """

    __slots__ = ("_d",)

    def __init__(self, dists: Mapping[str, Mapping[int, Fraction] | int] = ()):
        d: dict[str, dict[int, Fraction]] = {}
        for k, v in dict(dists).items():
            if isinstance(v, int):
                d[k] = {v: Fraction(1)}
            else:
                d[k] = {a: Fraction(p) for a, p in v.items() if p}
        self._d = d

    @classmethod
    def pure(cls, assignment: Mapping[str, int]) -> "StrategyProfile":
        return cls(assignment)

    def __getitem__(self, key: str) -> Distribution:
        return self._d[key]

    def __iter__(self):
        return iter(self._d)

    def __len__(self) -> int:
        return len(self._d)

    def __repr__(self) -> str:
        return f"StrategyProfile({self._d!r})"

    def __eq__(self, other: object) -> bool:
        if isinstance(other, StrategyProfile):
            return self._d == other._d
        return NotImplemented

    def __hash__(self) -> int:
        return hash(frozenset((k, frozenset(v.items())) for k, v in self._d.items()))

    @property
    def is_pure(self) -> bool:
        return all(len(v) == 1 for v in self._d.values())

    def action(self, info_set: str) -> int:
        dist = self._d[info_set]
        if len(dist) != 1:
            raise ProfileError(f"info set {info_set!r} is mixed")
        return next(iter(dist))

    def updated(self, other: Mapping[str, Mapping[int, Fraction] | int]) -> "StrategyProfile":
        new = StrategyProfile(other)
        merged = dict(self._d)
        merged.update(new._d)
        out = StrategyProfile()
        out._d = merged
        return out

    def restricted(self, keys) -> "StrategyProfile":
        out = StrategyProfile()
        out._d = {k: self._d[k] for k in keys if k in self._d}
        return out


def check_profile(tree: GameTree, profile: StrategyProfile) -> None:
    """Raise :class:`ProfileError` if a distribution is not a valid one."""
    for iset, dist in profile.items():
        info = tree.info_sets.get(iset)
        if info is None:
            continue
        if sum(dist.values()) != 1:
            raise ProfileError(f"distribution at {iset!r} sums to {sum(dist.values())}")
        if any(p < 0 for p in dist.values()):
            raise ProfileError(f"negative probability at {iset!r}")
        extra = set(dist) - set(info.actions)
        if extra:
            raise ProfileError(f"actions {sorted(extra)} not available at {iset!r}")


def _distribution(profile: Mapping, node: Decision) -> Distribution:
    try:
        dist = profile[node.info_set]
    except KeyError:
        raise ProfileError(f"no assignment for reached info set {node.info_set!r}") from None
    if isinstance(dist, int):
        return {dist: Fraction(1)}
    return dist


def play(tree: GameTree, profile: Mapping) -> tuple[Fraction, ...]:
    """Follow a pure profile from the root and return the leaf utilities."""
    node = tree.root
    while isinstance(node, Decision):
        dist = _distribution(profile, node)
        if len(dist) != 1:
            raise ProfileError(f"profile is mixed at {node.info_set!r}; use expected_utility")
        node = node.child(next(iter(dist)))
    return node.utilities


def node_utility(node: Node, profile: Mapping, players: int) -> tuple[Fraction, ...]:
    if isinstance(node, Leaf):
        return node.utilities
    acc = [Fraction(0)] * players
    for a, p in _distribution(profile, node).items():
        if not p:
            continue
        u = node_utility(node.child(a), profile, players)
        for k in range(players):
            acc[k] += p * u[k]
    return tuple(acc)


def expected_utility(tree: GameTree, profile: Mapping, at: Path = ()) -> tuple[Fraction, ...]:
    """Exact expected utilities of ``profile`` in the subgame at ``at``."""
    return node_utility(tree.nodes[at], profile, tree.players)


def list_subgames(tree: GameTree) -> list[Path]:
    """Nodes whose subtree contains every information set it touches entirely.

    A node is excluded iff it lies strictly below the lowest common ancestor
    of some information set and on the path to one of that set's members.
    """
    excluded: set[Path] = set()
    for iset in tree.info_sets.values():
        if len(iset.members) < 2:
            continue
        lca_len = _common_prefix_len(iset.members)
        for m in iset.members:
            for k in range(lca_len + 1, len(m) + 1):
                excluded.add(m[:k])
    return sorted((p for p in tree.nodes if p not in excluded), key=_preorder_key(tree))


def _common_prefix_len(paths) -> int:
    first = paths[0]
    n = min(len(p) for p in paths)
    k = 0
    while k < n and all(p[k] == first[k] for p in paths):
        k += 1
    return k


def _preorder_key(tree: GameTree):
    order = {p: i for i, p in enumerate(tree.nodes)}
    return order.__getitem__


def has_perfect_recall(tree: GameTree, player: int) -> bool:
    """True iff all members of each of ``player``'s sets share the same own history."""
    for iset in tree.info_sets_of(player):
        histories = {own_history(tree, m, player) for m in iset.members}
        if len(histories) > 1:
            return False
    return True


def own_history(tree: GameTree, path: Path, player: int) -> tuple[tuple[str, int], ...]:
    hist = []
    node = tree.root
    for a in path:
        if node.owner == player:
            hist.append((node.info_set, a))
        node = node.child(a)
    return tuple(hist)


# ------------------------------------------------------------ serialization

def node_to_dict(node: Node) -> dict:
    if isinstance(node, Leaf):
        return {"utilities": [fmt(u) for u in node.utilities]}
    d: dict = {"owner": node.owner, "info_set": node.info_set}
    if node.commitment_for is not None:
        d["commitment_for"] = node.commitment_for
    d["actions"] = list(node.actions)
    if node.notes is not None:
        d["cuts"] = [
            {"name": n.name, "kept": {k: m for k, m in n.kept}} for n in node.notes
        ]
    d["children"] = [node_to_dict(c) for c in node.children]
    return d


def node_from_dict(d: dict) -> Node:
    if "utilities" in d:
        return Leaf(tuple(parse_rational(u) for u in d["utilities"]))
    notes = None
    if "cuts" in d:
        notes = tuple(CutNote(c["name"], tuple(c["kept"].items())) for c in d["cuts"])
    return Decision(
        owner=int(d["owner"]),
        info_set=str(d["info_set"]),
        actions=tuple(int(a) for a in d["actions"]),
        children=tuple(node_from_dict(c) for c in d["children"]),
        commitment_for=d.get("commitment_for"),
        notes=notes,
    )


def game_to_dict(tree: GameTree) -> dict:
    info_sets = {
        k: {"owner": s.owner, "action_count": len(s.actions)}
        for k, s in sorted(tree.info_sets.items())
    }
    return {"players": tree.players, "info_sets": info_sets, "root": node_to_dict(tree.root)}


def game_from_dict(d: dict) -> GameTree:
    tree = GameTree(node_from_dict(d["root"]), int(d["players"]))
    declared = d.get("info_sets", {})
    for k, s in tree.info_sets.items():
        decl = declared.get(k)
        if decl is not None and (decl["owner"] != s.owner or decl["action_count"] != len(s.actions)):
            raise GameStructureError(f"info set {k!r} disagrees with its declaration")
    return tree


def dumps_game(tree: GameTree) -> str:
    return json.dumps(game_to_dict(tree), indent=1) + "\n"


def loads_game(text: str) -> GameTree:
    return game_from_dict(json.loads(text))
