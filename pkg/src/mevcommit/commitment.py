"""Cuts, commitment expansion and nested (bottom-up) expansion.

A cut for player ``i`` keeps a nonempty subset of actions at each of ``i``'s
information sets, uniformly across the set.  Expanding a game for ``i`` adds
a root owned by ``i`` with one branch per cut; expanding for a sequence of
players does this innermost-first, so an outer player's cuts range over the
already-expanded tree and can condition on the inner players' commitments.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from math import prod
from typing import Callable, Iterator, Mapping, Protocol, Sequence

from .errors import BudgetExceeded, CutError
from .game_core import CutNote, Decision, GameTree, Leaf, Node, Path, validate_game

DEFAULT_MAX_NODES = 2_000_000
DEFAULT_MAX_CUTS = 10_000


@dataclass(frozen=True)
class CommitmentBudget:
    max_nodes: int = DEFAULT_MAX_NODES
    max_cuts_per_node: int = DEFAULT_MAX_CUTS

    def __post_init__(self):
        if self.max_nodes <= 0 or self.max_cuts_per_node <= 0:
            raise ValueError("budgets must be positive")


def mask_of(actions: Sequence[int], kept) -> int:
    """Bitmask of kept actions, most significant bit = first action."""
    k = len(actions)
    return sum(1 << (k - 1 - j) for j, a in enumerate(actions) if a in kept)


def kept_from_mask(actions: Sequence[int], mask: int) -> frozenset:
    k = len(actions)
    return frozenset(a for j, a in enumerate(actions) if mask >> (k - 1 - j) & 1)


@dataclass(frozen=True)
class Cut:
    owner: int
    kept: Mapping[str, frozenset]
    name: str = ""

    @classmethod
    def make(cls, tree: GameTree, owner: int, kept: Mapping[str, Sequence[int]],
             name: str = "") -> "Cut":
        """Validated constructor; sets of ``owner`` not mentioned keep everything."""
        checked: dict[str, frozenset] = {}
        for iset, acts in kept.items():
            info = tree.info_sets.get(iset)
            if info is None:
                raise CutError(f"cut names unknown info set {iset!r}")
            if info.owner != owner:
                raise CutError(f"info set {iset!r} belongs to player {info.owner}, not {owner}")
            acts = frozenset(acts)
            if not acts:
                raise CutError(f"cut removes every action at {iset!r}")
            if not acts <= set(info.actions):
                raise CutError(f"cut keeps unknown actions {sorted(acts - set(info.actions))} at {iset!r}")
            if acts != frozenset(info.actions):
                checked[iset] = acts
        return cls(owner, checked, name)

    def kept_at(self, tree: GameTree, iset: str) -> frozenset:
        return self.kept.get(iset, frozenset(tree.info_sets[iset].actions))

    def note(self, tree: GameTree) -> CutNote:
        items = []
        for iset in sorted(self.kept):
            acts = tree.info_sets[iset].actions
            items.append((iset, mask_of(acts, self.kept[iset])))
        return CutNote(self.name, tuple(items))

    def check(self, tree: GameTree) -> None:
        """Re-validate against ``tree``: raises :class:`CutError` on violation."""
        Cut.make(tree, self.owner, self.kept, self.name)

    @property
    def is_identity(self) -> bool:
        return not self.kept


def owned_sets(tree: GameTree, player: int, raw_only: bool = False):
    sets = tree.info_sets_of(player)
    if raw_only:
        sets = [s for s in sets if not s.commitment]
    return sets


def count_cuts(tree: GameTree, player: int) -> int:
    return prod((1 << len(s.actions)) - 1 for s in owned_sets(tree, player))


def enumerate_cuts(tree: GameTree, player: int,
                   budget: CommitmentBudget | None = None) -> Iterator[Cut]:
    """All cuts for ``player``, identity first.

    Information sets are ordered by id (the first varies slowest); within a
    set, kept-action masks run from the full mask downwards, so for two
    actions the order is {both}, {first}, {second}.
    """
    budget = budget or CommitmentBudget()
    total = count_cuts(tree, player)
    if total > budget.max_cuts_per_node:
        raise BudgetExceeded(f"cuts for player {player}", total, budget.max_cuts_per_node)
    sets = owned_sets(tree, player)
    ranges = [range((1 << len(s.actions)) - 1, 0, -1) for s in sets]
    for masks in product(*ranges):
        kept = {}
        for s, m in zip(sets, masks):
            if m != (1 << len(s.actions)) - 1:
                kept[s.id] = kept_from_mask(s.actions, m)
        name = "identity" if not kept else "cut:" + ",".join(
            f"{s.id}={m:0{len(s.actions)}b}" for s, m in zip(sets, masks)
        )
        yield Cut(player, kept, name)


def apply_cut(tree: GameTree, cut: Cut) -> GameTree:
    """The subtree with the cut's removed actions deleted; inputs untouched."""
    for iset in cut.kept:
        info = tree.info_sets.get(iset)
        if info is None or info.owner != cut.owner:
            raise CutError(f"cut does not match tree at {iset!r}")
    if not cut.kept:
        return tree

    def rebuild(node: Node) -> Node:
        if isinstance(node, Leaf):
            return node
        keep = cut.kept.get(node.info_set)
        if keep is None:
            kids = tuple(rebuild(c) for c in node.children)
            if all(a is b for a, b in zip(kids, node.children)):
                return node
            return Decision(node.owner, node.info_set, node.actions, kids,
                            node.commitment_for, node.notes)
        pairs = [(a, rebuild(c)) for a, c in zip(node.actions, node.children) if a in keep]
        notes = None
        if node.notes is not None:
            notes = tuple(n for a, n in zip(node.actions, node.notes) if a in keep)
        return Decision(node.owner, node.info_set, tuple(a for a, _ in pairs),
                        tuple(c for _, c in pairs), node.commitment_for, notes)

    return GameTree(rebuild(tree.root), tree.players)


def prefix_info_sets(node: Node, prefix: str) -> Node:
    if isinstance(node, Leaf):
        return node
    return Decision(node.owner, prefix + node.info_set, node.actions,
                    tuple(prefix_info_sets(c, prefix) for c in node.children),
                    node.commitment_for, node.notes)


@dataclass
class ExpandedGame:
    """A game with commitment nodes.

    ``levels`` lists, outermost first, the committing player and the cuts
    offered at that level (cuts of the tree as it was before that level was
    added).  ``mode`` is ``"exhaustive"`` or ``"schema"``.
    """

    tree: GameTree
    ordering: tuple[int, ...]
    levels: list[tuple[int, list[Cut]]] = field(default_factory=list)
    mode: str = "exhaustive"
    base: GameTree | None = None

    @property
    def commitment_nodes(self) -> list[Path]:
        return [p for p, n in self.tree.nodes.items()
                if isinstance(n, Decision) and n.commitment_for is not None]

    def base_roots(self, at: Path = ()) -> list[Path]:
        """Roots of the base-game copies below all commitment nodes."""
        out = []
        stack = [at]
        while stack:
            p = stack.pop()
            node = self.tree.nodes[p]
            if isinstance(node, Decision) and node.commitment_for is not None:
                stack.extend(p + (a,) for a in reversed(node.actions))
            else:
                out.append(p)
        return out

    def branch_names(self, path: Path) -> list[tuple[int, str]]:
        """(committing player, chosen catalog name) along ``path``."""
        out = []
        node = self.tree.root
        for a in path:
            if isinstance(node, Decision) and node.commitment_for is not None:
                k = node.actions.index(a)
                name = node.notes[k].name if node.notes else str(a)
                out.append((node.commitment_for, name))
            node = node.child(a)
        return out


def commitment_root(tree: GameTree, player: int, cuts: Sequence[Cut],
                    budget: CommitmentBudget) -> GameTree:
    size = len(cuts) * tree.size + 1
    if size > budget.max_nodes:
        raise BudgetExceeded(f"expanded tree nodes for player {player}", size, budget.max_nodes)
    children = []
    for k, cut in enumerate(cuts):
        sub = apply_cut(tree, cut)
        children.append(prefix_info_sets(sub.root, f"{k}/"))
    notes = tuple(c.note(tree) for c in cuts)
    root = Decision(player, f"c{player}", tuple(range(len(cuts))), tuple(children),
                    commitment_for=player, notes=notes)
    return GameTree(root, tree.players)


def expand(tree: GameTree, player: int, budget: CommitmentBudget | None = None) -> ExpandedGame:
    budget = budget or CommitmentBudget()
    cuts = list(enumerate_cuts(tree, player, budget))
    return ExpandedGame(commitment_root(tree, player, cuts, budget), (player,),
                        [(player, cuts)], "exhaustive", tree)


class CatalogEntry(Protocol):
    name: str

    def cut(self, inner: ExpandedGame, player: int) -> Cut: ...


@dataclass(frozen=True)
class Identity:
    name: str = "identity"

    def cut(self, inner: ExpandedGame, player: int) -> Cut:
        return Cut(player, {}, self.name)


@dataclass(frozen=True)
class ConstantAction:
    """Keep one action label at every ordinary (non-commitment) set of the player."""

    label: int
    name: str

    def cut(self, inner: ExpandedGame, player: int) -> Cut:
        kept = {}
        for s in owned_sets(inner.tree, player, raw_only=True):
            if self.label not in s.actions:
                raise CutError(f"{self.name}: action {self.label} unavailable at {s.id!r}")
            kept[s.id] = [self.label]
        return Cut.make(inner.tree, player, kept, self.name)


@dataclass(frozen=True)
class CutFactory:
    """Catalog entry backed by an arbitrary function of the inner game."""

    name: str
    build: Callable[[ExpandedGame, int], Cut]

    def cut(self, inner: ExpandedGame, player: int) -> Cut:
        c = self.build(inner, player)
        return Cut(c.owner, c.kept, self.name)


Schema = Mapping[int, Sequence[CatalogEntry]]


def expand_sequence(tree: GameTree, ordering: Sequence[int],
                    budget: CommitmentBudget | None = None,
                    schema: Schema | None = None) -> ExpandedGame:
    """Nested expansion; ``ordering[0]`` ends up outermost.

    Without a schema every cut is enumerated at every level.  With a schema
    each level offers exactly the catalog entries declared for that player.
    """
    budget = budget or CommitmentBudget()
    ordering = tuple(ordering)
    if len(set(ordering)) != len(ordering):
        raise ValueError(f"ordering has duplicates: {ordering}")
    current = ExpandedGame(tree, (), [], "schema" if schema is not None else "exhaustive", tree)
    for level, player in reversed(list(enumerate(ordering))):
        try:
            if schema is None:
                cuts = list(enumerate_cuts(current.tree, player, budget))
            else:
                entries = schema.get(player, [Identity()])
                cuts = [e.cut(current, player) for e in entries]
            new_tree = commitment_root(current.tree, player, cuts, budget)
        except BudgetExceeded as exc:
            raise BudgetExceeded(
                f"nesting level {level} (player {player}): {exc.what}", exc.size, exc.limit
            ) from exc
        current = ExpandedGame(new_tree, (player,) + current.ordering,
                               [(player, cuts)] + current.levels, current.mode, tree)
    return current


# -------------------------------------------------- committed actions

def committed_actions(tree: GameTree, player: int, at: Path = (), solver=None) -> set[int]:
    """Actions of ``player`` that some subgame-perfect equilibrium of the subgame plays.

    Only the player's ordinary sets inside the subgame at ``at`` are read,
    along each equilibrium's path of play.
    """
    from .equilibrium import SubgameSolver

    solver = solver or SubgameSolver(tree)
    prefix_len = len(at)
    out: set[int] = set()
    for o in solver.outcomes(at):
        for iset, dist in o.on_path().items():
            info = tree.info_sets[iset]
            if info.owner != player or info.commitment:
                continue
            if any(m[:prefix_len] == at for m in info.members):
                out.update(a for a, p in dist.items() if p)
    return out


def forced_action(tree: GameTree, player: int, at: Path = ()) -> int | None:
    """The single action left to ``player`` at all of their nodes below ``at``, if any."""
    found: set[int] = set()
    stack = [tree.nodes[at]]
    seen_any = False
    while stack:
        node = stack.pop()
        if isinstance(node, Leaf):
            continue
        if node.owner == player and node.commitment_for is None:
            seen_any = True
            if len(node.actions) != 1:
                return None
            found.add(node.actions[0])
            if len(found) > 1:
                return None
        stack.extend(node.children)
    return next(iter(found)) if seen_any and len(found) == 1 else None


def cut_invariants_hold(tree: GameTree, cut: Cut) -> bool:
    try:
        cut.check(tree)
    except CutError:
        return False
    return validate_game(apply_cut(tree, cut)).ok


def committed_prices(tree: GameTree, vendor: int, prices: Sequence, at: Path = (),
                     solver=None) -> set:
    """Prices ``v`` such that ``p_vendor = v`` extends to an SPE of the subgame at ``at``.

    Vendor actions are indices into ``prices``.
    """
    return {prices[a] for a in committed_actions(tree, vendor, at, solver)}
