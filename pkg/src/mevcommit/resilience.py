"""Stackelberg resilience of the popsicle game and end-to-end attack checks."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations
from typing import Sequence

from .commitment import (
    CommitmentBudget,
    ConstantAction,
    ExpandedGame,
    Identity,
    expand_sequence,
)
from .contract_dsl import (
    BuyerPledges,
    Contract,
    ContractEntry,
    builtin_theorem2,
    referenced_players,
)
from .equilibrium import (
    EXHAUSTIVE,
    RAW_ACTIONS,
    EquilibriumReport,
    Outcome,
    SubgameSolver,
    is_equilibrium,
    is_subgame_perfect,
    spe_outcomes,
)
from .errors import ContractCompileError, GridError
from .game_core import Decision, GameTree, Path, StrategyProfile, expected_utility
from .popsicle import PopsicleParams, build_popsicle, outcome_utilities
from .rational import fmt, fmt_vector, short


# ------------------------------------------------------------- schema

def price_name(v: Fraction) -> str:
    return f"price={short(v)}"


def pledge_name(vendor: int, q: Fraction) -> str:
    return f"pledge({vendor},{short(q)})"


def popsicle_schema(params: PopsicleParams, contracts: Sequence[Contract] = (),
                    constant_prices: bool = True, pledges: bool = True) -> dict:
    """Commitment catalog per player.

    Vendors: their contracts, the identity, and one constant price per grid
    price.  Buyer: contracts, identity, and one pledge per (vendor, q).
    """
    schema: dict[int, list] = {}
    for j in range(params.n + 1):
        entries: list = [ContractEntry(c, params) for c in contracts if c.owner == j]
        entries.append(Identity())
        if j >= 1 and constant_prices:
            entries += [ConstantAction(k, price_name(v)) for k, v in enumerate(params.prices)]
        if j == 0 and pledges:
            for i in range(1, params.n + 1):
                for q in params.buyer_q:
                    entries.append(ConstantAction(params.buyer_label(i, q), pledge_name(i, q)))
        schema[j] = entries
    return schema


def paper_ordering(n: int) -> tuple[int, ...]:
    return tuple(range(1, n + 1)) + (0,)


def compilable(contract: Contract, ordering: Sequence[int], n: int) -> bool:
    pos = {p: k for k, p in enumerate(ordering)}
    if contract.owner not in pos:
        return False
    later = set(ordering[pos[contract.owner] + 1:])
    return referenced_players(contract, n) <= later


# -------------------------------------------------------- attack check

@dataclass(frozen=True)
class Compliance:
    """Commitments the other players make under the attack.

    ``vendor_prices`` maps each vendor ``j >= 2`` to the constant price it
    commits to; ``buyer_pledge`` is the buyer's ``(vendor, q)`` pledge.
    """

    vendor_prices: tuple[tuple[int, Fraction], ...]
    buyer_pledge: tuple[int, Fraction]

    @classmethod
    def default(cls, params: PopsicleParams, contract: Contract) -> "Compliance":
        pledge = (1, Fraction(1))
        for r in contract.rules:
            if isinstance(r.guard, BuyerPledges) and isinstance(r.guard.vendor, int):
                pledge = (r.guard.vendor, r.guard.q)
        prices = tuple((j, Fraction(1)) for j in range(2, params.n + 1))
        return cls(prices, pledge)

    def price_of(self, j: int) -> Fraction:
        return dict(self.vendor_prices)[j]

    def describe(self) -> str:
        ps = ", ".join(f"p{j}={short(v)}" for j, v in self.vendor_prices)
        i, q = self.buyer_pledge
        return f"vendors commit {ps}; buyer pledges i*={i}, q={short(q)}"


@dataclass
class AttackReport:
    params: PopsicleParams
    compliance: Compliance
    equilibrium: EquilibriumReport
    raw_only: EquilibriumReport
    spe: EquilibriumReport | None
    expected: tuple[Fraction, ...]
    checks: dict[str, bool]
    trace: list[str]
    branches: int

    @property
    def utilities(self) -> tuple[Fraction, ...]:
        return self.equilibrium.utilities

    @property
    def verdict(self) -> bool:
        return self.equilibrium.verdict and all(self.checks.values())

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "params": self.params.to_dict(),
            "compliance": self.compliance.describe(),
            "utilities": [fmt(u) for u in self.utilities],
            "expected": [fmt(u) for u in self.expected],
            "checks": dict(self.checks),
            "equilibrium": self.equilibrium.to_dict(),
            "raw_actions_only": self.raw_only.to_dict(),
            "subgame_perfect": None if self.spe is None else self.spe.to_dict(),
            "branches": self.branches,
            "trace": list(self.trace),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


def _child_index(node: Decision, name: str) -> int:
    for a, note in zip(node.actions, node.notes or ()):
        if note.name == name:
            return a
    raise GridError(f"catalog entry {name!r} not offered at {node.info_set!r}")


def _compliance_path(expanded: ExpandedGame, contract: Contract, compliance: Compliance) -> list[Path]:
    """Commitment-node paths along the compliance branch, root first; the last entry is the base root."""
    tree = expanded.tree
    path: Path = ()
    nodes = [path]
    node = tree.root
    while isinstance(node, Decision) and node.commitment_for is not None:
        j = node.commitment_for
        if j == contract.owner:
            name = contract.name
        elif j == 0:
            name = pledge_name(*compliance.buyer_pledge)
        else:
            name = price_name(compliance.price_of(j))
        a = _child_index(node, name)
        path = path + (a,)
        nodes.append(path)
        node = node.child(a)
    return nodes


def compliance_profile(expanded: ExpandedGame, contract: Contract, compliance: Compliance,
                       solver: SubgameSolver | None = None) -> StrategyProfile:
    """Compliance choices on the attack path; off it, the continuation worst for the deviator.

    Every subtree that hangs off a commitment node of the compliance path is
    only reached when that node's owner deviates, so it plays the
    subgame-perfect continuation that minimizes the deviator's utility.
    """
    tree = expanded.tree
    solver = solver or SubgameSolver(tree)
    path_nodes = _compliance_path(expanded, contract, compliance)
    dists: dict[str, dict[int, Fraction]] = {}
    for here, nxt in zip(path_nodes, path_nodes[1:]):
        node = tree.nodes[here]
        chosen = nxt[-1]
        dists[node.info_set] = {chosen: Fraction(1)}
        for a in node.actions:
            if a == chosen:
                continue
            outs = solver.outcomes(here + (a,))
            worst = min(outs, key=lambda o: o.utilities[node.owner])
            dists.update(worst.profile())
    base = solver.outcomes(path_nodes[-1])
    dists.update(base[0].profile())
    return StrategyProfile(dists)


def build_attack_game(params: PopsicleParams, contract: Contract,
                      budget: CommitmentBudget | None = None) -> ExpandedGame:
    ordering = paper_ordering(params.n)
    schema = popsicle_schema(params, [contract])
    return expand_sequence(build_popsicle(params), ordering, budget, schema)


def verify_attack(params: PopsicleParams, contract: Contract | None = None,
                  compliance: Compliance | None = None,
                  budget: CommitmentBudget | None = None,
                  check_spe: bool = True) -> AttackReport:
    """Check that deploying ``contract`` with everyone complying is an equilibrium.

    The expanded game uses ordering ``1 -> ... -> n -> 0`` and the popsicle
    schema (constant prices, identity, buyer pledges, the contract).  The
    equilibrium check allows every raw-action deviation and every catalog
    commitment.
    """
    contract = contract or builtin_theorem2(params)
    if contract.owner != 1:
        raise ContractCompileError("the attack ordering puts vendor 1 outermost; the contract must be vendor 1's")
    compliance = compliance or Compliance.default(params, contract)
    expanded = build_attack_game(params, contract, budget)
    tree = expanded.tree
    solver = SubgameSolver(tree)
    profile = compliance_profile(expanded, contract, compliance, solver)
    trace: list[str] = [f"expanded game: {tree.size} nodes, {len(expanded.base_roots())} committed branches"]

    eq = is_equilibrium(tree, profile, EXHAUSTIVE)
    raw = is_equilibrium(tree, profile, RAW_ACTIONS)
    spe = is_subgame_perfect(tree, profile, EXHAUSTIVE) if check_spe else None
    trace.append(f"compliance: {compliance.describe()}")
    trace.append(f"equilibrium (raw actions + full catalog): {'yes' if eq.verdict else 'no'}")
    if spe is not None:
        trace.append(f"subgame perfect: {'yes' if spe.verdict else 'no'}")

    path_nodes = _compliance_path(expanded, contract, compliance)
    on_path_price = _contract_price_on_path(expanded, contract, params, path_nodes)
    prices = [on_path_price] + [compliance.price_of(j) for j in range(2, params.n + 1)]
    vendor, q = compliance.buyer_pledge
    expected = outcome_utilities(params, prices, vendor, q)
    checks = {"equilibrium": eq.verdict, "utilities": eq.utilities == expected}
    trace.append(f"utilities {fmt_vector(eq.utilities)}; by substitution {fmt_vector(expected)}")

    # vendors j >= 2 undercut: every constant price below 1 leaves them with 0
    undercut_ok = True
    for level, here in enumerate(path_nodes[:-1]):
        node = tree.nodes[here]
        j = node.commitment_for
        if j is None or j < 2:
            continue
        for v in params.prices:
            if v >= 1:
                continue
            a = _child_index(node, price_name(v))
            dev = profile.updated({node.info_set: a})
            u = expected_utility(tree, dev)
            ok = u[j] == 0
            undercut_ok &= ok
            trace.append(f"vendor {j} commits p{j}={short(v)}: u{j}={short(u[j])} "
                         f"({'undercut' if ok else 'PROFITABLE'})")
    checks["vendor_deviations"] = undercut_ok

    # buyer switching to any vendor j priced at 1 gets nothing
    buyer_ok = True
    buyer_node_path = path_nodes[-2]
    bnode = tree.nodes[buyer_node_path]
    if bnode.commitment_for == 0:
        for j in range(2, params.n + 1):
            if compliance.price_of(j) != 1:
                continue
            a = _child_index(bnode, pledge_name(j, Fraction(0)))
            u = expected_utility(tree, profile.updated({bnode.info_set: a}))
            ok = u[0] == 0
            buyer_ok &= ok
            trace.append(f"buyer pledges i*={j}, q=0: u0={short(u[0])}")
    checks["buyer_deviations"] = buyer_ok
    if not eq.verdict:
        w = eq.witness
        trace.append(f"witness: player {w.player} gains {short(w.gain)}")
    return AttackReport(params, compliance, eq, raw, spe, expected, checks, trace,
                        len(expanded.base_roots()))


def _contract_price_on_path(expanded, contract, params, path_nodes) -> Fraction:
    # the owner's only remaining price in the compliance branch
    tree = expanded.tree
    base = path_nodes[-1]
    for s in tree.info_sets_of(contract.owner):
        if s.commitment or s.members[0][: len(base)] != base:
            continue
        if len(s.actions) == 1:
            return params.prices[s.actions[0]]
    raise GridError("contract left vendor 1 more than one price on the compliance branch")


# ------------------------------------------------------- resilience

@dataclass
class OrderingResult:
    ordering: tuple[int, ...]
    contracts: list[str]
    outcomes: list[tuple[tuple[Fraction, ...], list[str], bool]]
    skipped: list[str] = field(default_factory=list)

    @property
    def mismatches(self):
        return [o for o in self.outcomes if not o[2]]


@dataclass
class ResilienceReport:
    params: PopsicleParams | None
    scope: str
    vanilla: set
    results: list[OrderingResult]
    witness: dict | None
    verdict: str

    @property
    def resilient(self) -> bool:
        return self.verdict == "resilient"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "params": None if self.params is None else self.params.to_dict(),
            "scope": self.scope,
            "vanilla_utilities": [[fmt(x) for x in u] for u in sorted(self.vanilla)],
            "orderings": [
                {
                    "ordering": list(r.ordering),
                    "contracts": r.contracts,
                    "skipped_contracts": r.skipped,
                    "equilibria": len(r.outcomes),
                    "mismatches": len(r.mismatches),
                    "utilities": sorted({fmt_vector(u) for u, _, _ in r.outcomes}),
                }
                for r in self.results
            ],
            "witness": self.witness,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def csv_rows(self) -> list[list[str]]:
        rows = [["ordering", "commitments", "utilities", "matches_vanilla"]]
        for r in self.results:
            for u, names, ok in r.outcomes:
                rows.append(["-".join(map(str, r.ordering)), " / ".join(names),
                             fmt_vector(u), "yes" if ok else "no"])
        return rows

    def csv(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(self.csv_rows())
        return buf.getvalue()


def default_orderings(n: int) -> list[tuple[int, ...]]:
    first = paper_ordering(n)
    return [first, tuple(reversed(first))]


def all_orderings(n: int) -> list[tuple[int, ...]]:
    return [tuple(p) for p in permutations(range(n + 1))]


def vanilla_utilities(params: PopsicleParams, tie_mixtures: bool = True) -> set:
    return {o.utilities for o in spe_outcomes(build_popsicle(params), tie_mixtures=tie_mixtures)}


def _commitment_names(expanded: ExpandedGame, outcome: Outcome) -> list[str]:
    names, node, path = [], expanded.tree.root, ()
    o = outcome
    while isinstance(node, Decision) and node.commitment_for is not None:
        a = next(iter(o.stage[node.info_set]))
        k = node.actions.index(a)
        names.append(f"{node.commitment_for}:{node.notes[k].name}")
        path = path + (a,)
        node = node.child(a)
        o = o.children[path]
    return names


def check_resilience(params: PopsicleParams, orderings: Sequence[Sequence[int]] | None = None,
                     contracts: Sequence[Contract] | None = None,
                     budget: CommitmentBudget | None = None,
                     schema_mode: bool = True, tie_mixtures: bool = False,
                     vanilla: set | None = None) -> ResilienceReport:
    """Compare subgame-perfect utilities with and without commitments.

    For each ordering the game is expanded (schema mode: popsicle catalog plus
    every contract whose conditions refer only to later committers) and all
    pure subgame-perfect equilibria are enumerated.  The verdict is negative
    as soon as one equilibrium's utility vector matches no vanilla
    equilibrium; that equilibrium, re-verified by deviation checks over raw
    actions and the full catalog, is the witness.
    """
    if contracts is None:
        contracts = [builtin_theorem2(params)] if 1 in params.q_grid else []
    orderings = [tuple(o) for o in (orderings or default_orderings(params.n))]
    for o in orderings:
        if sorted(o) != list(range(params.n + 1)):
            raise ValueError(f"ordering {o} must list every player 0..{params.n} once")
    if vanilla is None:
        vanilla = vanilla_utilities(params, tie_mixtures)
    base = build_popsicle(params)
    results: list[OrderingResult] = []
    witness = None
    for ordering in orderings:
        usable = [c for c in contracts if compilable(c, ordering, params.n)]
        skipped = [c.name for c in contracts if c not in usable]
        schema = popsicle_schema(params, usable) if schema_mode else None
        expanded = expand_sequence(base, ordering, budget, schema)
        solver = SubgameSolver(expanded.tree, tie_mixtures)
        outs = solver.outcomes()
        if not outs:
            raise RuntimeError(f"no pure subgame-perfect equilibrium found for ordering {ordering}")
        rows = []
        for o in outs:
            names = _commitment_names(expanded, o)
            rows.append((o.utilities, names, o.utilities in vanilla))
        res = OrderingResult(ordering, [c.name for c in usable], rows, skipped)
        results.append(res)
        if witness is None:
            witness = _pick_witness(expanded, outs, rows, ordering)
    if witness is None:
        verdict = "resilient"
    else:
        verdict = "not resilient (schema-witnessed)" if schema_mode else "not resilient"
    scope = ("pure subgame-perfect equilibria, schema catalog" if schema_mode
             else "pure subgame-perfect equilibria, all cuts")
    if tie_mixtures:
        scope += ", plus tie mixtures at terminal moves"
    return ResilienceReport(params, scope, vanilla, results, witness, verdict)


def check_game_resilience(tree: GameTree, orderings: Sequence[Sequence[int]] | None = None,
                          budget: CommitmentBudget | None = None,
                          tie_mixtures: bool = False) -> ResilienceReport:
    """Definition-level check on an arbitrary small game, every cut enumerated.

    Without ``orderings`` all permutations of the players are tried.
    """
    orderings = [tuple(o) for o in (orderings or permutations(range(tree.players)))]
    vanilla = {o.utilities for o in spe_outcomes(tree, tie_mixtures=tie_mixtures)}
    results: list[OrderingResult] = []
    witness = None
    for ordering in orderings:
        expanded = expand_sequence(tree, ordering, budget)
        outs = SubgameSolver(expanded.tree, tie_mixtures).outcomes()
        rows = [(o.utilities, _commitment_names(expanded, o), o.utilities in vanilla) for o in outs]
        results.append(OrderingResult(ordering, [], rows))
        if witness is None:
            witness = _pick_witness(expanded, outs, rows, ordering)
    scope = "pure subgame-perfect equilibria, all cuts"
    if tie_mixtures:
        scope += ", plus tie mixtures at terminal moves"
    verdict = "resilient" if witness is None else "not resilient"
    return ResilienceReport(None, scope, vanilla, results, witness, verdict)


def _pick_witness(expanded, outs, rows, ordering):
    # prefer an outermost contract, then the best payoff for the outermost player
    candidates = [(o, r) for o, r in zip(outs, rows) if not r[2]]
    if not candidates:
        return None
    lead = ordering[0]
    candidates.sort(key=lambda c: (0 if any("contract" in n for n in c[1][1][:1]) else 1,
                                   -c[1][0][lead]))
    o, (u, names, _) = candidates[0]
    profile = o.profile()
    rep = is_equilibrium(expanded.tree, profile, EXHAUSTIVE)
    return {
        "ordering": list(ordering),
        "commitments": names,
        "utilities": [fmt(x) for x in u],
        "verified_equilibrium": rep.verdict,
        "deviation_scope": rep.scope,
    }
