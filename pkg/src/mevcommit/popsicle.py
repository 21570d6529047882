"""The popsicle game: n vendors post prices, a discounting buyer picks one.

Discretized: prices come from a finite grid ``P`` and side payments from a
grid ``Q``.  Buyer actions are labeled ``(i - 1) * |Q| + k`` for vendor ``i``
and side payment ``Q[k]``; vendor actions are price indices into ``P``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Mapping, Sequence

from .errors import BudgetExceeded, GridError
from .game_core import Decision, GameTree, Leaf, StrategyProfile, expected_utility
from .rational import fmt, parse_grid, parse_rational

MULTIPLICATIVE = "multiplicative"
LINEAR = "linear"

DEFAULT_NODE_BUDGET = 2_000_000


def node_budget(explicit: int | None = None) -> int:
    if explicit is not None:
        return explicit
    env = os.environ.get("MEVCOMMIT_NODE_BUDGET")
    return int(env) if env else DEFAULT_NODE_BUDGET


@dataclass(frozen=True)
class PopsicleParams:
    n: int
    d: Fraction
    alpha: Fraction
    prices: tuple[Fraction, ...] = (Fraction(0), Fraction(1, 2), Fraction(1))
    q_grid: tuple[Fraction, ...] = (Fraction(0), Fraction(1))
    discount_mode: str = MULTIPLICATIVE
    kappa: Fraction | None = None
    side_payments: bool = True

    def __post_init__(self):
        for name in ("d", "alpha", "kappa"):
            v = getattr(self, name)
            if v is not None and not isinstance(v, Fraction):
                object.__setattr__(self, name, parse_rational(v))
        object.__setattr__(self, "prices", parse_grid(self.prices))
        object.__setattr__(self, "q_grid", parse_grid(self.q_grid))
        self.validate()

    def validate(self) -> None:
        if self.n < 2:
            raise GridError(f"need n >= 2 vendors, got {self.n}")
        if not 0 <= self.d <= 1:
            raise GridError(f"discount d must lie in [0, 1], got {self.d}")
        if not 0 <= self.alpha < 1:
            raise GridError(f"tax rate alpha must lie in [0, 1), got {self.alpha}")
        _check_grid("price grid", self.prices, required=(Fraction(0), Fraction(1)))
        _check_grid("side-payment grid", self.q_grid, required=(Fraction(0),))
        if self.discount_mode not in (MULTIPLICATIVE, LINEAR):
            raise GridError(f"unknown discount mode {self.discount_mode!r}")
        if self.discount_mode == LINEAR and (self.kappa is None or self.kappa <= 0):
            raise GridError("linear discount mode needs kappa > 0")

    @property
    def buyer_q(self) -> tuple[Fraction, ...]:
        """Side payments actually offered to the buyer."""
        return self.q_grid if self.side_payments else (Fraction(0),)

    @property
    def players(self) -> int:
        return self.n + 1

    def price_index(self, price: Fraction) -> int:
        try:
            return self.prices.index(Fraction(price))
        except ValueError:
            raise GridError(f"price {price} is not on the grid {list(map(str, self.prices))}") from None

    def q_index(self, q: Fraction) -> int:
        try:
            return self.buyer_q.index(Fraction(q))
        except ValueError:
            raise GridError(f"side payment {q} is not on the grid {list(map(str, self.buyer_q))}") from None

    def buyer_label(self, vendor: int, q: Fraction) -> int:
        if not 1 <= vendor <= self.n:
            raise GridError(f"vendor index {vendor} outside 1..{self.n}")
        return (vendor - 1) * len(self.buyer_q) + self.q_index(q)

    def buyer_action(self, label: int) -> tuple[int, Fraction]:
        k = len(self.buyer_q)
        return label // k + 1, self.buyer_q[label % k]

    def replace(self, **changes) -> "PopsicleParams":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return PopsicleParams(**values)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "d": fmt(self.d),
            "alpha": fmt(self.alpha),
            "prices": [fmt(p) for p in self.prices],
            "q_grid": [fmt(q) for q in self.q_grid],
            "discount_mode": self.discount_mode,
            "kappa": None if self.kappa is None else fmt(self.kappa),
            "side_payments": self.side_payments,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PopsicleParams":
        try:
            return cls(
                n=int(d["n"]),
                d=parse_rational(d["d"]),
                alpha=parse_rational(d.get("alpha", "0")),
                prices=parse_grid(d.get("prices", "0,1/2,1")),
                q_grid=parse_grid(d.get("q_grid", "0,1")),
                discount_mode=d.get("discount_mode", MULTIPLICATIVE),
                kappa=None if d.get("kappa") is None else parse_rational(d["kappa"]),
                side_payments=bool(d.get("side_payments", True)),
            )
        except (KeyError, ValueError) as exc:
            if isinstance(exc, GridError):
                raise
            raise GridError(f"invalid params: {exc}") from exc


def _check_grid(name: str, grid: Sequence[Fraction], required: Sequence[Fraction]) -> None:
    if list(grid) != sorted(set(grid)):
        raise GridError(f"{name} must be sorted and duplicate-free")
    if any(not 0 <= x <= 1 for x in grid):
        raise GridError(f"{name} must lie within [0, 1]")
    for r in required:
        if r not in grid:
            raise GridError(f"{name} must contain {r}")


def load_params(path) -> PopsicleParams:
    with open(path) as fh:
        return PopsicleParams.from_dict(json.load(fh))


# ---------------------------------------------------------------- payoffs

def buyer_value(params: PopsicleParams, price: Fraction, q: Fraction, vendor: int) -> Fraction:
    if params.discount_mode == LINEAR:
        return 1 - price - q - params.kappa * vendor * params.d
    return (1 - price - q) * params.d ** (vendor - 1)


def outcome_utilities(params: PopsicleParams, prices: Sequence[Fraction], vendor: int,
                      q: Fraction) -> tuple[Fraction, ...]:
    u = [Fraction(0)] * params.players
    u[0] = buyer_value(params, prices[vendor - 1], q, vendor)
    u[vendor] = (1 - params.alpha) * prices[vendor - 1] + q
    return tuple(u)


# ------------------------------------------------------------- game tree

def vendor_info_set(j: int) -> str:
    return f"v{j}"


def buyer_info_set(price_idx: Sequence[int]) -> str:
    return "b:" + ".".join(map(str, price_idx))


def tree_size(params: PopsicleParams) -> int:
    m = len(params.prices)
    decisions = sum(m**j for j in range(params.n + 1))
    return decisions + m**params.n * params.n * len(params.buyer_q)


def build_popsicle(params: PopsicleParams, budget: int | None = None) -> GameTree:
    limit = node_budget(budget)
    size = tree_size(params)
    if size > limit:
        raise BudgetExceeded("popsicle tree nodes", size, limit)
    m = len(params.prices)
    buyer_actions = tuple(range(params.n * len(params.buyer_q)))

    def buyer_node(idx: tuple[int, ...]) -> Decision:
        prices = [params.prices[i] for i in idx]
        children = []
        for label in buyer_actions:
            vendor, q = params.buyer_action(label)
            children.append(Leaf(outcome_utilities(params, prices, vendor, q)))
        return Decision(0, buyer_info_set(idx), buyer_actions, tuple(children))

    def vendor_node(j: int, idx: tuple[int, ...]) -> Decision:
        kids = []
        for k in range(m):
            nxt = idx + (k,)
            kids.append(vendor_node(j + 1, nxt) if j < params.n else buyer_node(nxt))
        return Decision(j, vendor_info_set(j), tuple(range(m)), tuple(kids))

    return GameTree(vendor_node(1, ()), params.players)


# -------------------------------------------------------------- profiles

@dataclass(frozen=True)
class PopsicleProfile:
    """On-path prices plus the buyer's policy at every price vector.

    ``buyer_policy`` maps a tuple of prices to a distribution over
    ``(vendor, q)`` pairs.  Price vectors missing from it are left
    unassigned in the converted strategy profile.
    """

    prices: tuple[Fraction, ...]
    buyer_policy: Mapping[tuple[Fraction, ...], Mapping[tuple[int, Fraction], Fraction]] = field(
        default_factory=dict
    )

    def buyer_at(self, prices: tuple[Fraction, ...]) -> Mapping[tuple[int, Fraction], Fraction]:
        return self.buyer_policy[tuple(prices)]


def to_strategy_profile(params: PopsicleParams, profile: PopsicleProfile) -> StrategyProfile:
    if len(profile.prices) != params.n:
        raise GridError(f"expected {params.n} prices, got {len(profile.prices)}")
    dists: dict[str, dict[int, Fraction]] = {}
    for j, p in enumerate(profile.prices, start=1):
        dists[vendor_info_set(j)] = {params.price_index(p): Fraction(1)}
    for idx in product(range(len(params.prices)), repeat=params.n):
        prices = tuple(params.prices[i] for i in idx)
        policy = profile.buyer_policy.get(prices)
        if policy is None:
            continue
        if sum(policy.values()) != 1:
            raise GridError(f"buyer distribution at {prices} does not sum to 1")
        dists[buyer_info_set(idx)] = {
            params.buyer_label(v, q): Fraction(w) for (v, q), w in policy.items() if w
        }
    return StrategyProfile(dists)


def evaluate_profile(params: PopsicleParams, profile: PopsicleProfile) -> tuple[Fraction, ...]:
    """Expected utilities by direct substitution (no tree)."""
    for p in profile.prices:
        params.price_index(p)
    policy = profile.buyer_at(tuple(profile.prices))
    if sum(policy.values()) != 1:
        raise GridError("buyer distribution does not sum to 1")
    u = [Fraction(0)] * params.players
    for (vendor, q), w in policy.items():
        params.q_index(q)
        if not 1 <= vendor <= params.n:
            raise GridError(f"vendor index {vendor} outside 1..{params.n}")
        price = profile.prices[vendor - 1]
        u[0] += w * buyer_value(params, price, q, vendor)
        u[vendor] += w * ((1 - params.alpha) * price + q)
    return tuple(u)


def buyer_best_response(params: PopsicleParams, prices: Sequence[Fraction]) -> set[tuple[int, Fraction]]:
    """Exact argmax of the buyer's value over (vendor, q).

    The value falls strictly in ``q`` whenever the vendor's weight is positive,
    so maximizers use ``q = 0`` unless that weight vanishes (``d = 0`` and a
    late vendor), in which case every ``q`` ties.
    """
    for p in prices:
        params.price_index(p)
    values = {
        (i, q): buyer_value(params, prices[i - 1], q, i)
        for i in range(1, params.n + 1)
        for q in params.buyer_q
    }
    best = max(values.values())
    return {k for k, v in values.items() if v == best}


def best_response_policy(params: PopsicleParams, tie: str = "first"):
    """Buyer policy over the whole price grid: best responses with a tie rule.

    ``tie`` is ``"first"`` (earliest vendor, smallest q) or ``"uniform"``
    (uniform over the argmax vendors at q = 0 where possible).
    """
    policy = {}
    for idx in product(range(len(params.prices)), repeat=params.n):
        prices = tuple(params.prices[i] for i in idx)
        br = sorted(buyer_best_response(params, prices))
        if tie == "uniform":
            zero = [x for x in br if x[1] == 0] or br
            w = Fraction(1, len(zero))
            policy[prices] = {x: w for x in zero}
        else:
            policy[prices] = {br[0]: Fraction(1)}
    return policy


def vanilla_equilibrium(params: PopsicleParams) -> PopsicleProfile:
    """Canonical subgame-perfect profile of the game without commitments.

    ``d = 1``: every vendor prices at 0 and the buyer splits uniformly among
    the cheapest vendors everywhere.  ``d < 1``: vendor 1 prices at ``1 - d``,
    vendor 2 at 0, the rest at 1; the buyer best-responds choosing the
    earliest vendor on ties.
    """
    if params.d == 1:
        prices = tuple(Fraction(0) for _ in range(params.n))
        return PopsicleProfile(prices, best_response_policy(params, tie="uniform"))
    target = 1 - params.d
    if target not in params.prices:
        raise GridError(f"grid-compatibility: 1 - d = {target} is not on the price grid")
    prices = (target, Fraction(0)) + tuple(Fraction(1) for _ in range(params.n - 2))
    return PopsicleProfile(prices, best_response_policy(params, tie="first"))


def tree_utility(params: PopsicleParams, profile: PopsicleProfile,
                 tree: GameTree | None = None) -> tuple[Fraction, ...]:
    tree = tree or build_popsicle(params)
    return expected_utility(tree, to_strategy_profile(params, profile))
