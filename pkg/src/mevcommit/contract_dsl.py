"""A small language for conditional commitment contracts.

Example (vendor 1 undercuts unless everyone else prices at 1 or the buyer
pledges a side payment)::

    owner 1
    if exists vendor j != OWNER : committed(j) != 1 then commit_price(0)
    else if buyer_pledges(i*=1, q=1) then commit_price(0)
    else commit_price(1)
    end

Grammar::

    contract := {header} {rule} "else" action ["end"]
    header   := "owner" INT | "sweetener" RATIONAL
    rule     := ["else"] "if" pred "then" action
    pred     := conj {"or" conj}
    conj     := unary {"and" unary}
    unary    := "not" unary | "(" pred ")" | exists | pledged | compare
    exists   := "exists" "vendor" NAME "!=" ("OWNER" | INT) ":" unary
    pledged  := "buyer_pledges" "(" "i*" "=" index "," "q" "=" RATIONAL ")"
    compare  := "committed" "(" index ")" ("==" | "!=") RATIONAL
    action   := "commit_price" "(" RATIONAL ")" | "pledge" "(" INT "," RATIONAL ")"

``committed(j) == v`` holds when every equilibrium-consistent price of
vendor ``j`` in the branch is ``v``; ``committed(j) != v`` holds when some
equilibrium-consistent price differs from ``v``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .commitment import Cut, ExpandedGame, committed_prices, forced_action
from .errors import ContractCompileError, ContractSyntaxError, ContractTypeError, GridError
from .popsicle import PopsicleParams
from .rational import parse_rational, short

OWNER = "OWNER"


# ---------------------------------------------------------------- AST

@dataclass(frozen=True)
class Committed:
    vendor: Union[int, str]
    op: str
    value: Fraction


@dataclass(frozen=True)
class BuyerPledges:
    vendor: Union[int, str]
    q: Fraction


@dataclass(frozen=True)
class Not:
    arg: "Predicate"


@dataclass(frozen=True)
class And:
    args: tuple


@dataclass(frozen=True)
class Or:
    args: tuple


@dataclass(frozen=True)
class Exists:
    var: str
    excluded: Union[int, str]
    body: "Predicate"


Predicate = Union[Committed, BuyerPledges, Not, And, Or, Exists]


@dataclass(frozen=True)
class CommitPrice:
    price: Fraction


@dataclass(frozen=True)
class Pledge:
    vendor: int
    q: Fraction


Action = Union[CommitPrice, Pledge]


@dataclass(frozen=True)
class Rule:
    guard: Predicate
    action: Action


@dataclass(frozen=True)
class Contract:
    owner: int
    rules: tuple[Rule, ...]
    otherwise: Action
    sweetener: Fraction | None = None

    @property
    def name(self) -> str:
        return f"contract[{self.owner}]"


# -------------------------------------------------------------- lexer

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<decimal>-?\d+\.\d*)
  | (?P<rational>-?\d+\s*/\s*\d+)
  | (?P<int>-?\d+)
  | (?P<istar>i\*)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>==|!=|[():,=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    out = []
    line, line_start, pos = 1, 0, 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if not m:
            raise ContractSyntaxError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "decimal":
            raise ContractSyntaxError(f"decimal {m.group()!r} not allowed; write a/b", line, col)
        elif kind not in ("ws", "comment"):
            out.append(Token(kind, m.group(), line, col))
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


# ------------------------------------------------------------- parser

class _Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.i = 0

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.peek()
        found = tok.text or "end of input"
        raise ContractSyntaxError(f"{msg} (found {found!r})", tok.line, tok.col)

    def next(self) -> Token:
        tok = self.peek()
        self.i += 1
        return tok

    def accept(self, text: str) -> bool:
        if self.peek().text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if self.peek().text != text:
            self.error(f"expected {text!r}")
        return self.next()

    def rational(self) -> Fraction:
        tok = self.peek()
        if tok.kind not in ("int", "rational"):
            self.error("expected a rational a/b")
        self.next()
        return parse_rational(tok.text.replace(" ", ""))

    def integer(self) -> int:
        tok = self.peek()
        if tok.kind != "int":
            self.error("expected an integer")
        self.next()
        return int(tok.text)

    def index(self) -> Union[int, str]:
        tok = self.peek()
        if tok.kind == "int":
            return self.integer()
        if tok.kind == "name" and tok.text not in _KEYWORDS:
            self.next()
            return tok.text
        self.error("expected an index or bound variable")

    def contract(self, owner: int | None) -> Contract:
        sweetener = None
        while self.peek().text in ("owner", "sweetener"):
            if self.next().text == "owner":
                owner = self.integer()
            else:
                sweetener = self.rational()
        if owner is None:
            owner = 1
        rules = []
        while True:
            tok = self.peek()
            if tok.text == "if":
                self.next()
            elif tok.text == "else" and self.peek(1).text == "if":
                if not rules:
                    self.error("'else if' before any 'if'")
                self.i += 2
            elif tok.text == "else":
                self.next()
                otherwise = self.action()
                self.accept("end")
                if self.peek().kind != "eof":
                    self.error("trailing input after final else")
                return Contract(owner, tuple(rules), otherwise, sweetener)
            else:
                if tok.kind == "eof":
                    self.error("missing final 'else' branch")
                self.error("expected 'if' or 'else'")
            guard = self.pred()
            self.expect("then")
            rules.append(Rule(guard, self.action()))

    def pred(self) -> Predicate:
        args = [self.conj()]
        while self.accept("or"):
            args.append(self.conj())
        return args[0] if len(args) == 1 else Or(tuple(args))

    def conj(self) -> Predicate:
        args = [self.unary()]
        while self.accept("and"):
            args.append(self.unary())
        return args[0] if len(args) == 1 else And(tuple(args))

    def unary(self) -> Predicate:
        tok = self.peek()
        if self.accept("not"):
            return Not(self.unary())
        if self.accept("("):
            p = self.pred()
            self.expect(")")
            return p
        if tok.text == "exists":
            self.next()
            self.expect("vendor")
            var = self.next()
            if var.kind != "name" or var.text in _KEYWORDS:
                self.error("expected a variable name", var)
            self.expect("!=")
            excluded: Union[int, str] = OWNER if self.accept(OWNER) else self.integer()
            self.expect(":")
            return Exists(var.text, excluded, self.unary())
        if tok.text == "buyer_pledges":
            self.next()
            self.expect("(")
            self.expect("i*")
            self.expect("=")
            vendor = self.index()
            self.expect(",")
            self.expect("q")
            self.expect("=")
            q = self.rational()
            self.expect(")")
            return BuyerPledges(vendor, q)
        if tok.text == "committed":
            self.next()
            self.expect("(")
            vendor = self.index()
            self.expect(")")
            op = self.next()
            if op.text not in ("==", "!="):
                self.error("expected '==' or '!='", op)
            return Committed(vendor, op.text, self.rational())
        self.error("expected a condition")

    def action(self) -> Action:
        tok = self.next()
        if tok.text == "commit_price":
            self.expect("(")
            v = self.rational()
            self.expect(")")
            return CommitPrice(v)
        if tok.text == "pledge":
            self.expect("(")
            vendor = self.integer()
            self.expect(",")
            q = self.rational()
            self.expect(")")
            return Pledge(vendor, q)
        self.error("expected commit_price(...) or pledge(...)", tok)


_KEYWORDS = {"if", "then", "else", "end", "and", "or", "not", "exists", "vendor", "owner",
             "sweetener", "committed", "buyer_pledges", "commit_price", "pledge", "q", OWNER}


def parse(source: str, params: PopsicleParams | None = None, owner: int | None = None) -> Contract:
    """Parse contract text; with ``params`` the result is also type-checked."""
    ast = _Parser(source).contract(owner)
    if params is not None:
        check_types(ast, params)
    return ast


# ------------------------------------------------------- type checking

def check_types(ast: Contract, params: PopsicleParams) -> None:
    n = params.n

    def vendor_index(v, bound: set[str], what: str):
        if isinstance(v, str):
            if v not in bound:
                raise ContractTypeError(f"unbound variable {v!r} in {what}")
            return
        if not 1 <= v <= n:
            raise ContractTypeError(f"vendor index {v} out of range 1..{n} in {what}")
        if v == ast.owner:
            raise ContractTypeError(f"guard refers to the contract owner {v}")

    def price(v: Fraction, what: str):
        if v not in params.prices:
            raise ContractTypeError(f"{what}: price {short(v)} is off the price grid")

    def payment(q: Fraction, what: str):
        if q not in params.buyer_q:
            raise ContractTypeError(f"{what}: side payment {short(q)} is off the payment grid")

    def pred(p, bound: set[str]):
        if isinstance(p, Committed):
            vendor_index(p.vendor, bound, "committed(...)")
            price(p.value, "committed(...)")
        elif isinstance(p, BuyerPledges):
            if ast.owner == 0:
                raise ContractTypeError("a buyer contract cannot condition on the buyer's own pledge")
            if isinstance(p.vendor, str):
                if p.vendor not in bound:
                    raise ContractTypeError(f"unbound variable {p.vendor!r}")
            elif not 1 <= p.vendor <= n:
                raise ContractTypeError(f"vendor index {p.vendor} out of range 1..{n}")
            payment(p.q, "buyer_pledges(...)")
        elif isinstance(p, Not):
            pred(p.arg, bound)
        elif isinstance(p, (And, Or)):
            for a in p.args:
                pred(a, bound)
        elif isinstance(p, Exists):
            if p.excluded != OWNER and not 1 <= p.excluded <= n:
                raise ContractTypeError(f"vendor index {p.excluded} out of range 1..{n}")
            pred(p.body, bound | {p.var})

    def action(a):
        if isinstance(a, CommitPrice):
            if ast.owner == 0:
                raise ContractTypeError("the buyer cannot commit to a price")
            price(a.price, "commit_price(...)")
        else:
            if ast.owner != 0:
                raise ContractTypeError("only the buyer can pledge")
            if not 1 <= a.vendor <= n:
                raise ContractTypeError(f"vendor index {a.vendor} out of range 1..{n}")
            payment(a.q, "pledge(...)")

    if not 0 <= ast.owner <= n:
        raise ContractTypeError(f"owner {ast.owner} out of range 0..{n}")
    for r in ast.rules:
        pred(r.guard, set())
        action(r.action)
    action(ast.otherwise)
    if ast.sweetener is not None and not 0 < ast.sweetener < 1:
        raise ContractTypeError("sweetener must lie strictly between 0 and 1")


def referenced_players(ast: Contract, n: int) -> set[int]:
    out: set[int] = set()

    def walk(p, bound: dict):
        if isinstance(p, Committed):
            if isinstance(p.vendor, int):
                out.add(p.vendor)
        elif isinstance(p, BuyerPledges):
            out.add(0)
        elif isinstance(p, Not):
            walk(p.arg, bound)
        elif isinstance(p, (And, Or)):
            for a in p.args:
                walk(a, bound)
        elif isinstance(p, Exists):
            excl = ast.owner if p.excluded == OWNER else p.excluded
            out.update(j for j in range(1, n + 1) if j != excl)
            walk(p.body, bound)

    for r in ast.rules:
        walk(r.guard, {})
    return out


# ------------------------------------------------------- pretty printer

def _fmt_pred(p, top: bool = True) -> str:
    if isinstance(p, Committed):
        return f"committed({p.vendor}) {p.op} {short(p.value)}"
    if isinstance(p, BuyerPledges):
        return f"buyer_pledges(i*={p.vendor}, q={short(p.q)})"
    if isinstance(p, Not):
        return f"not {_fmt_pred(p.arg, False)}"
    if isinstance(p, Exists):
        body = f"exists vendor {p.var} != {p.excluded} : {_fmt_pred(p.body, False)}"
        return body if top else f"({body})"
    joiner = " and " if isinstance(p, And) else " or "
    body = joiner.join(_fmt_pred(a, False) for a in p.args)
    return body if top else f"({body})"


def _fmt_action(a) -> str:
    if isinstance(a, CommitPrice):
        return f"commit_price({short(a.price)})"
    return f"pledge({a.vendor}, {short(a.q)})"


def pretty(ast: Contract) -> str:
    lines = [f"owner {ast.owner}"]
    if ast.sweetener is not None:
        lines.append(f"sweetener {short(ast.sweetener)}")
    for k, r in enumerate(ast.rules):
        kw = "if" if k == 0 else "else if"
        lines.append(f"{kw} {_fmt_pred(r.guard)} then {_fmt_action(r.action)}")
    lines.append(f"else {_fmt_action(ast.otherwise)}")
    lines.append("end")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------- built-ins

THEOREM2_SOURCE = """\
owner 1
if exists vendor j != OWNER : committed(j) != 1 then commit_price(0)
else if buyer_pledges(i*=1, q=1) then commit_price(0)
else commit_price(1)
end
"""


def builtin_theorem2(params: PopsicleParams) -> Contract:
    """Vendor 1 undercuts any vendor not pricing at 1, unless paid off by the buyer."""
    if Fraction(0) not in params.prices or Fraction(1) not in params.prices:
        raise GridError("the attack contract needs prices 0 and 1 on the grid")
    if Fraction(1) not in params.buyer_q:
        raise GridError("the attack contract needs side payment 1 on the grid")
    ast = parse(THEOREM2_SOURCE)
    check_types(ast, params)
    return ast


def builtin_sweetened(params: PopsicleParams, epsilon) -> Contract:
    """The attack contract with the buyer's pledge lowered to ``1 - epsilon``."""
    eps = parse_rational(epsilon)
    if not 0 < eps < 1:
        raise GridError(f"epsilon must lie strictly between 0 and 1, got {short(eps)}")
    q = 1 - eps
    if q not in params.buyer_q:
        raise GridError(f"sweetened pledge q = {short(q)} is off the payment grid")
    base = builtin_theorem2(params.replace(q_grid=tuple(sorted(set(params.q_grid) | {Fraction(1)}))))
    rules = (base.rules[0], Rule(BuyerPledges(1, q), base.rules[1].action))
    ast = Contract(base.owner, rules, base.otherwise, sweetener=eps)
    check_types(ast, params)
    return ast


# ---------------------------------------------------------- compilation

class BranchView:
    """What a contract can observe about one fully committed branch."""

    def __init__(self, inner: ExpandedGame, params: PopsicleParams, root, solver):
        self.inner = inner
        self.params = params
        self.root = root
        self.solver = solver
        self._committed: dict[int, set] = {}

    def committed(self, vendor: int) -> set:
        hit = self._committed.get(vendor)
        if hit is None:
            hit = committed_prices(self.inner.tree, vendor, self.params.prices, self.root,
                                   self.solver)
            self._committed[vendor] = hit
        return hit

    def pledge(self) -> tuple[int, Fraction] | None:
        label = forced_action(self.inner.tree, 0, self.root)
        return None if label is None else self.params.buyer_action(label)


def evaluate(p: Predicate, view: BranchView, owner: int, env: dict[str, int] | None = None) -> bool:
    env = env or {}

    def idx(v):
        return env[v] if isinstance(v, str) else v

    if isinstance(p, Committed):
        prices = view.committed(idx(p.vendor))
        if p.op == "==":
            return prices == {p.value}
        return any(v != p.value for v in prices)
    if isinstance(p, BuyerPledges):
        return view.pledge() == (idx(p.vendor), p.q)
    if isinstance(p, Not):
        return not evaluate(p.arg, view, owner, env)
    if isinstance(p, And):
        return all(evaluate(a, view, owner, env) for a in p.args)
    if isinstance(p, Or):
        return any(evaluate(a, view, owner, env) for a in p.args)
    if isinstance(p, Exists):
        excl = owner if p.excluded == OWNER else p.excluded
        return any(
            evaluate(p.body, view, owner, {**env, p.var: j})
            for j in range(1, view.params.n + 1) if j != excl
        )
    raise TypeError(f"not a predicate: {p!r}")


def select_action(ast: Contract, view: BranchView) -> tuple[int, Action]:
    """Index of the first matching rule (``len(rules)`` for else) and its action."""
    for k, r in enumerate(ast.rules):
        if evaluate(r.guard, view, ast.owner):
            return k, r.action
    return len(ast.rules), ast.otherwise


def compile_to_cut(ast: Contract, inner: ExpandedGame, params: PopsicleParams,
                   solver=None, trace: list | None = None) -> Cut:
    """The owner's cut of ``inner`` that plays out the contract in every branch.

    ``inner`` is the game the owner commits over: its commitment nodes belong
    to the players committing after the owner.  When ``trace`` is a list, one
    ``(branch names, rule index, action)`` entry per branch is appended.
    """
    from .equilibrium import SubgameSolver

    check_types(ast, params)
    if ast.owner in inner.ordering:
        raise ContractCompileError(f"owner {ast.owner} already committed inside the game")
    missing = sorted(referenced_players(ast, params.n) - set(inner.ordering))
    if missing:
        raise ContractCompileError(
            f"guard references players {missing} with no commitment node below the owner"
        )
    solver = solver or SubgameSolver(inner.tree)
    tree = inner.tree
    depth = len(inner.ordering)
    owned: dict[tuple, list[str]] = {}
    for s in tree.info_sets_of(ast.owner):
        if not s.commitment:
            owned.setdefault(s.members[0][:depth], []).append(s.id)
    kept: dict[str, list[int]] = {}
    for root in inner.base_roots():
        view = BranchView(inner, params, root, solver)
        rule, act = select_action(ast, view)
        label = _action_label(act, params)
        for iset in owned.get(root, []):
            if label not in tree.info_sets[iset].actions:
                raise ContractCompileError(f"action {_fmt_action(act)} was cut away at {iset!r}")
            kept[iset] = [label]
        if trace is not None:
            trace.append((inner.branch_names(root), rule, act))
    return Cut.make(tree, ast.owner, kept, ast.name)


def _action_label(act: Action, params: PopsicleParams) -> int:
    if isinstance(act, CommitPrice):
        return params.price_index(act.price)
    return params.buyer_label(act.vendor, act.q)


@dataclass(frozen=True)
class ContractEntry:
    """Catalog entry that compiles a contract against the inner game."""

    ast: Contract
    params: PopsicleParams

    @property
    def name(self) -> str:
        return self.ast.name

    def cut(self, inner: ExpandedGame, player: int) -> Cut:
        if player != self.ast.owner:
            raise ContractCompileError(f"contract owned by {self.ast.owner} offered to {player}")
        return compile_to_cut(self.ast, inner, self.params)


def load_contract(source_or_path: str, params: PopsicleParams | None = None) -> Contract:
    """Accept inline contract text or a path to a UTF-8 contract file."""
    text = source_or_path
    if "\n" not in source_or_path and not source_or_path.lstrip().startswith(("if", "else", "owner")):
        with open(source_or_path, encoding="utf-8") as fh:
            text = fh.read()
    return parse(text, params)
