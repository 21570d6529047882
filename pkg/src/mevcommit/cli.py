"""Command-line scenario runner.

    mevcommit build  --n 2 --d 1/2 --prices 0,1/2,1
    mevcommit solve  --n 2 --d 1
    mevcommit attack --n 2 --d 1/2 --alpha 1/4 --q 0,1
    mevcommit sweep  --n-list 2 --d-list 1/4,1/2,3/4 --alpha-list 0,1/4 --out sweep.csv
    mevcommit run    scenario.json

Exit codes: 0 ok, 1 verification failed, 2 budget exceeded, 3 invalid config.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .commitment import CommitmentBudget, expand_sequence
from .contract_dsl import builtin_sweetened, builtin_theorem2, load_contract
from .equilibrium import (
    EXHAUSTIVE, SubgameSolver, is_subgame_perfect, solve_backward_induction,
    enumerate_equilibria, utility_set,
)
from .errors import (
    BudgetExceeded, ContractCompileError, ContractSyntaxError, ContractTypeError, GridError,
)
from .game_core import dumps_game, validate_game
from .micro import random_perfect_info_game
from .popsicle import (
    LINEAR, MULTIPLICATIVE, PopsicleParams, build_popsicle, node_budget, to_strategy_profile,
    vanilla_equilibrium,
)
from .rational import fmt, fmt_vector, parse_grid, parse_rational
from .resilience import check_resilience, paper_ordering, popsicle_schema, verify_attack

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_BUDGET = 2
EXIT_CONFIG = 3

MODES = ("vanilla", "attack", "resilience", "expand", "oracle")


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    params: PopsicleParams
    mode: str = "vanilla"
    ordering: tuple[int, ...] | None = None
    contract: str | None = None
    epsilon: Fraction | None = None
    budget_nodes: int | None = None
    budget_cuts: int = 10_000
    out: str | None = None
    tie_mixtures: bool = False
    schema: bool = True
    games: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if self.budget_nodes is not None and self.budget_nodes <= 0:
            raise ConfigError("budget_nodes must be positive")
        if self.budget_cuts <= 0:
            raise ConfigError("budget_cuts must be positive")
        if self.ordering is not None:
            if sorted(self.ordering) != list(range(self.params.n + 1)):
                raise ConfigError(f"ordering {list(self.ordering)} must list players 0..{self.params.n} once")
        if self.epsilon is not None and not 0 < self.epsilon < 1:
            raise ConfigError("epsilon must lie strictly between 0 and 1")

    @property
    def budget(self) -> CommitmentBudget:
        return CommitmentBudget(node_budget(self.budget_nodes), self.budget_cuts)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        try:
            params = PopsicleParams.from_dict(d.pop("params"))
        except KeyError:
            raise ConfigError("config needs a 'params' object") from None
        if d.get("ordering") is not None:
            d["ordering"] = tuple(int(x) for x in d["ordering"])
        if d.get("epsilon") is not None:
            d["epsilon"] = parse_rational(d["epsilon"])
        known = set(cls.__dataclass_fields__) - {"params"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(params=params, **d)


def load_config(path) -> ScenarioConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ScenarioConfig.from_dict(raw)


# ------------------------------------------------------------- scenarios

@dataclass
class Outcome:
    status: int
    summary: str
    files: dict[str, str] = field(default_factory=dict)


def _vanilla(cfg: ScenarioConfig) -> Outcome:
    p = cfg.params
    tree = build_popsicle(p, cfg.budget.max_nodes)
    profile = vanilla_equilibrium(p)
    rep = is_subgame_perfect(tree, to_strategy_profile(p, profile))
    u = rep.utilities
    expected_u0 = Fraction(1) if p.d == 1 else p.d
    ok = rep.verdict and u[0] == expected_u0
    spe = utility_set(SubgameSolver(tree, cfg.tie_mixtures, cfg.budget.max_nodes).outcomes())
    theorem_set = {u} if p.d < 1 else {tuple([Fraction(1)] + [Fraction(0)] * p.n)}
    report = {
        "mode": "vanilla",
        "params": p.to_dict(),
        "prices": [fmt(x) for x in profile.prices],
        "equilibrium": rep.to_dict(),
        "u0_expected": fmt(expected_u0),
        "spe_utilities": sorted(fmt_vector(v) for v in spe),
        "spe_unique_outcome": spe == theorem_set,
    }
    if p.d < 1:
        report["bound_one_minus_alpha"] = u[1] <= (1 - p.alpha) * (1 - p.d)
        report["bound_alpha"] = u[1] <= p.alpha * (1 - p.d)
    lines = [
        f"u0 = {u[0]}",
        f"u = {fmt_vector(u)}; subgame perfect: {'yes' if rep.verdict else 'no'}",
        f"distinct SPE utility vectors: {len(spe)}",
    ]
    return Outcome(EXIT_OK if ok else EXIT_FAILED, "\n".join(lines),
                   {"vanilla.json": json.dumps(report, indent=1) + "\n"})


def _contract_for(cfg: ScenarioConfig):
    p = cfg.params
    if cfg.contract:
        return load_contract(cfg.contract, p)
    if cfg.epsilon is not None:
        return builtin_sweetened(p, cfg.epsilon)
    return builtin_theorem2(p)


def _attack(cfg: ScenarioConfig) -> Outcome:
    rep = verify_attack(cfg.params, _contract_for(cfg), budget=cfg.budget)
    summary = (f"u = {fmt_vector(rep.utilities)}; equilibrium: {'yes' if rep.verdict else 'no'}\n"
               + "\n".join("  " + t for t in rep.trace))
    return Outcome(EXIT_OK if rep.verdict else EXIT_FAILED, summary,
                   {"attack.json": rep.dumps() + "\n"})


def _resilience(cfg: ScenarioConfig) -> Outcome:
    p = cfg.params
    contracts = [_contract_for(cfg)] if (cfg.contract or 1 in p.q_grid or cfg.epsilon) else []
    orderings = [cfg.ordering] if cfg.ordering else None
    rep = check_resilience(p, orderings, contracts, cfg.budget, cfg.schema, cfg.tie_mixtures)
    w = rep.witness
    lines = [f"verdict: {rep.verdict}"]
    if w:
        lines.append(f"witness: ordering {w['ordering']}, u = "
                     f"{fmt_vector(parse_rational(x) for x in w['utilities'])}")
    return Outcome(EXIT_OK, "\n".join(lines),
                   {"resilience.json": rep.dumps() + "\n", "resilience.csv": rep.csv()})


def _expand(cfg: ScenarioConfig) -> Outcome:
    p = cfg.params
    ordering = cfg.ordering or paper_ordering(p.n)
    base = build_popsicle(p, cfg.budget.max_nodes)
    schema = None
    if cfg.schema:
        contracts = [_contract_for(cfg)] if (cfg.contract or 1 in p.q_grid or cfg.epsilon) else []
        schema = popsicle_schema(p, contracts)
    ex = expand_sequence(base, ordering, cfg.budget, schema)
    ok = validate_game(ex.tree).ok
    summary = (f"ordering {list(ordering)}: {ex.tree.size} nodes, "
               f"{len(ex.commitment_nodes)} commitment nodes, valid: {'yes' if ok else 'no'}")
    return Outcome(EXIT_OK if ok else EXIT_FAILED, summary, {"expanded.json": dumps_game(ex.tree)})


def _oracle(cfg: ScenarioConfig) -> Outcome:
    rng = random.Random(cfg.seed)
    mismatches = []
    for k in range(cfg.games):
        g = random_perfect_info_game(rng)
        bi = set(solve_backward_induction(g))
        bf = {prof for prof, _ in enumerate_equilibria(g, refinement="spe")}
        if bi != bf:
            mismatches.append(k)
    summary = f"backward induction vs brute force: {cfg.games - len(mismatches)}/{cfg.games} agree"
    report = {"mode": "oracle", "seed": cfg.seed, "games": cfg.games, "mismatches": mismatches}
    return Outcome(EXIT_FAILED if mismatches else EXIT_OK, summary,
                   {"oracle.json": json.dumps(report, indent=1) + "\n"})


_RUNNERS = {"vanilla": _vanilla, "attack": _attack, "resilience": _resilience,
            "expand": _expand, "oracle": _oracle}


def run_scenario(cfg: ScenarioConfig, out_dir: str | None = None) -> Outcome:
    """Run one scenario; never raises for budget or config problems."""
    try:
        result = _RUNNERS[cfg.mode](cfg)
    except BudgetExceeded as exc:
        return Outcome(EXIT_BUDGET, f"budget exceeded: {exc}")
    except (GridError, ConfigError, ContractSyntaxError, ContractTypeError,
            ContractCompileError) as exc:
        return Outcome(EXIT_CONFIG, f"invalid config: {exc}")
    target = out_dir or cfg.out
    if target:
        d = Path(target)
        d.mkdir(parents=True, exist_ok=True)
        for name, text in result.files.items():
            (d / name).write_text(text)
        (d / "summary.txt").write_text(result.summary + "\n")
    return result


# ------------------------------------------------------------------ sweep

SWEEP_HEADER = [
    "n", "d", "alpha", "vanilla_u", "vanilla_u0", "u1_le_(1-alpha)(1-d)", "u1_le_alpha(1-d)",
    "attack_u", "attack_u1", "attack_ok", "resilience", "error",
]


def _sweep_cell(args) -> list[str]:
    n, d, alpha, prices, q_grid, resilience = args
    row = [str(n), fmt(d), fmt(alpha)]
    try:
        p = PopsicleParams(n, d, alpha, prices=prices, q_grid=q_grid)
        tree = build_popsicle(p)
        rep = is_subgame_perfect(tree, to_strategy_profile(p, vanilla_equilibrium(p)), EXHAUSTIVE)
        u = rep.utilities
        b1 = b2 = ""
        if d < 1:
            b1 = str(u[1] <= (1 - alpha) * (1 - d)).lower()
            b2 = str(u[1] <= alpha * (1 - d)).lower()
        row += [fmt_vector(u), fmt(u[0]), b1, b2]
        atk = verify_attack(p, builtin_theorem2(p), check_spe=False)
        row += [fmt_vector(atk.utilities), fmt(atk.utilities[1]), str(atk.verdict).lower()]
        row.append(check_resilience(p).verdict if resilience else "")
        row.append("")
    except (GridError, BudgetExceeded, ContractTypeError, ValueError) as exc:
        row += [""] * (len(SWEEP_HEADER) - len(row) - 1) + [f"{type(exc).__name__}: {exc}"]
    return row


def sweep(n_values: Sequence[int], d_values: Sequence[Fraction], alpha_values: Sequence[Fraction],
          prices=(0, Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), 1), q_grid=(0, 1),
          resilience: bool = False, workers: int = 1) -> str:
    """CSV with one row per (n, d, alpha), sorted in that order."""
    cells = [(n, Fraction(d), Fraction(a), tuple(prices), tuple(q_grid), resilience)
             for n in sorted(set(n_values))
             for d in sorted(set(map(Fraction, d_values)))
             for a in sorted(set(map(Fraction, alpha_values)))]
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(c) for c in cells]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    w.writerows(rows)
    return buf.getvalue()


# -------------------------------------------------------------------- cli

def _rational_arg(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _grid_arg(text: str) -> tuple[Fraction, ...]:
    try:
        return parse_grid(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _ints_arg(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_instance_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=2, help="number of vendors")
    p.add_argument("--d", type=_rational_arg, default=Fraction(1, 2), help="discount, a/b")
    p.add_argument("--alpha", type=_rational_arg, default=Fraction(1, 4), help="tax rate, a/b")
    p.add_argument("--prices", type=_grid_arg, default=parse_grid("0,1/2,1"))
    p.add_argument("--q", type=_grid_arg, default=parse_grid("0,1"), help="side-payment grid")
    p.add_argument("--discount-mode", choices=(MULTIPLICATIVE, LINEAR), default=MULTIPLICATIVE)
    p.add_argument("--kappa", type=_rational_arg, default=None)
    p.add_argument("--order", type=_ints_arg, default=None, help="commitment ordering, e.g. 1,2,0")
    p.add_argument("--contract", default=None, help="contract file or inline text")
    p.add_argument("--epsilon", type=_rational_arg, default=None, help="use the sweetened contract")
    p.add_argument("--budget-nodes", type=int, default=None)
    p.add_argument("--budget-cuts", type=int, default=10_000)
    p.add_argument("--tie-mixtures", action="store_true")
    p.add_argument("--exhaustive", action="store_true", help="enumerate all cuts instead of the schema")
    p.add_argument("--out", default=None, help="output directory")


def _config_from_args(args, mode: str) -> ScenarioConfig:
    params = PopsicleParams(args.n, args.d, args.alpha, prices=args.prices, q_grid=args.q,
                            discount_mode=args.discount_mode, kappa=args.kappa)
    return ScenarioConfig(params, mode, args.order, args.contract, args.epsilon,
                          args.budget_nodes, args.budget_cuts, args.out, args.tie_mixtures,
                          not args.exhaustive)


class _Parser(argparse.ArgumentParser):
    # bad flags are config errors, not argparse's default exit 2 (budget)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="mevcommit", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in [
        ("build", "build the popsicle game tree and write it as JSON"),
        ("solve", "enumerate subgame-perfect outcomes of the game without commitments"),
        ("verify", "check the canonical equilibrium of the game without commitments"),
        ("expand", "build a nested commitment expansion"),
        ("attack", "verify the conditional-contract attack"),
        ("resilience", "check Stackelberg resilience on the given orderings"),
    ]:
        _add_instance_flags(sub.add_parser(name, help=help_))
    sw = sub.add_parser("sweep", help="CSV over n, d and alpha")
    sw.add_argument("--n-list", type=_ints_arg, default=(2,))
    sw.add_argument("--d-list", type=_grid_arg, default=parse_grid("1/4,1/2,3/4"))
    sw.add_argument("--alpha-list", type=_grid_arg, default=parse_grid("0,1/4"))
    sw.add_argument("--prices", type=_grid_arg, default=parse_grid("0,1/4,1/2,3/4,1"))
    sw.add_argument("--q", type=_grid_arg, default=parse_grid("0,1"))
    sw.add_argument("--resilience", action="store_true", help="add the resilience verdict column")
    sw.add_argument("--workers", type=int, default=1)
    sw.add_argument("--out", default=None, help="CSV path (stdout if omitted)")
    run = sub.add_parser("run", help="run a JSON scenario config")
    run.add_argument("config")
    run.add_argument("--out", default=None)
    orc = sub.add_parser("oracle", help="backward induction vs brute force on random games")
    orc.add_argument("--games", type=int, default=100)
    orc.add_argument("--seed", type=int, default=0)
    orc.add_argument("--out", default=None)
    return ap


def _build(args) -> Outcome:
    try:
        cfg = _config_from_args(args, "vanilla")
        tree = build_popsicle(cfg.params, cfg.budget.max_nodes)
    except BudgetExceeded as exc:
        return Outcome(EXIT_BUDGET, f"budget exceeded: {exc}")
    except (GridError, ConfigError) as exc:
        return Outcome(EXIT_CONFIG, f"invalid config: {exc}")
    report = validate_game(tree)
    out = Outcome(EXIT_OK if report.ok else EXIT_FAILED,
                  f"{tree.size} nodes, {len(tree.info_sets)} information sets, "
                  f"valid: {'yes' if report.ok else 'no'}",
                  {"game.json": dumps_game(tree)})
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / "game.json").write_text(out.files["game.json"])
    return out


def _solve(args) -> Outcome:
    try:
        cfg = _config_from_args(args, "vanilla")
        tree = build_popsicle(cfg.params, cfg.budget.max_nodes)
        outs = SubgameSolver(tree, cfg.tie_mixtures, cfg.budget.max_nodes).outcomes()
    except BudgetExceeded as exc:
        return Outcome(EXIT_BUDGET, f"budget exceeded: {exc}")
    except (GridError, ConfigError) as exc:
        return Outcome(EXIT_CONFIG, f"invalid config: {exc}")
    us = sorted(utility_set(outs))
    lines = [f"{len(outs)} subgame-perfect outcomes, {len(us)} distinct utility vectors"]
    lines += ["  " + fmt_vector(u) for u in us]
    text = json.dumps({"params": cfg.params.to_dict(),
                       "utilities": [[fmt(x) for x in u] for u in us]}, indent=1) + "\n"
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / "solve.json").write_text(text)
    return Outcome(EXIT_OK, "\n".join(lines), {"solve.json": text})


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "sweep":
        text = sweep(args.n_list, args.d_list, args.alpha_list, args.prices, args.q,
                     args.resilience, args.workers)
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    if args.command == "build":
        result = _build(args)
    elif args.command == "solve":
        result = _solve(args)
    elif args.command == "run":
        try:
            cfg = load_config(args.config)
        except (ConfigError, GridError) as exc:
            print(f"invalid config: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        result = run_scenario(cfg, args.out)
    elif args.command == "oracle":
        cfg = ScenarioConfig(PopsicleParams(2, 1, 0), "oracle", games=args.games, seed=args.seed)
        result = run_scenario(cfg, args.out)
    else:
        mode = {"verify": "vanilla", "expand": "expand", "attack": "attack",
                "resilience": "resilience"}[args.command]
        try:
            cfg = _config_from_args(args, mode)
        except (GridError, ConfigError) as exc:
            print(f"invalid config: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        result = run_scenario(cfg)
    stream = sys.stdout if result.status in (EXIT_OK, EXIT_FAILED) else sys.stderr
    print(result.summary, file=stream)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
