"""Exact extensive-form game tools for commitment attacks on a popsicle pricing game."""
from .errors import (
    BudgetExceeded, ContractCompileError, ContractSyntaxError, ContractTypeError,
    CutError, GameStructureError, GridError, MevCommitError, ProfileError,
)
from .game_core import Decision, GameTree, Leaf, StrategyProfile, leaf, play, validate_game
from .popsicle import PopsicleParams, build_popsicle, vanilla_equilibrium

__version__ = "0.1.0"

__all__ = [
    "BudgetExceeded", "ContractCompileError", "ContractSyntaxError", "ContractTypeError",
    "CutError", "GameStructureError", "GridError", "MevCommitError", "ProfileError",
    "Decision", "GameTree", "Leaf", "StrategyProfile", "leaf", "play", "validate_game",
    "PopsicleParams", "build_popsicle", "vanilla_equilibrium",
]
