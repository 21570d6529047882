from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from mevcommit.game_core import Decision, GameTree, leaf
from mevcommit.popsicle import PopsicleParams

settings.register_profile("default", max_examples=50, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

F = Fraction


def fig2_game() -> GameTree:
    """Player 1 moves first: left hands the move to player 2, right ends the game.

    Player 0 is present but idle so player indices match the figure.
    """
    inner = Decision(2, "p2", (0, 1), (leaf(0, 2, 1), leaf(0, 0, 2)))
    root = Decision(1, "p1", (0, 1), (inner, leaf(0, 1, 0)))
    return GameTree(root, 3)


@pytest.fixture
def fig2():
    return fig2_game()


@pytest.fixture
def attack_params():
    return PopsicleParams(2, "1/2", "1/4", prices="0,1/2,1", q_grid="0,1")


@pytest.fixture
def small_params():
    return PopsicleParams(2, "1/2", "1/4", prices="0,1/2,1", q_grid="0", side_payments=False)
