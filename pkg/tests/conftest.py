import itertools
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from coalition_attrib.game import CoalitionGame

DATA = Path(__file__).parent / "data"

ABC_WORTH = {
    (): 0, ("A",): 100, ("B",): 200, ("C",): 300,
    ("A", "B"): 400, ("A", "C"): 500, ("B", "C"): 600, ("A", "B", "C"): 800,
}


def brute_force_shapley(players, worth_of):
    """Average of marginal contributions over every join order, in exact arithmetic.

    ``worth_of`` maps a frozenset of players to a number. Independent of the
    bitmask tables used by the package.
    """
    totals = {p: Fraction(0) for p in players}
    orders = list(itertools.permutations(players))
    for order in orders:
        joined = frozenset()
        for p in order:
            totals[p] += Fraction(worth_of(joined | {p})) - Fraction(worth_of(joined))
            joined = joined | {p}
    return [totals[p] / len(orders) for p in players]


@pytest.fixture
def abc_game():
    players = ("A", "B", "C")
    table = [0.0] * 8
    for coalition, w in ABC_WORTH.items():
        mask = sum(1 << players.index(p) for p in coalition)
        table[mask] = w
    return CoalitionGame(players, np.array(table))


@pytest.fixture
def abc_path():
    return DATA / "abc_game.json"
