"""Finite cooperative games and exact Shapley values.

A coalition is an int bitmask over player indices: bit ``i`` set means
player ``i`` is a member. The characteristic function is stored as a dense
table of ``2**n`` worths indexed by that mask.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import SizeLimitError, ValidationError

MAX_PLAYERS = 20
MAX_PERMUTATION_PLAYERS = 10


def popcount(mask):
    return bin(mask).count("1")


def mask_of(indices):
    mask = 0
    for i in indices:
        mask |= 1 << i
    return mask


def members(mask, n):
    return [i for i in range(n) if mask >> i & 1]


@dataclass(frozen=True)
class CoalitionGame:
    """Characteristic function over every subset of ``players``.

    Parameters
    ----------
    players : sequence of str
        Player identifiers, in the order that defines bit positions.
    worth : array_like of shape (2**n,)
        ``worth[mask]`` is the worth of the coalition encoded by ``mask``.
    max_players : int
        Upper bound on ``n``; dense tables grow as ``2**n``.
    """

    players: tuple
    worth: np.ndarray
    max_players: int = MAX_PLAYERS

    def __post_init__(self):
        players = tuple(str(p) for p in self.players)
        n = len(players)
        if n < 1:
            raise ValidationError("a game needs at least one player")
        if n > self.max_players:
            raise SizeLimitError("coalition game", n, self.max_players)
        if len(set(players)) != n:
            raise ValidationError(f"duplicate player names in {list(players)}")
        worth = np.array(self.worth, dtype=np.float64).reshape(-1)
        if worth.shape[0] != 1 << n:
            raise ValidationError(
                f"worth table has {worth.shape[0]} entries, expected {1 << n} for {n} players"
            )
        if not np.all(np.isfinite(worth)):
            bad = [coalition_key(players, int(m)) for m in np.flatnonzero(~np.isfinite(worth))]
            raise ValidationError(f"non-finite worth for coalitions {bad}")
        worth.setflags(write=False)
        object.__setattr__(self, "players", players)
        object.__setattr__(self, "worth", worth)

    @property
    def n_players(self):
        return len(self.players)

    @property
    def grand_mask(self):
        return (1 << self.n_players) - 1

    def __call__(self, mask):
        return float(self.worth[mask])

    def __add__(self, other):
        if not isinstance(other, CoalitionGame):
            return NotImplemented
        if other.players != self.players:
            raise ValidationError("games must share the same ordered player set")
        return CoalitionGame(self.players, self.worth + other.worth, self.max_players)

    @classmethod
    def from_function(cls, players, value_fn, max_players=MAX_PLAYERS):
        """Tabulate ``value_fn(mask)`` for every coalition mask."""
        n = len(players)
        if n > max_players:
            raise SizeLimitError("coalition game", n, max_players)
        worth = np.array([value_fn(m) for m in range(1 << n)], dtype=np.float64)
        return cls(tuple(players), worth, max_players)

    @classmethod
    def from_mapping(cls, players, worth):
        """Build from ``{coalition_key: worth}`` with keys as in the JSON format."""
        players = tuple(str(p) for p in players)
        n = len(players)
        if n > MAX_PLAYERS:
            raise SizeLimitError("coalition game", n, MAX_PLAYERS)
        index = {coalition_key(players, m): m for m in range(1 << n)}
        unknown = sorted(k for k in worth if k not in index)
        if unknown:
            raise ValidationError(
                f"unknown coalitions {unknown}; keys are comma-joined player names "
                f"in player-list order {list(players)}"
            )
        missing = [k for k, m in sorted(index.items(), key=lambda kv: kv[1]) if k not in worth]
        if missing:
            raise ValidationError(f"missing worth for coalitions {missing}")
        table = np.empty(1 << n, dtype=np.float64)
        for key, m in index.items():
            try:
                table[m] = float(worth[key])
            except (TypeError, ValueError):
                raise ValidationError(
                    f"worth of coalition {key!r} is not a number: {worth[key]!r}"
                ) from None
        return cls(players, table)

    def to_mapping(self):
        return {coalition_key(self.players, m): float(self.worth[m])
                for m in range(1 << self.n_players)}


def coalition_key(players, mask):
    return ",".join(p for i, p in enumerate(players) if mask >> i & 1)


@dataclass(frozen=True)
class ShapleyAllocation:
    players: tuple
    values: np.ndarray
    grand_worth: float
    empty_worth: float

    @property
    def efficiency_gap(self):
        return math.fsum(self.values) - (self.grand_worth - self.empty_worth)

    def is_efficient(self, rtol=1e-9):
        scale = max(1.0, abs(self.grand_worth - self.empty_worth))
        return abs(self.efficiency_gap) <= rtol * scale

    def as_dict(self):
        return dict(zip(self.players, (float(v) for v in self.values)))


def _allocation(game, values):
    values = np.asarray(values, dtype=np.float64)
    values.setflags(write=False)
    return ShapleyAllocation(
        game.players, values, float(game.worth[game.grand_mask]), float(game.worth[0])
    )


def marginal_contribution(game, player, coalition):
    """Worth gained when ``player`` joins ``coalition`` (a bitmask)."""
    n = game.n_players
    if not 0 <= player < n:
        raise ValidationError(f"player index {player} out of range for {n} players")
    if coalition < 0 or coalition >> n:
        raise ValidationError(f"coalition mask {coalition} outside the game's {n} players")
    bit = 1 << player
    if coalition & bit:
        raise ValidationError(f"player {game.players[player]!r} is already in the coalition")
    return float(game.worth[coalition | bit] - game.worth[coalition])


def shapley_by_permutations(game, max_players=MAX_PERMUTATION_PLAYERS):
    """Average marginal contribution over all ``n!`` join orders."""
    n = game.n_players
    if n > max_players:
        raise SizeLimitError("permutation enumeration", n, max_players,
                             "use shapley_by_subsets")
    totals = [[] for _ in range(n)]
    worth = game.worth.tolist()
    for order in itertools.permutations(range(n)):
        mask = 0
        for player in order:
            joined = mask | 1 << player
            totals[player].append(worth[joined] - worth[mask])
            mask = joined
    count = math.factorial(n)
    return _allocation(game, [math.fsum(t) / count for t in totals])


def subset_weights(n):
    """``w[k] = k! (n-k-1)! / n!``, the weight of a size-``k`` coalition."""
    return np.array(
        [math.factorial(k) * math.factorial(n - k - 1) / math.factorial(n) for k in range(n)]
    )


def shapley_from_tables(worth, n):
    """Shapley values for a batch of worth tables.

    ``worth`` has shape ``(k, 2**n)``; returns shape ``(k, n)``.
    """
    worth = np.asarray(worth, dtype=np.float64)
    masks = np.arange(1 << n)
    sizes = np.array([popcount(int(m)) for m in masks])
    weights = subset_weights(n)
    out = np.empty((worth.shape[0], n))
    for i in range(n):
        bit = 1 << i
        without = masks[(masks & bit) == 0]
        gains = worth[:, without | bit] - worth[:, without]
        out[:, i] = gains @ weights[sizes[without]]
    return out


def shapley_by_subsets(game, max_players=MAX_PLAYERS):
    """Shapley values through the size-weighted sum over coalitions, O(n 2^n)."""
    n = game.n_players
    if n > max_players:
        raise SizeLimitError("subset enumeration", n, max_players)
    return _allocation(game, shapley_from_tables(game.worth[None, :], n)[0])


def load_game(path):
    """Read a game from the JSON file format.

    ``{"players": [...], "worth": {"": 0, "A": 100, "A,B": 400, ...}}``
    """
    text = Path(path).read_text()
    return parse_game(text, source=str(path))


def parse_game(text, source="<string>"):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        lines = text.splitlines()
        context = lines[exc.lineno - 1] if 0 < exc.lineno <= len(lines) else ""
        raise ValidationError(
            f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {context}"
        ) from None
    if not isinstance(doc, dict) or "players" not in doc or "worth" not in doc:
        raise ValidationError(f"{source}: expected an object with 'players' and 'worth'")
    players, worth = doc["players"], doc["worth"]
    if not isinstance(players, list) or not all(isinstance(p, str) for p in players):
        raise ValidationError(f"{source}: 'players' must be a list of strings")
    if not isinstance(worth, dict):
        raise ValidationError(f"{source}: 'worth' must be an object")
    return CoalitionGame.from_mapping(players, worth)


def dump_game(game, path=None):
    text = json.dumps({"players": list(game.players), "worth": game.to_mapping()}, indent=2)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text
