"""Named example games with fixed payoff tensors.

Two-player entries are written as the row player's matrix ``A`` and the column
player's matrix ``B``.  The diamond games are zero-sum (``B = -A``); their
tensors were found by searching small integer matrices and are frozen here
because only their response graphs matter.
"""

from __future__ import annotations

import numpy as np

from .game import Game


def _bimatrix(name, a, b, labels=None) -> Game:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return Game(a.shape, np.stack([a, b], axis=-1), labels=labels, name=name)


def _mp() -> Game:
    a = [[1, -1], [-1, 1]]
    return _bimatrix("mp", a, np.negative(a), labels=(("H", "T"), ("H", "T")))


def _rps() -> Game:
    a = [[0, -1, 1], [1, 0, -1], [-1, 1, 0]]
    return _bimatrix("rps", a, np.negative(a), labels=(("R", "P", "S"), ("R", "P", "S")))


def _co() -> Game:
    a = [[1, 0], [0, 1]]
    return _bimatrix("co", a, a)


def _sd() -> Game:
    # row strategy 0 dominates by 1; the column player matches the row player
    return _bimatrix("sd", [[1, 1], [0, 0]], [[1, 0], [0, 1]])


def _dd() -> Game:
    # strategy 0 dominates by 1 for both players
    return _bimatrix("dd", [[1, 1], [0, 0]], [[1, 0], [1, 0]])


def _inner_diamond() -> Game:
    a = [[-4, -2, 4], [2, 0, 1], [3, -1, -4]]
    return _bimatrix("inner_diamond", a, np.negative(a))


def _outer_diamond() -> Game:
    a = [[4, 3, -1], [-2, 1, 0], [-4, 2, 3]]
    return _bimatrix("outer_diamond", a, np.negative(a))


def _cmmp() -> Game:
    # circular pennies: players 1 and 2 want to match the next player,
    # player 3 wants to mismatch player 1
    pay = np.zeros((2, 2, 2, 3))
    for s1 in range(2):
        for s2 in range(2):
            for s3 in range(2):
                pay[s1, s2, s3] = (
                    1.0 if s1 == s2 else -1.0,
                    1.0 if s2 == s3 else -1.0,
                    1.0 if s3 != s1 else -1.0,
                )
    return Game((2, 2, 2), pay, name="cmmp")


_BUILDERS = {
    "mp": _mp,
    "rps": _rps,
    "co": _co,
    "sd": _sd,
    "dd": _dd,
    "inner_diamond": _inner_diamond,
    "outer_diamond": _outer_diamond,
    "cmmp": _cmmp,
}

CATALOG_NAMES = tuple(_BUILDERS)


def catalog(name: str) -> Game:
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise KeyError(f"unknown catalog game {name!r}; available: {', '.join(CATALOG_NAMES)}") from None
