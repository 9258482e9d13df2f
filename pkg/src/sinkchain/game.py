"""Finite normal-form games, profiles and subgames.

Payoffs are stored as a dense array of shape ``(*strategy_counts, N)``; the
flat view ``payoffs.reshape(-1, N)`` lists profiles in row-major order with
player 1's index varying slowest.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

Profile = tuple[int, ...]


class GameFormatError(ValueError):
    """Raised when a game file cannot be parsed into a valid game."""


@dataclass(frozen=True, eq=False)
class Game:
    strategy_counts: tuple[int, ...]
    payoffs: np.ndarray
    labels: Optional[tuple[tuple[str, ...], ...]] = None
    name: str = ""

    def __post_init__(self):
        counts = tuple(int(c) for c in self.strategy_counts)
        if not counts:
            raise ValueError("a game needs at least one player")
        if any(c < 1 for c in counts):
            raise ValueError(f"strategy counts must be >= 1, got {counts}")
        pay = np.array(self.payoffs, dtype=float)
        n = len(counts)
        if pay.size != n * math.prod(counts):
            raise ValueError(
                f"expected {n * math.prod(counts)} payoff entries, got {pay.size}"
            )
        pay = pay.reshape(counts + (n,))
        if not np.all(np.isfinite(pay)):
            raise ValueError("payoffs must be finite")
        pay.setflags(write=False)
        object.__setattr__(self, "strategy_counts", counts)
        object.__setattr__(self, "payoffs", pay)
        if self.labels is not None:
            labels = tuple(tuple(str(s) for s in ls) for ls in self.labels)
            if tuple(len(ls) for ls in labels) != counts:
                raise ValueError("labels do not match strategy counts")
            object.__setattr__(self, "labels", labels)

    @property
    def num_players(self) -> int:
        return len(self.strategy_counts)

    @property
    def num_profiles(self) -> int:
        return math.prod(self.strategy_counts)

    @property
    def shape_str(self) -> str:
        return "x".join(str(c) for c in self.strategy_counts)

    def profiles(self) -> Iterable[Profile]:
        return itertools.product(*(range(c) for c in self.strategy_counts))

    def payoff(self, profile: Sequence[int]) -> np.ndarray:
        return self.payoffs[tuple(profile)]

    def profile_index(self, profile: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(profile), self.strategy_counts))

    def profile_at(self, index: int) -> Profile:
        return tuple(int(i) for i in np.unravel_index(index, self.strategy_counts))

    def strategy_label(self, player: int, s: int) -> str:
        if self.labels is None:
            return str(s)
        return self.labels[player][s]

    def same_payoffs(self, other: "Game") -> bool:
        return (
            self.strategy_counts == other.strategy_counts
            and np.array_equal(self.payoffs, other.payoffs)
        )


@dataclass(frozen=True)
class SubgameSpec:
    """Per-player sets of retained strategies, stored sorted.

    The sorted tuples double as the index map between a restricted game and
    its parent: strategy ``k`` of the subgame is ``strategies[p][k]``.
    """

    strategies: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        strategies = tuple(tuple(sorted(set(int(s) for s in t))) for t in self.strategies)
        if any(len(t) == 0 for t in strategies):
            raise ValueError("every player needs at least one strategy in a subgame")
        object.__setattr__(self, "strategies", strategies)

    @classmethod
    def full(cls, counts: Sequence[int]) -> "SubgameSpec":
        return cls(tuple(tuple(range(c)) for c in counts))

    @classmethod
    def singleton(cls, profile: Sequence[int]) -> "SubgameSpec":
        return cls(tuple((s,) for s in profile))

    def check(self, counts: Sequence[int]) -> None:
        if len(self.strategies) != len(counts):
            raise ValueError("subgame has the wrong number of players")
        for p, (t, c) in enumerate(zip(self.strategies, counts)):
            if t[0] < 0 or t[-1] >= c:
                raise ValueError(f"player {p}: strategy index out of range in {t}")

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(len(t) for t in self.strategies)

    def profiles(self) -> Iterable[Profile]:
        return itertools.product(*self.strategies)

    def contains_profile(self, profile: Sequence[int]) -> bool:
        return all(s in t for s, t in zip(profile, self.strategies))

    def is_full(self, counts: Sequence[int]) -> bool:
        return self.counts == tuple(counts)

    def issubset(self, other: "SubgameSpec") -> bool:
        return all(set(a) <= set(b) for a, b in zip(self.strategies, other.strategies))

    def lift_profile(self, profile: Sequence[int]) -> Profile:
        return tuple(t[s] for t, s in zip(self.strategies, profile))

    def lift_mixed(self, counts: Sequence[int], x: "MixedProfile") -> "MixedProfile":
        parts = []
        for c, t, xp in zip(counts, self.strategies, x.parts):
            full = np.zeros(c)
            full[list(t)] = xp
            parts.append(full)
        return MixedProfile(tuple(parts))

    def project_mixed(self, x: "MixedProfile") -> "MixedProfile":
        return MixedProfile(tuple(xp[list(t)] for t, xp in zip(self.strategies, x.parts)))

    def __str__(self) -> str:
        return ";".join(",".join(str(s) for s in t) for t in self.strategies)


@dataclass(frozen=True, eq=False)
class MixedProfile:
    """One probability vector per player."""

    parts: tuple[np.ndarray, ...]
    tol: float = field(default=1e-12, repr=False)

    def __post_init__(self):
        parts = tuple(np.array(p, dtype=float).reshape(-1) for p in self.parts)
        for i, p in enumerate(parts):
            if p.size == 0:
                raise ValueError(f"player {i}: empty distribution")
            if np.any(p < 0) or not np.all(np.isfinite(p)):
                raise ValueError(f"player {i}: entries must be finite and >= 0, got {p}")
            if abs(p.sum() - 1.0) > self.tol:
                raise ValueError(f"player {i}: probabilities sum to {p.sum()!r}, not 1")
        for p in parts:
            p.setflags(write=False)
        object.__setattr__(self, "parts", parts)

    @classmethod
    def uniform(cls, counts: Sequence[int]) -> "MixedProfile":
        return cls(tuple(np.full(c, 1.0 / c) for c in counts))

    @classmethod
    def vertex(cls, counts: Sequence[int], profile: Sequence[int]) -> "MixedProfile":
        parts = []
        for c, s in zip(counts, profile):
            v = np.zeros(c)
            v[s] = 1.0
            parts.append(v)
        return cls(tuple(parts))

    @classmethod
    def from_flat(cls, counts: Sequence[int], flat: np.ndarray, tol: float = 1e-12) -> "MixedProfile":
        return cls(tuple(np.split(np.asarray(flat, dtype=float), np.cumsum(counts)[:-1])), tol=tol)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(p.size for p in self.parts)

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate(self.parts)

    def __getitem__(self, player: int) -> np.ndarray:
        return self.parts[player]

    def __len__(self) -> int:
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)


def as_mixed(g: Game, x) -> MixedProfile:
    """Coerce ``x`` to a MixedProfile and check it fits ``g``."""
    if not isinstance(x, MixedProfile):
        x = MixedProfile(tuple(x))
    if x.counts != g.strategy_counts:
        raise ValueError(f"profile shape {x.counts} does not match game {g.strategy_counts}")
    return x


def player_offsets(counts: Sequence[int]) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(counts)])


# ---------------------------------------------------------------------------
# Payoff evaluation


def expected_utility(g: Game, x) -> np.ndarray:
    """Expected payoff vector, summed over every pure profile."""
    x = as_mixed(g, x)
    weight = np.ones(())
    for xp in x.parts:
        weight = np.multiply.outer(weight, xp)
    return np.tensordot(weight, g.payoffs, axes=g.num_players)


def strategy_payoffs(g: Game, parts: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Batched payoff of every pure strategy against the others' mixtures.

    ``parts[p]`` has shape ``(B, |S_p|)``; the result for player ``p`` has the
    same shape and holds ``U_p(s; x_{-p})``.
    """
    n = g.num_players
    if n == 1:
        return [np.broadcast_to(g.payoffs[..., 0], parts[0].shape).copy()]
    if n == 2:
        a = g.payoffs[..., 0]
        b = g.payoffs[..., 1]
        return [parts[1] @ a.T, parts[0] @ b]
    out = []
    batch = parts[0].shape[0]
    for p in range(n):
        # joint weight of the other players' pure antiprofiles, row-major
        w = np.ones((batch, 1))
        for j in range(n):
            if j != p:
                w = (w[:, :, None] * parts[j][:, None, :]).reshape(batch, -1)
        u = np.moveaxis(g.payoffs[..., p], p, 0).reshape(g.strategy_counts[p], -1)
        out.append(w @ u.T)
    return out


# ---------------------------------------------------------------------------
# Profiles and structural predicates


def comparable(p: Sequence[int], q: Sequence[int]) -> Optional[int]:
    """The unique player in whose strategy ``p`` and ``q`` differ, if any."""
    if len(p) != len(q):
        raise ValueError("profiles come from games with different player counts")
    diff = [i for i, (a, b) in enumerate(zip(p, q)) if a != b]
    return diff[0] if len(diff) == 1 else None


def deviations(g: Game, profile: Sequence[int]) -> Iterable[tuple[int, Profile]]:
    """Yield ``(player, q)`` for every profile ``q`` comparable to ``profile``."""
    profile = tuple(profile)
    for i, c in enumerate(g.strategy_counts):
        for s in range(c):
            if s != profile[i]:
                yield i, profile[:i] + (s,) + profile[i + 1:]


def is_strict(g: Game) -> bool:
    for i in range(g.num_players):
        u = np.moveaxis(g.payoffs[..., i], i, -1)
        srt = np.sort(u, axis=-1)
        if np.any(srt[..., 1:] == srt[..., :-1]):
            return False
    return True


def restrict(g: Game, y: SubgameSpec) -> Game:
    y.check(g.strategy_counts)
    pay = g.payoffs[np.ix_(*y.strategies)]
    labels = None
    if g.labels is not None:
        labels = tuple(tuple(g.labels[p][s] for s in t) for p, t in enumerate(y.strategies))
    return Game(y.counts, pay, labels=labels, name=f"{g.name}|{y}" if g.name else "")


def support_subgame(x: MixedProfile, tol: float = 1e-9) -> SubgameSpec:
    supports = []
    for p, xp in enumerate(x.parts):
        s = tuple(int(k) for k in np.flatnonzero(xp > tol))
        if not s:
            raise ValueError(f"player {p} has empty support at tol={tol}")
        supports.append(s)
    return SubgameSpec(tuple(supports))


def iterated_strict_dominance(g: Game) -> SubgameSpec:
    """Remove pure strategies strictly dominated by another pure strategy."""
    alive = [list(range(c)) for c in g.strategy_counts]
    changed = True
    while changed:
        changed = False
        for p in range(g.num_players):
            u = g.payoffs[np.ix_(*alive)][..., p]
            u = np.moveaxis(u, p, 0).reshape(len(alive[p]), -1)
            keep = []
            for a in range(len(alive[p])):
                dominated = any(np.all(u[b] > u[a]) for b in range(len(alive[p])) if b != a)
                if not dominated:
                    keep.append(alive[p][a])
            if len(keep) < len(alive[p]):
                alive[p] = keep
                changed = True
    return SubgameSpec(tuple(tuple(a) for a in alive))


# ---------------------------------------------------------------------------
# Generators


GAME_CLASSES = ("uniform", "zero_sum", "identical_interest")


def random_game(counts: Sequence[int], seed: int, kind: str = "uniform") -> Game:
    counts = tuple(int(c) for c in counts)
    rng = np.random.default_rng(seed)
    n = len(counts)
    if kind == "uniform":
        pay = rng.uniform(0.0, 1.0, size=counts + (n,))
    elif kind == "zero_sum":
        if n != 2:
            raise ValueError("zero_sum games need exactly two players")
        u = rng.uniform(0.0, 1.0, size=counts)
        pay = np.stack([u, -u], axis=-1)
    elif kind == "identical_interest":
        u = rng.uniform(0.0, 1.0, size=counts)
        pay = np.repeat(u[..., None], n, axis=-1)
    else:
        raise ValueError(f"unknown game class {kind!r}; expected one of {GAME_CLASSES}")
    return Game(counts, pay, name=f"random-{kind}-{seed}")


def random_strict_game(counts: Sequence[int], seed: int, kind: str = "uniform") -> Game:
    """Draw with ``random_game`` and redraw on ties (``seed`` steps by 2**32)."""
    k = 0
    while True:
        g = random_game(counts, seed + k * 2**32, kind)
        if is_strict(g):
            return g
        k += 1


# ---------------------------------------------------------------------------
# Zero-sum interior equilibria


def _solve(a: np.ndarray, b: np.ndarray, max_cond: float = 1e10) -> Optional[np.ndarray]:
    """``a^-1 b``, or None when ``a`` is (numerically) singular."""
    if not np.linalg.cond(a) < max_cond:
        return None
    return np.linalg.solve(a, b)


def zero_sum_interior_equilibrium(g: Game, tol: float = 1e-12) -> Optional[MixedProfile]:
    """Full-support Nash equilibrium of a square two-player zero-sum game, if any."""
    if g.num_players != 2:
        raise ValueError("needs a two-player game")
    n1, n2 = g.strategy_counts
    if n1 != n2:
        raise ValueError(f"needs a square game, got {g.shape_str}")
    a = g.payoffs[..., 0]
    if not np.allclose(a, -g.payoffs[..., 1], rtol=0.0, atol=1e-12):
        raise ValueError("game is not zero-sum")
    n = n1
    # column mix y: A y = v 1, sum y = 1 ; row mix x: A^T x = w 1, sum x = 1
    sys_y = np.zeros((n + 1, n + 1))
    sys_y[:n, :n] = a
    sys_y[:n, n] = -1.0
    sys_y[n, :n] = 1.0
    sys_x = np.zeros((n + 1, n + 1))
    sys_x[:n, :n] = a.T
    sys_x[:n, n] = -1.0
    sys_x[n, :n] = 1.0
    rhs = np.zeros(n + 1)
    rhs[n] = 1.0
    sol_y = _solve(sys_y, rhs)
    sol_x = _solve(sys_x, rhs)
    if sol_y is None or sol_x is None:
        return None
    x, y = sol_x[:n], sol_y[:n]
    if np.any(x <= tol) or np.any(y <= tol):
        return None
    value = x @ a @ y
    # best-response check for both players
    if np.max(a @ y) > value + 1e-9 or np.min(x @ a) < value - 1e-9:
        return None
    x = x / x.sum()
    y = y / y.sum()
    return MixedProfile((x, y))


# ---------------------------------------------------------------------------
# File format


def load_game(text: str) -> Game:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameFormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise GameFormatError("top level must be an object")
    players = data.get("players")
    if not isinstance(players, int) or isinstance(players, bool) or players < 1:
        raise GameFormatError("field 'players' must be a positive integer")
    strategies = data.get("strategies")
    if (
        not isinstance(strategies, list)
        or len(strategies) != players
        or not all(isinstance(s, list) and s for s in strategies)
    ):
        raise GameFormatError(
            f"field 'strategies' must be a list of {players} non-empty lists of names"
        )
    counts = tuple(len(s) for s in strategies)
    payoffs = data.get("payoffs")
    n_prof = math.prod(counts)
    if not isinstance(payoffs, list):
        raise GameFormatError("field 'payoffs' must be a list")
    if len(payoffs) != n_prof:
        raise GameFormatError(f"field 'payoffs': expected {n_prof} profiles, got {len(payoffs)}")
    rows = []
    for k, vec in enumerate(payoffs):
        if not isinstance(vec, list) or len(vec) != players:
            raise GameFormatError(f"field 'payoffs'[{k}]: expected a list of {players} numbers")
        row = []
        for v in vec:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise GameFormatError(f"field 'payoffs'[{k}]: non-finite or non-numeric entry {v!r}")
            row.append(float(v))
        rows.append(row)
    name = data.get("name", "")
    if not isinstance(name, str):
        raise GameFormatError("field 'name' must be a string")
    return Game(
        counts,
        np.array(rows).reshape(counts + (players,)),
        labels=tuple(tuple(str(s) for s in ls) for ls in strategies),
        name=name,
    )


def dump_game(g: Game) -> str:
    labels = g.labels or tuple(tuple(str(s) for s in range(c)) for c in g.strategy_counts)
    data = {
        "players": g.num_players,
        "strategies": [list(ls) for ls in labels],
        "payoffs": [[float(v) for v in row] for row in g.payoffs.reshape(-1, g.num_players)],
    }
    if g.name:
        data["name"] = g.name
    return json.dumps(data, indent=1)
