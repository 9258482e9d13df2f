"""The replicator vector field and its numerical flow.

Batched routines work on flat state arrays of shape ``(B, D)`` where each row
concatenates the players' distributions (``D = sum of strategy counts``).
"""

from __future__ import annotations

import io
import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .game import (
    Game,
    MixedProfile,
    SubgameSpec,
    as_mixed,
    player_offsets,
    restrict,
    strategy_payoffs,
    support_subgame,
)


class IntegrationError(RuntimeError):
    def __init__(self, message: str, time: float):
        super().__init__(f"{message} at t={time:.6g}")
        self.time = time


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 0.01
    t_max: float = 1.0
    renorm_tol: float = 1e-9

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_max >= 0:
            raise ValueError("t_max must be non-negative")

    def schedule(self) -> list[float]:
        """Step lengths covering [0, t_max]; only the last one may be shorter."""
        n_full = int(np.floor(self.t_max / self.dt + 1e-9))
        steps = [self.dt] * n_full
        rest = self.t_max - n_full * self.dt
        if rest > 1e-12 * max(1.0, self.t_max):
            steps.append(rest)
        return steps


# ---------------------------------------------------------------------------
# Field evaluation


def _split(g: Game, flat: np.ndarray) -> list[np.ndarray]:
    off = player_offsets(g.strategy_counts)
    return [flat[:, off[p]:off[p + 1]] for p in range(g.num_players)]


def field_batch(g: Game, states: np.ndarray) -> np.ndarray:
    """Replicator velocity for each row of ``states``."""
    parts = _split(g, states)
    pays = strategy_payoffs(g, parts)
    out = np.empty_like(states)
    off = player_offsets(g.strategy_counts)
    for p, (xp, up) in enumerate(zip(parts, pays)):
        avg = np.einsum("bs,bs->b", xp, up)
        out[:, off[p]:off[p + 1]] = xp * (up - avg[:, None])
    return out


def replicator_field(g: Game, x) -> tuple[np.ndarray, ...]:
    x = as_mixed(g, x)
    v = field_batch(g, x.flat[None, :])[0]
    return tuple(np.split(v, np.cumsum(g.strategy_counts)[:-1]))


def replicator_field_alt(g: Game, x) -> tuple[np.ndarray, ...]:
    """Pairwise-difference form: x_s * sum_t x_t * sum_q x_q (u(s;q) - u(t;q))."""
    x = as_mixed(g, x)
    n = g.num_players
    out = []
    for p in range(n):
        others = [j for j in range(n) if j != p]
        weights = {}
        for qbar in itertools.product(*(range(g.strategy_counts[j]) for j in others)):
            w = 1.0
            for j, s in zip(others, qbar):
                w *= x[j][s]
            weights[qbar] = w
        xp = x[p]
        vp = np.zeros(g.strategy_counts[p])
        for s in range(g.strategy_counts[p]):
            if xp[s] == 0.0:
                continue
            acc = 0.0
            for t in range(g.strategy_counts[p]):
                inner = 0.0
                for qbar, w in weights.items():
                    prof_s = qbar[:p] + (s,) + qbar[p:]
                    prof_t = qbar[:p] + (t,) + qbar[p:]
                    inner += w * (g.payoffs[prof_s][p] - g.payoffs[prof_t][p])
                acc += xp[t] * inner
            vp[s] = xp[s] * acc
        out.append(vp)
    return tuple(out)


# ---------------------------------------------------------------------------
# Integration


def _renormalize(g: Game, states: np.ndarray, tol: float) -> None:
    off = player_offsets(g.strategy_counts)
    for p in range(g.num_players):
        block = states[:, off[p]:off[p + 1]]
        sums = block.sum(axis=1)
        bad = np.abs(sums - 1.0) > tol
        if np.any(bad):
            fixed = np.clip(block[bad], 0.0, None)
            fixed /= fixed.sum(axis=1, keepdims=True)
            block[bad] = fixed


def _rk4_step(g: Game, x: np.ndarray, h: float, sign: float) -> np.ndarray:
    k1 = field_batch(g, x)
    k2 = field_batch(g, x + (0.5 * h * sign) * k1)
    k3 = field_batch(g, x + (0.5 * h * sign) * k2)
    k4 = field_batch(g, x + (h * sign) * k3)
    return x + (h * sign / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def flow_batch(
    g: Game,
    states: np.ndarray,
    t: float,
    dt: float = 0.01,
    reverse: bool = False,
    renorm_tol: float = 1e-9,
) -> np.ndarray:
    """Endpoints of the time-``t`` flow from each row of ``states``."""
    cfg = IntegratorConfig(dt=dt, t_max=t, renorm_tol=renorm_tol)
    x = np.array(states, dtype=float, copy=True)
    sign = -1.0 if reverse else 1.0
    clock = 0.0
    for h in cfg.schedule():
        x = _rk4_step(g, x, h, sign)
        clock += h
        _renormalize(g, x, renorm_tol)
        if not np.all(np.isfinite(x)):
            raise IntegrationError("non-finite state", clock)
    return x


@dataclass(frozen=True, eq=False)
class Trajectory:
    strategy_counts: tuple[int, ...]
    times: np.ndarray
    states: np.ndarray  # (len(times), D)

    def __len__(self) -> int:
        return len(self.times)

    def profile(self, k: int) -> MixedProfile:
        return MixedProfile.from_flat(self.strategy_counts, self.states[k], tol=1e-9)

    @property
    def end(self) -> MixedProfile:
        return self.profile(len(self.times) - 1)

    def to_csv(self) -> str:
        cols = ["t"] + [f"{p}_{s}" for p, c in enumerate(self.strategy_counts) for s in range(c)]
        buf = io.StringIO()
        buf.write(",".join(cols) + "\n")
        for t, row in zip(self.times, self.states):
            buf.write(",".join(f"{v:.17g}" for v in (t, *row)) + "\n")
        return buf.getvalue()


def integrate(g: Game, x0, cfg: IntegratorConfig = IntegratorConfig(), reverse: bool = False) -> Trajectory:
    """RK4 trajectory sampled at every step, starting with ``x0`` at t = 0."""
    x0 = as_mixed(g, x0)
    sign = -1.0 if reverse else 1.0
    steps = cfg.schedule()
    states = np.empty((len(steps) + 1, x0.flat.size))
    times = np.empty(len(steps) + 1)
    x = x0.flat[None, :].copy()
    states[0] = x[0]
    times[0] = 0.0
    clock = 0.0
    for k, h in enumerate(steps, start=1):
        x = _rk4_step(g, x, h, sign)
        clock += h
        _renormalize(g, x, cfg.renorm_tol)
        if not np.all(np.isfinite(x)):
            raise IntegrationError("non-finite state", clock)
        states[k] = x[0]
        times[k] = clock
    return Trajectory(g.strategy_counts, times, states)


# ---------------------------------------------------------------------------
# Checks


def subgame_invariance_check(
    g: Game, y: SubgameSpec, x0, t_max: float, dt: float = 0.01
) -> float:
    """Max inf-distance between the full-game and lifted subgame trajectories."""
    x0 = as_mixed(g, x0)
    y.check(g.strategy_counts)
    if not support_subgame(x0, 0.0).issubset(y):
        raise ValueError(f"start point is not supported in subgame {y}")
    cfg = IntegratorConfig(dt=dt, t_max=t_max)
    full = integrate(g, x0, cfg)
    sub = integrate(restrict(g, y), y.project_mixed(x0), cfg)
    counts = g.strategy_counts
    off = player_offsets(counts)
    cols = [off[p] + s for p, t in enumerate(y.strategies) for s in t]
    lifted = np.zeros_like(full.states)
    lifted[:, cols] = sub.states
    return float(np.max(np.abs(full.states - lifted)))


def _log_ratio_velocity(g: Game, flat: np.ndarray) -> np.ndarray:
    v = field_batch(g, flat[None, :])[0]
    rate = v / flat
    off = player_offsets(g.strategy_counts)
    out = []
    for p in range(g.num_players):
        r = rate[off[p]:off[p + 1]]
        out.append(r[1:] - r[0])
    return np.concatenate(out)


def _from_log_ratios(counts: Sequence[int], ycoords: np.ndarray) -> np.ndarray:
    parts = []
    pos = 0
    for c in counts:
        z = np.concatenate([[0.0], ycoords[pos:pos + c - 1]])
        pos += c - 1
        e = np.exp(z - z.max())
        parts.append(e / e.sum())
    return np.concatenate(parts)


def interior_divergence(g: Game, x, h: float = 1e-5) -> float:
    """Divergence of the field in log-ratio coordinates, by central differences."""
    x = as_mixed(g, x)
    flat = x.flat
    if np.any(flat < 10 * h):
        raise ValueError(f"point is within {10 * h:g} of the boundary")
    counts = g.strategy_counts
    ycoords = np.concatenate([np.log(xp[1:] / xp[0]) for xp in x.parts])
    total = 0.0
    for k in range(ycoords.size):
        up = ycoords.copy()
        dn = ycoords.copy()
        up[k] += h
        dn[k] -= h
        fu = _log_ratio_velocity(g, _from_log_ratios(counts, up))[k]
        fd = _log_ratio_velocity(g, _from_log_ratios(counts, dn))[k]
        total += (fu - fd) / (2 * h)
    return float(total)


def log_ratio_field_norm(g: Game, x) -> float:
    x = as_mixed(g, x)
    return float(np.max(np.abs(_log_ratio_velocity(g, x.flat)), initial=0.0))


def kl_potential(x_star: MixedProfile, x) -> float:
    """sum_p KL(x*^p || x^p); constant along zero-sum interior orbits."""
    total = 0.0
    for a, b in zip(x_star.parts, x.parts if isinstance(x, MixedProfile) else x):
        mask = a > 0
        total += float(np.sum(a[mask] * np.log(a[mask] / b[mask])))
    return total


def kl_drift(traj: Trajectory, x_star: MixedProfile) -> float:
    counts = traj.strategy_counts
    splits = np.cumsum(counts)[:-1]
    vals = [kl_potential(x_star, np.split(row, splits)) for row in traj.states]
    return float(max(vals) - min(vals))


def parse_mixed(g: Game, text: str) -> MixedProfile:
    """Parse ``"0.9,0.1;0.5,0.5"`` or ``"uniform"`` into a MixedProfile."""
    text = text.strip()
    if text == "uniform":
        return MixedProfile.uniform(g.strategy_counts)
    chunks = text.split(";")
    if len(chunks) != g.num_players:
        raise ValueError(f"expected {g.num_players} players separated by ';', got {len(chunks)}")
    parts = []
    for p, (chunk, c) in enumerate(zip(chunks, g.strategy_counts)):
        try:
            vals = [float(v) for v in chunk.split(",")]
        except ValueError:
            raise ValueError(f"player {p}: cannot parse {chunk!r}") from None
        if len(vals) != c:
            raise ValueError(f"player {p}: expected {c} probabilities, got {len(vals)}")
        if any(v < 0 for v in vals) or abs(sum(vals) - 1.0) > 1e-9:
            raise ValueError(f"player {p}: {vals} is not a probability vector")
        parts.append(np.array(vals) / sum(vals))
    return MixedProfile(tuple(parts))


def outside_mass(flat: np.ndarray, counts: Sequence[int], y: SubgameSpec) -> np.ndarray:
    """Columns of ``flat`` holding strategies outside ``y``; shape (..., k)."""
    off = player_offsets(counts)
    cols = [off[p] + s for p, c in enumerate(counts) for s in range(c) if s not in y.strategies[p]]
    return flat[..., cols]


def random_interior_points(counts: Sequence[int], n: int, rng: np.random.Generator, margin: float = 0.0) -> np.ndarray:
    parts = []
    for c in counts:
        d = rng.dirichlet(np.ones(c), size=n)
        if margin > 0:
            d = margin + (1 - c * margin) * d
        parts.append(d)
    return np.concatenate(parts, axis=1)


def endpoint_distance(traj: Trajectory, target: MixedProfile) -> float:
    return float(np.max(np.abs(traj.states[-1] - target.flat)))


def support_of_flat(counts, flat, tol=1e-9) -> Optional[SubgameSpec]:
    try:
        return support_subgame(MixedProfile.from_flat(counts, flat, tol=1e-9), tol)
    except ValueError:
        return None
