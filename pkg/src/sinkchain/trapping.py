"""Trapping-radius certificates for attracting subgames.

For a subgame ``Y`` whose profiles are attracting in the response graph, the
set of mixed profiles in which every outside strategy has mass below ``M`` is
a trapping region.  The constants below bound each outside velocity by
``x_s * (alpha_s + M * D)`` and pick ``M`` so the bracket stays negative.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .game import Game, SubgameSpec, is_strict, player_offsets
from .replicator import _renormalize, _rk4_step, field_batch
from .response import build_response_graph, escaping_arc, is_attracting


class CertificateError(ValueError):
    pass


@dataclass(frozen=True)
class PlayerBound:
    player: int
    outside: tuple[int, ...]
    inside: tuple[int, ...]
    q: int  # |Z_{-p} \ Y_{-p}|
    l: int  # |S_p \ Y_p|
    alpha: dict[tuple[int, int], float]
    beta: dict[tuple[int, int], float]
    gamma: dict[int, float]
    alpha_s: dict[int, float]
    radius: dict[int, float]


@dataclass(frozen=True)
class TrappingCertificate:
    subgame: SubgameSpec
    players: tuple[PlayerBound, ...]
    radius: float
    audit_samples: int
    audit_max_velocity: float
    audit_seed: int = 0

    def to_json(self) -> str:
        def pairs(d):
            return {f"{s},{t}": v for (s, t), v in sorted(d.items())}

        data = {
            "subgame": str(self.subgame),
            "M": self.radius,
            "players": [
                {
                    "player": b.player,
                    "outside": list(b.outside),
                    "inside": list(b.inside),
                    "Q": b.q,
                    "L": b.l,
                    "alpha": pairs(b.alpha),
                    "beta": pairs(b.beta),
                    "gamma": {str(s): v for s, v in sorted(b.gamma.items())},
                    "alpha_s": {str(s): v for s, v in sorted(b.alpha_s.items())},
                    "M_s": {str(s): v for s, v in sorted(b.radius.items())},
                }
                for b in self.players
            ],
            "audit": {
                "samples": self.audit_samples,
                "seed": self.audit_seed,
                "max_outside_velocity": self.audit_max_velocity,
                "passed": self.audit_max_velocity < 0,
            },
        }
        return json.dumps(data, indent=1, sort_keys=True)


def _antiprofiles(g: Game, p: int, y: SubgameSpec):
    others = [j for j in range(g.num_players) if j != p]
    every = list(itertools.product(*(range(g.strategy_counts[j]) for j in others)))
    inside = [q for q in every if all(s in y.strategies[j] for j, s in zip(others, q))]
    inset = set(inside)
    outside = [q for q in every if q not in inset]
    return inside, outside


def _diff_max(g: Game, p: int, s: int, t: int, qbars) -> float:
    best = -math.inf
    for q in qbars:
        ps = q[:p] + (s,) + q[p:]
        pt = q[:p] + (t,) + q[p:]
        best = max(best, float(g.payoffs[ps][p] - g.payoffs[pt][p]))
    return best


def _player_bound(g: Game, p: int, y: SubgameSpec) -> Optional[PlayerBound]:
    inside_s = y.strategies[p]
    outside_s = tuple(s for s in range(g.strategy_counts[p]) if s not in inside_s)
    if not outside_s:
        return None
    y_bar, rest = _antiprofiles(g, p, y)
    every = y_bar + rest
    q = len(rest)
    l = len(outside_s)
    alpha, beta, gamma, alpha_s, radius = {}, {}, {}, {}, {}
    for s in outside_s:
        for t in inside_s:
            a = _diff_max(g, p, s, t, y_bar)
            if a >= 0:
                raise CertificateError(
                    f"contradiction with attracting hypothesis: alpha[{p}][{s},{t}] = {a} >= 0"
                )
            alpha[s, t] = a
            beta[s, t] = _diff_max(g, p, s, t, rest) if rest else 0.0
        gamma[s] = max(_diff_max(g, p, s, t, every) for t in outside_s)
        alpha_s[s] = max(alpha[s, t] for t in inside_s)
        d = (
            -l * alpha_s[s]
            - q * sum(alpha[s, t] for t in inside_s)
            + q * sum(max(beta[s, t], 0.0) for t in inside_s)
            + max(gamma[s], 0.0) * l
        )
        cap = 1.0 / (2 * q) if q > 0 else 0.5
        radius[s] = min(cap, -alpha_s[s] / d) if d > 0 else cap
    return PlayerBound(p, outside_s, inside_s, q, l, alpha, beta, gamma, alpha_s, radius)


def sample_neighbourhood(
    counts, y: SubgameSpec, m: float, n: int, rng: np.random.Generator
) -> np.ndarray:
    """``n`` random points with every outside coordinate in the open interval (0, m)."""
    parts = []
    for c, inside in zip(counts, y.strategies):
        outside = [s for s in range(c) if s not in inside]
        block = np.zeros((n, c))
        if outside:
            vals = rng.uniform(0.0, m, size=(n, len(outside)))
            vals = np.where(vals == 0.0, m / 2, vals)
            total = vals.sum(axis=1)
            over = total >= 1.0
            # only possible when |outside| * m >= 1; shrink keeping each below m
            vals[over] *= (0.999 / total[over])[:, None]
            block[:, outside] = vals
            rest = 1.0 - vals.sum(axis=1)
        else:
            rest = np.ones(n)
        block[:, list(inside)] = rng.dirichlet(np.ones(len(inside)), size=n) * rest[:, None]
        parts.append(block)
    return np.concatenate(parts, axis=1)


def outside_columns(counts, y: SubgameSpec) -> list[int]:
    off = player_offsets(counts)
    return [int(off[p] + s) for p, c in enumerate(counts) for s in range(c) if s not in y.strategies[p]]


def trapping_certificate(
    g: Game, y: SubgameSpec, n_audit: int = 1000, seed: int = 0
) -> TrappingCertificate:
    y.check(g.strategy_counts)
    if not is_strict(g):
        raise CertificateError("the certificate needs a strict game")
    if y.is_full(g.strategy_counts):
        raise CertificateError("subgame is the whole game; nothing to trap")
    rg = build_response_graph(g)
    nodes = [rg.index(q) for q in y.profiles()]
    if not is_attracting(rg, nodes):
        tail, head, player = escaping_arc(rg, nodes)
        raise CertificateError(
            f"subgame {y} is not attracting: arc {rg.profile(tail)} -> {rg.profile(head)} "
            f"(player {player}) leaves it"
        )
    bounds = tuple(b for p in range(g.num_players) if (b := _player_bound(g, p, y)) is not None)
    m = min(r for b in bounds for r in b.radius.values())
    if not m > 0:
        raise CertificateError(f"non-positive radius {m}")
    pts = sample_neighbourhood(g.strategy_counts, y, m, n_audit, np.random.default_rng(seed))
    vel = field_batch(g, pts)[:, outside_columns(g.strategy_counts, y)]
    worst = float(vel.max())
    if not worst < 0:
        raise CertificateError(
            f"bound bug: sampled outside velocity {worst} >= 0 inside the radius-{m} region"
        )
    return TrappingCertificate(y, bounds, m, n_audit, worst, seed)


@dataclass(frozen=True)
class ConvergeReport:
    subgame: SubgameSpec
    radius: float
    samples: int
    t_max: float
    max_final_mass: float
    monotone_failures: int
    passed: bool = field(default=False)

    def to_dict(self) -> dict:
        return {
            "subgame": str(self.subgame),
            "M": self.radius,
            "samples": self.samples,
            "t_max": self.t_max,
            "max_final_outside_mass": self.max_final_mass,
            "monotone_failures": self.monotone_failures,
            "passed": self.passed,
        }


def converge_check(
    g: Game,
    y: SubgameSpec,
    m: float,
    n_samples: int = 100,
    t_max: float = 200.0,
    dt: float = 0.01,
    seed: int = 0,
    tol: float = 1e-6,
) -> ConvergeReport:
    """Integrate random points of the radius-``m`` region and watch outside mass decay."""
    cols = outside_columns(g.strategy_counts, y)
    x = sample_neighbourhood(g.strategy_counts, y, m, n_samples, np.random.default_rng(seed))
    prev = x[:, cols]
    bad = np.zeros(prev.shape, dtype=bool)
    n_steps = int(round(t_max / dt))
    for _ in range(n_steps):
        x = _rk4_step(g, x, dt, 1.0)
        _renormalize(g, x, 1e-9)
        cur = x[:, cols]
        bad |= cur > prev
        prev = cur
    final = float(prev.max()) if prev.size else 0.0
    failures = int(bad.any(axis=1).sum())
    return ConvergeReport(y, m, n_samples, n_steps * dt, final, failures, failures == 0 and final <= tol)
