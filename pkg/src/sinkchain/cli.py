"""Command-line front end.

Every command writes ``<command>-manifest.json`` into ``--out`` listing its
parameters, argv and output files.  Exit codes: 0 success, 1 bad input or a
violated verdict, 2 resource budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .catalog import CATALOG_NAMES, catalog
from .chain import (
    VIOLATED,
    BudgetError,
    analyze_chain,
    analyze_chain_refined,
    conjecture_scan,
    default_kappa,
    morse_dot,
    refinement_ladder,
)
from .game import (
    Game,
    GameFormatError,
    MixedProfile,
    SubgameSpec,
    is_strict,
    iterated_strict_dominance,
    load_game,
    zero_sum_interior_equilibrium,
)
from .plot import phase_portrait_svg
from .replicator import IntegrationError, IntegratorConfig, integrate, kl_drift, parse_mixed
from .response import (
    build_response_graph,
    component_is_subgame,
    content,
    is_dag,
    pure_nash,
    scc_decomposition,
    to_dot,
)
from .trapping import CertificateError, trapping_certificate

EXIT_OK, EXIT_FAIL, EXIT_BUDGET = 0, 1, 2


class UsageError(Exception):
    pass


def _load(args) -> Game:
    if args.catalog and args.game:
        raise UsageError("give either --catalog or a game path, not both")
    if args.catalog:
        try:
            return catalog(args.catalog)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
    if not args.game:
        raise UsageError("no game given; use --catalog NAME or a path to a game file")
    path = Path(args.game)
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        g = load_game(text)
    except GameFormatError as exc:
        raise UsageError(f"{path}: {exc}") from None
    return g if g.name else Game(g.strategy_counts, g.payoffs, g.labels, path.stem)


class Run:
    """Collects outputs and writes the manifest."""

    def __init__(self, args, command: str):
        self.args = args
        self.command = command
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs: list[str] = []
        self.start = time.perf_counter()

    def path(self, name: str) -> Path:
        p = Path(name)
        return p if p.is_absolute() else self.out / p

    def write(self, name: str, text: str) -> Path:
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
        self.outputs.append(str(p))
        return p

    def finish(self, code: int) -> int:
        params = {k: v for k, v in sorted(vars(self.args).items()) if k not in ("func", "argv")}
        manifest = {
            "command": self.command,
            "argv": self.args.argv,
            "parameters": params,
            "outputs": self.outputs,
            "duration_s": round(time.perf_counter() - self.start, 3),
            "version": __version__,
            "exit_code": code,
        }
        p = self.out / f"{self.command}-manifest.json"
        p.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
        return code


def _profiles(rg, nodes) -> str:
    return " ".join("(" + ",".join(str(s) for s in rg.profile(v)) + ")" for v in sorted(nodes))


def cmd_analyze(args) -> int:
    g = _load(args)
    run = Run(args, "analyze")
    rg = build_response_graph(g)
    scc = scc_decomposition(rg)
    strict = is_strict(g)
    print(f"game: {g.name or '(unnamed)'}  shape: {g.shape_str}")
    print(f"strict: {str(strict).lower()}")
    print(f"dominance survivors: {iterated_strict_dominance(g)}")
    print(f"arcs: {len(rg.arcs)}  components: {len(scc.components)}  sinks: {len(scc.sink_ids)}")
    for k, comp in enumerate(scc.components):
        tag = "sink" if scc.is_sink[k] else "    "
        print(f"  [{k}] {tag} size {len(comp)}: {_profiles(rg, comp)}")
    for k in scc.sink_ids:
        comp = scc.components[k]
        sub = component_is_subgame(rg, comp)
        c = content(rg, comp)
        print(f"  sink [{k}] subgame: {sub if sub is not None else 'no'}  content: "
              + " | ".join(str(b) for b in c.boxes))
    print(f"DAG (preference potential): {str(is_dag(rg)).lower()}")
    if strict:
        print(f"pure Nash equilibria: {_profiles(rg, pure_nash(rg, g)) or 'none'}")
    else:
        print("pure Nash equilibria: (game is not strict; graph sinks do not characterise them)")
    if args.dot:
        run.write(args.dot, to_dot(rg, scc, name=(g.name or "response").replace("-", "_")))
    return run.finish(EXIT_OK)


def cmd_simulate(args) -> int:
    g = _load(args)
    try:
        x0 = parse_mixed(g, args.start)
    except ValueError as exc:
        raise UsageError(f"invalid start: {exc}") from None
    run = Run(args, "simulate")
    cfg = IntegratorConfig(dt=args.dt, t_max=args.time)
    try:
        traj = integrate(g, x0, cfg, reverse=args.reverse)
    except IntegrationError as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return run.finish(EXIT_FAIL)
    end = traj.end
    print(f"t = {traj.times[-1]:.6g}, steps = {len(traj) - 1}")
    for p, xp in enumerate(end.parts):
        print(f"  player {p}: " + ", ".join(f"{v:.9g}" for v in xp))
    sums = [abs(float(np.sum(part)) - 1.0) for part in np.split(traj.states, np.cumsum(g.strategy_counts)[:-1], axis=1)]
    print(f"max simplex drift: {max(float(np.max(s)) for s in sums):.3g}")
    star = _interior_equilibrium(g)
    if star is not None:
        print(f"KL drift from interior equilibrium: {kl_drift(traj, star):.3g}")
    if args.csv:
        run.write(args.csv, traj.to_csv())
    return run.finish(EXIT_OK)


def _interior_equilibrium(g: Game) -> Optional[MixedProfile]:
    if g.num_players != 2 or g.strategy_counts[0] != g.strategy_counts[1]:
        return None
    if not np.allclose(g.payoffs[..., 0], -g.payoffs[..., 1], rtol=0.0, atol=1e-12):
        return None
    return zero_sum_interior_equilibrium(g)


def cmd_chain(args) -> int:
    g = _load(args)
    run = Run(args, "chain")
    kappa = args.kappa or default_kappa(g.strategy_counts)
    if args.refine:
        ladder = refinement_ladder(kappa, sorted({args.T, 4.0, 10.0}))
        report, md = analyze_chain_refined(g, ladder, n_random=args.samples, rho=args.rho, seed=args.seed)
        kappa = report.resolution["kappa"]
    else:
        report, md = analyze_chain(g, kappa, args.T, n_random=args.samples, rho=args.rho, seed=args.seed)
    res = report.resolution
    print(f"kappa {kappa}, T {res['T']}, delta {res['delta']:.4g}, rho {res['rho']:.4g}, "
          f"boxes {res['boxes']}, arcs {res['arcs']}")
    print(f"Morse sets: {len(report.morse_sets)}  sink Morse sets: {len(report.sink_morse_sets)}  "
          f"transient boxes: {md.transient.size}")
    for k in report.sink_morse_sets:
        print(f"  sink M{k}: {len(report.morse_sets[k])} boxes")
    print(f"sink components: {report.sink_sccs}")
    for c, cov in zip(report.correspondence, report.content_coverage):
        print(f"  component {c['sink_scc']} -> Morse set {c['morse_set']}: {c['verdict']}; "
              f"content {cov['covered']}/{cov['content_boxes']} boxes: {cov['verdict']}")
    print(f"one-to-one correspondence: {report.conjecture1}")
    print(f"sink Morse sets within one box layer of content: {report.conjecture2}")
    if args.json:
        run.write(args.json, report.to_json() + "\n")
    if args.dot:
        run.write(args.dot, morse_dot(md))
    return run.finish(EXIT_FAIL if report.any_violated else EXIT_OK)


def _parse_subgame(g: Game, text: str) -> SubgameSpec:
    chunks = text.split(";")
    if len(chunks) != g.num_players:
        raise UsageError(f"subgame needs {g.num_players} ';'-separated strategy lists")
    try:
        y = SubgameSpec(tuple(tuple(int(s) for s in c.split(",")) for c in chunks))
        y.check(g.strategy_counts)
    except ValueError as exc:
        raise UsageError(f"invalid subgame {text!r}: {exc}") from None
    return y


def cmd_certify(args) -> int:
    g = _load(args)
    y = _parse_subgame(g, args.subgame)
    run = Run(args, "certify")
    try:
        cert = trapping_certificate(g, y, seed=args.seed)
    except CertificateError as exc:
        print(f"refused: {exc}")
        return run.finish(EXIT_FAIL)
    print(f"subgame {y}: M = {cert.radius:.6g}")
    print(f"audit: {cert.audit_samples} samples, max outside velocity {cert.audit_max_velocity:.3g}")
    if args.json:
        run.write(args.json, cert.to_json() + "\n")
    return run.finish(EXIT_OK)


def cmd_scan(args) -> int:
    try:
        shape = tuple(int(s) for s in args.shape.lower().split("x"))
    except ValueError:
        raise UsageError(f"bad shape {args.shape!r}; expected e.g. 2x3") from None
    if len(shape) < 2 or any(s < 1 for s in shape):
        raise UsageError(f"bad shape {args.shape!r}")
    run = Run(args, "scan")
    rep = conjecture_scan(shape, args.count, args.seed, args.kappa, args.T, kind=args.kind)
    print(f"shape {args.shape}, {args.count} games, seed {args.seed}, kappa {rep.kappa}")
    print(f"one-to-one correspondence: {rep.conjecture1}")
    print(f"within one box layer of content: {rep.conjecture2}")
    for v in rep.violated:
        run.write(f"violated-{args.shape}-{v['index']}.json", v["game"] + "\n")
    run.write(args.json or f"scan-{args.shape}.json", json.dumps(rep.to_dict(), indent=1, sort_keys=True) + "\n")
    return run.finish(EXIT_OK)


def cmd_plot(args) -> int:
    g = _load(args)
    if g.strategy_counts != (2, 2):
        raise UsageError(f"plot needs a 2x2 game, got {g.shape_str}")
    run = Run(args, "plot")
    _, md = analyze_chain(g, args.kappa, args.T, seed=args.seed)
    svg = phase_portrait_svg(g, md, title=g.name)
    p = run.write(args.svg or f"{g.name or 'game'}.svg", svg)
    print(f"wrote {p} ({sum(len(md.morse_sets[k]) for k in md.sinks)} shaded boxes)")
    return run.finish(EXIT_OK)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("game", nargs="?", help="path to a game JSON file")
    common.add_argument("--catalog", choices=CATALOG_NAMES, help="use a built-in game")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=".", help="directory for outputs and the manifest")

    parser = argparse.ArgumentParser(prog="sinkchain", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="response graph summary")
    p.add_argument("--dot")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", parents=[common], help="integrate the replicator dynamic")
    p.add_argument("--start", default="uniform", help="e.g. '0.9,0.1;0.5,0.5' or 'uniform'")
    p.add_argument("--time", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--reverse", action="store_true")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("chain", parents=[common], help="Morse sets of the box map")
    p.add_argument("--kappa", type=int)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--rho", type=float)
    p.add_argument("--samples", type=int, default=8, help="random samples per box")
    p.add_argument("--refine", action="store_true",
                   help="raise T, then kappa, while the correspondence is unresolved")
    p.add_argument("--json")
    p.add_argument("--dot")
    p.set_defaults(func=cmd_chain)

    p = sub.add_parser("certify", parents=[common], help="trapping radius of an attracting subgame")
    p.add_argument("--subgame", required=True, help="e.g. '0;0' or '0,1;2'")
    p.add_argument("--json")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("scan", parents=[common], help="correspondence scan over random games")
    p.add_argument("--shape", required=True)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--kappa", type=int)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--kind", default="uniform", choices=("uniform", "zero_sum", "identical_interest"))
    p.add_argument("--json")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("plot", parents=[common], help="SVG phase portrait of a 2x2 game")
    p.add_argument("--svg")
    p.add_argument("--kappa", type=int, default=16)
    p.add_argument("--T", type=float, default=1.0)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except BudgetError as exc:
        print(f"budget: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
