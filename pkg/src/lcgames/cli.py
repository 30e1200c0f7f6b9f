"""Command-line front end: ``lcgames {value,simulate,sweep,catalog,validate}``.

Results go to stdout (or ``--out``) as JSON or CSV.  Failures print one JSON
line on stderr and exit with 2 (usage or bad game) or 3 (budget or solver
refusal); ``validate`` exits 1 when the file is readable but invalid.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bounds, classical_engine, conic_solver, games, quantum_sim, seesaw
from .game_model import (GameError, MultiStepGame, game_from_dict, induced_simple_game, reported_value)

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_REFUSED = 0, 1, 2, 3
METHODS = ("classical", "seesaw", "npa", "xor-sdp", "forwarding-upper", "aggregated-upper")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="lcgames", description="Values and bounds for latency-constrained games.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, game=True):
        if game:
            p.add_argument("--game", required=True, help="catalog:NAME or a game JSON file")
        p.add_argument("--out", help="write the result here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), help="output format")

    def solver(p):
        p.add_argument("--level", type=int, default=2, help="NPA level")
        p.add_argument("--restarts", type=int, default=1)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol", type=float, default=seesaw.DEFAULT_TOL)
        p.add_argument("--dims", help="local dims, optionally ';' and channel dims: '1,2,2;0>1=2,1>0=2'")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--trace", help="JSON-lines file for see-saw progress")

    p = sub.add_parser("value", help="value or bound of a game")
    common(p)
    p.add_argument("--method", choices=METHODS, default="classical")
    solver(p)

    p = sub.add_parser("simulate", help="winning probability of a catalog strategy")
    common(p)

    p = sub.add_parser("sweep", help="values of a SISO game against the horizon")
    common(p)
    p.add_argument("--taus", help="comma-separated horizons (default 0..tau of the game)")
    solver(p)

    p = sub.add_parser("catalog", help="list catalog games")
    common(p, game=False)

    p = sub.add_parser("validate", help="check a game file")
    common(p)
    return parser


def parse_dims(text):
    if not text:
        return None, None
    local_part, _, channel_part = text.partition(";")
    try:
        local = tuple(int(v) for v in local_part.split(",")) if local_part.strip() else None
        channels = {}
        for item in filter(None, (s.strip() for s in channel_part.split(","))):
            edge, dim = item.split("=")
            src, dst = edge.split(">")
            channels[(int(src), int(dst))] = int(dim)
    except ValueError:
        raise UsageError(f"cannot parse --dims {text!r}") from None
    return local, channels or None


def load_game(source):
    if source.startswith("catalog:"):
        return games.get_game(source[len("catalog:"):])
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {source}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameError(f"<root>: invalid JSON ({exc.msg})") from None
    return game_from_dict(doc)


def _config(args):
    local, channels = parse_dims(args.dims)
    return seesaw.SeesawConfig(local_dims=local, channel_dims=channels, restarts=args.restarts, tol=args.tol,
                               seed=args.seed, jobs=args.jobs)


def _simple(game):
    return induced_simple_game(game) if isinstance(game, MultiStepGame) else game


def compute_value(game, args):
    method = args.method
    if method == "classical":
        return classical_engine.classical_value(game, jobs=args.jobs).value
    if method == "aggregated-upper":
        return bounds.aggregated_upper_bound(game, level=args.level)
    simple = _simple(game)
    if method == "npa":
        if simple.graph.edges:
            raise GameError("npa needs a game without communication; use forwarding-upper or aggregated-upper")
        return bounds.npa_upper_bound(simple, args.level)
    if method == "xor-sdp":
        if simple.graph.edges:
            return bounds.aggregated_upper_bound(game, level=args.level, method="xor")
        return bounds.xor_game_value(simple)
    if method == "forwarding-upper":
        return bounds.forwarding_upper_bound(simple, args.level)
    config = _config(args)
    if args.trace:
        with open(args.trace, "w") as stream:
            return seesaw.seesaw_optimize(simple, config, trace=stream).value
    return seesaw.seesaw_optimize(simple, config).value


def _dump(obj):
    return json.dumps(obj, sort_keys=True) + "\n"


def cmd_value(args):
    game = load_game(args.game)
    value = compute_value(game, args)
    return _dump({"method": args.method, "value": reported_value(game, value)})


def cmd_simulate(args):
    if not args.game.startswith("catalog:"):
        raise UsageError("simulate needs a catalog game with a built-in strategy")
    name = args.game[len("catalog:"):]
    try:
        entry = quantum_sim.catalog(name)
    except (KeyError, ValueError, GameError):
        raise UsageError(f"no catalog strategy for {name!r}") from None
    return _dump({"p_win": quantum_sim.simulate(entry)})


def cmd_sweep(args):
    game = load_game(args.game)
    if args.taus:
        try:
            taus = [int(t) for t in args.taus.split(",")]
        except ValueError:
            raise UsageError(f"cannot parse --taus {args.taus!r}") from None
    else:
        taus = list(range(0, game.tau + 1)) if isinstance(game, MultiStepGame) else [0]
    results = bounds.latency_sweep(game, taus, level=args.level, config=_config(args), jobs=args.jobs)
    if _format(args, "csv") == "json":
        return bounds.sweep_to_json(results)
    return bounds.sweep_to_csv(results)


def cmd_catalog(args):
    rows = games.catalog_list()
    if _format(args, "json") == "csv":
        lines = ["name,description"] + [f'{name},"{desc}"' for name, desc in rows]
        return "\n".join(lines) + "\n"
    return json.dumps([{"name": n, "description": d} for n, d in rows], indent=2) + "\n"


def validate_report(source):
    """Report dict for a game source; ``valid`` is False with per-field errors on failure."""
    try:
        game = load_game(source)
    except GameError as exc:
        return {"valid": False, "errors": [e.strip() for e in str(exc).split(";")]}
    kind = "multistep" if isinstance(game, MultiStepGame) else "simple"
    return {"valid": True, "name": game.name, "kind": kind, "parties": game.n}


def cmd_validate(args):
    report = validate_report(args.game)
    return _dump(report), (EXIT_OK if report["valid"] else EXIT_INVALID)


def _format(args, default):
    if args.format:
        return args.format
    if args.out and Path(args.out).suffix in (".json", ".csv"):
        return Path(args.out).suffix[1:]
    return default


COMMANDS = {"value": cmd_value, "simulate": cmd_simulate, "sweep": cmd_sweep, "catalog": cmd_catalog,
            "validate": cmd_validate}


def _fail(kind, message, code):
    sys.stderr.write(json.dumps({"error": kind, "message": " ".join(str(message).split())}) + "\n")
    return code


def run(argv=None):
    try:
        args = build_parser().parse_args(argv)
        result = COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail("usage", exc, EXIT_USAGE)
    except classical_engine.BudgetExceeded as exc:
        return _fail("budget", exc, EXIT_REFUSED)
    except conic_solver.SolverError as exc:
        return _fail("solver", exc, EXIT_REFUSED)
    except GameError as exc:
        return _fail("game", exc, EXIT_USAGE)
    text, code = result if isinstance(result, tuple) else (result, EXIT_OK)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if code != EXIT_OK:
        sys.stderr.write(json.dumps({"error": "invalid", "message": "game failed validation"}) + "\n")
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
