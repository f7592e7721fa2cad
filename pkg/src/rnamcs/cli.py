"""Command line: ``solve``, ``suite``, ``fold`` and ``contexts``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import RunSpec, load_grid, render_csv, render_table, run_puzzle, run_suite
from .bias import DEFAULT_TABLES, BiasTables, row_name
from .fold import EnergyModel, NussinovOracle
from .parallel import ALGOS
from .scoring import score
from .search import SearchConfig
from .structure import Puzzle, StructureError, parse_dot_bracket, read_puzzles

EXIT_USAGE = 2


def _per_level(text: str):
    """'100' -> 100, '100.100' -> (100, 100) with level 1 first."""
    parts = [int(p) for p in text.split(".")]
    return parts[0] if len(parts) == 1 else tuple(parts)


def _level1_only(text: str) -> int:
    parts = [int(p) for p in text.split(".")]
    if any(p != 1 for p in parts[1:]):
        raise argparse.ArgumentTypeError("beam and P above 1 are only supported at level 1")
    return parts[0]


def _add_search_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("search")
    g.add_argument("--algo", choices=ALGOS, default="gnrpa")
    g.add_argument("--level", type=int, default=1)
    g.add_argument("--n", type=_per_level, default=100, help="iterations per level, e.g. 100 or 100.100")
    g.add_argument("--alpha", type=float, default=1.0)
    g.add_argument("--beta", choices=("on", "off"), default="on")
    g.add_argument("--p", type=_level1_only, default=1, help="stabilized playouts at level 1")
    g.add_argument("--beam", type=_level1_only, default=None, help="beam width at level 1")
    g.add_argument("--diversity", action="store_true", help="keep only distinct scores in the beam")
    g.add_argument("-H", "--history", type=int, choices=(0, 1, 2), default=0)
    g.add_argument("--start-learning", type=_per_level, default=0)
    g.add_argument("--restart-divisor", type=float, nargs="?", const=5.0, default=None,
                   help="restart after slot-count/D stagnant iterations (bare flag: D=5)")
    g.add_argument("--max-restarts", type=int, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--uct-c", type=float, default=0.4)
    g.add_argument("--budget", type=int, default=None, help="UCT rollout budget")
    g = p.add_argument_group("execution")
    g.add_argument("--workers", type=int, default=1, help="leaf-parallel worker processes")
    g.add_argument("--instances", type=int, default=1, help="root-parallel independent searches")
    g.add_argument("--time-limit", type=float, default=None, help="seconds per puzzle")
    g.add_argument("--order", choices=("string", "nemo"), default="string")
    g.add_argument("--bias-file", type=Path, default=None)
    g.add_argument("--min-hairpin", type=int, default=3)
    g.add_argument("--json", type=Path, default=None, help="append JSONL records here")
    g.add_argument("-v", "--verbose", action="store_true")


def _spec(args) -> RunSpec:
    beam = args.beam if args.beam is not None else (5 if args.algo == "diversity" else 1)
    config = SearchConfig(
        level=args.level, n=args.n, alpha=args.alpha, use_beta=args.beta == "on" and args.algo != "nrpa",
        p=args.p, beam=beam, diversity=args.diversity or args.algo == "diversity", history=args.history,
        start_learning=args.start_learning, restart_divisor=args.restart_divisor, seed=args.seed)
    return RunSpec(algo=args.algo, config=config, time_limit=args.time_limit, workers=args.workers,
                   instances=args.instances, order=args.order, uct_c=args.uct_c, budget=args.budget,
                   max_restarts=args.max_restarts)


def _tables(args) -> BiasTables:
    return BiasTables.from_file(args.bias_file) if args.bias_file else DEFAULT_TABLES


def _model(args) -> EnergyModel:
    return EnergyModel(min_hairpin=args.min_hairpin)


def cmd_solve(args) -> int:
    if args.file is not None:
        puzzles = read_puzzles(args.file)
        if args.id:
            puzzles = [p for p in puzzles if p.id in set(args.id)]
            if not puzzles:
                raise StructureError(f"no puzzle with id {', '.join(args.id)} in {args.file}")
    elif args.target:
        puzzle = Puzzle("cli", args.target, args.constraint)
        puzzle.target()
        puzzles = [puzzle]
    else:
        raise StructureError("give a dot-bracket target or --file")
    spec = _spec(args)
    tables, model = _tables(args), _model(args)
    sink = open(args.json, "a", encoding="utf-8") if args.json else None
    try:
        for puzzle in puzzles:
            _, record = run_puzzle(puzzle, spec, tables, model)
            line = json.dumps(record, ensure_ascii=False)
            print(line)
            if sink is not None:
                sink.write(line + "\n")
    finally:
        if sink is not None:
            sink.close()
    return 0


def cmd_suite(args) -> int:
    puzzles = read_puzzles(args.file)
    grid = load_grid(args.grid) if args.grid else [_spec(args)]
    edges = [float(e) for e in args.buckets.split(",")] if args.buckets else []

    def progress(record):
        if args.verbose:
            print(f"cell {record['cell']} {record['id']} solved={record['solved']} "
                  f"score={record['score']:.4f}", file=sys.stderr)

    rows = run_suite(puzzles, grid, args.out, edges, args.bucket_unit, _tables(args), _model(args),
                     progress=progress)
    sys.stdout.write(render_csv(rows) if args.csv else render_table(rows))
    return 0


def cmd_fold(args) -> int:
    oracle = NussinovOracle(_model(args))
    sequence = args.sequence.upper().replace("T", "U")
    out = oracle.fold(sequence)
    result = {"sequence": sequence, "mfe_structure": out.mfe_structure, "mfe_energy": out.mfe_energy}
    if args.target:
        target = parse_dot_bracket(args.target)
        if target.length != len(sequence):
            raise StructureError("target and sequence lengths differ")
        rec = score(sequence, target, oracle)
        result.update(target=args.target, target_energy=oracle.energy_of_structure(sequence, args.target),
                      delta_g=rec.delta_g, bpd=rec.bpd, score=rec.score, solved=rec.solved)
    print(json.dumps(result))
    return 0


def cmd_contexts(args) -> int:
    target = parse_dot_bracket(args.structure, args.constraint, args.order)
    partial = "N" * target.length
    print("slot\tkind\tpositions\tloop\trole\tpartner\tadjacent\tallowed\trow")
    for t, slot in enumerate(target.slots):
        ctx = slot.context
        print("\t".join(str(x) for x in (
            t, slot.kind.value, ",".join(map(str, slot.positions)), ctx.loop_kind.value,
            ctx.junction_role.value if ctx.junction_role else "-",
            "-" if ctx.mismatch_partner is None else ctx.mismatch_partner,
            "-" if ctx.adjacent_pair_position is None else ctx.adjacent_pair_position,
            ",".join(slot.candidates[n] for n in slot.allowed), row_name(slot, partial))))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rnamcs", description="Monte Carlo search for RNA inverse folding")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="design a sequence for one target or a puzzle file")
    p.add_argument("target", nargs="?", help="dot-bracket target")
    p.add_argument("--constraint", default=None, help="bases imposed per position (N = free)")
    p.add_argument("--file", type=Path, default=None, help="puzzle file (id<TAB>structure[<TAB>constraint])")
    p.add_argument("--id", action="append", default=None, help="only these puzzle ids")
    _add_search_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("suite", help="run a config grid over a puzzle file")
    p.add_argument("file", type=Path)
    p.add_argument("--grid", type=Path, default=None, help="JSON list of run specs")
    p.add_argument("--out", type=Path, default=None, help="directory for results.jsonl and summaries")
    p.add_argument("--buckets", default=None, help="comma-separated bucket edges, e.g. 1,2,4,8")
    p.add_argument("--bucket-unit", choices=("seconds", "playouts"), default="seconds")
    p.add_argument("--csv", action="store_true", help="print the summary as CSV")
    _add_search_flags(p)
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("fold", help="fold a sequence with the built-in oracle")
    p.add_argument("sequence")
    p.add_argument("--target", default=None)
    p.add_argument("--min-hairpin", type=int, default=3)
    p.set_defaults(func=cmd_fold)

    p = sub.add_parser("contexts", help="dump slots and structural contexts")
    p.add_argument("structure")
    p.add_argument("--constraint", default=None)
    p.add_argument("--order", choices=("string", "nemo"), default="string")
    p.set_defaults(func=cmd_contexts)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (StructureError, ValueError, OSError) as exc:
        print(f"rnamcs {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
