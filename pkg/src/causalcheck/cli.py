"""Command line entry point: ``causalcheck check|oracle|prove-check|generate``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .benchmarks import write_atomic, write_corpus
from .dsl import ParseError, parse_formula, parse_model, parse_property, Vocabulary
from .model import ModelError
from .oracle import OracleError, check_reachability, check_termination, count_reachable
from .proofcheck import check_report_text
from .tableau import HEURISTICS, export_dot, report_json, run

EXIT_HOLDS = 0
EXIT_REJECTED = 1
EXIT_INPUT = 2
EXIT_VIOLATED = 10
EXIT_UNKNOWN = 20


class InputError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None


def _load_model(path: str):
    try:
        return parse_model(_read(path))
    except ParseError as exc:
        raise InputError(f"{path}:{exc.line}:{exc.column}: {exc.message}") from None
    except ModelError as exc:
        raise InputError(f"{path}: {exc}") from None


def _load_property(path: str, system):
    try:
        return parse_property(_read(path), system)
    except ParseError as exc:
        raise InputError(f"{path}:{exc.line}:{exc.column}: {exc.message}") from None


def _format_run(comp) -> str:
    lines = []
    for i, state in enumerate(comp.states):
        text = ", ".join(f"{k}={v}" for k, v in state.items())
        lines.append(f"  s{i}: {text}")
        if i < len(comp.transitions):
            lines.append(f"    --{comp.transitions[i]}-->")
    return "\n".join(lines)


def cmd_check(args) -> int:
    system = _load_model(args.model)
    prop = _load_property(args.property, system)
    verdict = run(system, prop, heuristic=args.heuristic, max_nodes=args.max_nodes, horizon=args.horizon)
    tab = verdict.tableau
    line = f"{verdict.kind}: {prop.name} on {system.name} ({len(tab.nodes)} nodes, {len(tab.coverings)} coverings)"
    if verdict.reason:
        line += f" [{verdict.reason}]"
    print(line)
    if verdict.witness is not None:
        print("counterexample:")
        print(_format_run(verdict.witness.computation))
    if args.json:
        write_atomic(args.json, report_json(verdict))
    if args.dot:
        write_atomic(args.dot, export_dot(tab))
    return verdict.exit_code


def cmd_oracle(args) -> int:
    system = _load_model(args.model)
    try:
        if args.query == "count":
            print(count_reachable(system, args.cap))
            return EXIT_HOLDS
        if args.query == "reach":
            if (args.trans is None) == (args.pred is None):
                raise InputError("oracle reach needs exactly one of --trans or --pred")
            if args.trans is not None:
                if args.trans not in system.transition_map:
                    raise InputError(f"unknown transition {args.trans}")
                target = args.trans
            else:
                try:
                    target = parse_formula(args.pred, Vocabulary.of(system), allow_primed=False)
                except ParseError as exc:
                    raise InputError(f"--pred:{exc.column}: {exc.message}") from None
            found = check_reachability(system, target, args.cap)
            if found is None:
                print("unreachable")
                return EXIT_HOLDS
            print("reachable:")
            print(_format_run(found))
            return EXIT_VIOLATED
        lasso = check_termination(system, args.cap)
        if lasso is None:
            print("terminates")
            return EXIT_HOLDS
        comp = lasso.computation()
        print(f"diverges: loop starts at s{comp.loop_start}")
        print(_format_run(comp))
        print(f"  back to s{comp.loop_start}")
        return EXIT_VIOLATED
    except OracleError as exc:
        raise InputError(str(exc)) from None


def cmd_prove_check(args) -> int:
    result = check_report_text(_read(args.report))
    if result.ok:
        print(f"accepted: {result.replayed} productions replayed")
        return EXIT_HOLDS
    for problem in result.problems:
        print(f"{args.report}: {problem}", file=sys.stderr)
    print("rejected")
    return EXIT_REJECTED


def cmd_generate(args) -> int:
    for name in write_corpus(args.directory):
        print(Path(args.directory) / name)
    return EXIT_HOLDS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="causalcheck", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="build a tableau proof or find a violation")
    p.add_argument("model")
    p.add_argument("property")
    p.add_argument("--heuristic", choices=HEURISTICS, default="smart")
    p.add_argument("--max-nodes", type=int, default=10000)
    p.add_argument("--horizon", type=int, default=None,
                   help="step bound when realizing a counterexample")
    p.add_argument("--dot", help="write the tableau as a DOT digraph")
    p.add_argument("--json", help="write the proof report as JSON")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("oracle", help="explicit-state ground truth")
    p.add_argument("query", choices=("reach", "term", "count"))
    p.add_argument("model")
    p.add_argument("--trans", help="transition whose firing is searched for (reach)")
    p.add_argument("--pred", help="state predicate searched for (reach)")
    p.add_argument("--cap", type=int, default=10**6, help="maximum number of states")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("prove-check", help="replay a JSON proof report")
    p.add_argument("report")
    p.set_defaults(func=cmd_prove_check)

    p = sub.add_parser("generate", help="write the benchmark corpus")
    p.add_argument("directory")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_HOLDS
    if getattr(args, "max_nodes", 1) <= 0:
        print("causalcheck: --max-nodes must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InputError as exc:
        print(f"causalcheck: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
