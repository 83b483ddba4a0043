"""Command-line entry point: ``amsdec {decompose,verify,entropy,trace,sample,recheck}``.

Exit codes: 0 all checks pass, 1 a mathematical check failed, 2 invalid
input, 3 cylinder budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import report as rp
from . import sources as srcmod
from .documents import DocumentError, FiniteSystem, SourceSystem, load_document, parse_schedule, resolve_budget
from .numeric import MODES

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3


def _common(p: argparse.ArgumentParser, fmt_default: str = "table"):
    p.add_argument("input", help="system or source document (JSON)")
    p.add_argument("--format", choices=("table", "json", "csv"), default=fmt_default)
    p.add_argument("--numeric", choices=MODES, default=None, help="override the document's numeric mode")
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--n-schedule", "--schedule", dest="schedule", default=None,
                   help="'1..8', '1,2,4' or 'pow2:10'")
    p.add_argument("--max-depth", type=int, default=None, help="cylinder depth for source documents")
    p.add_argument("--budget", type=int, default=None, help="cylinder budget (|A|^L limit)")
    p.add_argument("-o", "--output", default=None, help="write to a file instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amsdec",
        description="Ergodic decomposition of asymptotically mean stationary sources on finite spaces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("decompose", help="ergodic components and identity checks"))
    _common(sub.add_parser("verify", help="uniform convergence profile and equivalence witnesses"))
    _common(sub.add_parser("entropy", help="per-class entropy rates and block entropies (sources)"))
    _common(sub.add_parser("trace", help="Cesaro averages of the transfer operator as CSV"), "csv")
    s = sub.add_parser("sample", help="sample output paths of a source, one per line")
    s.add_argument("input")
    s.add_argument("--length", type=int, default=1000)
    s.add_argument("--trials", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--pattern", default=None, help="also print the pooled frequency of this pattern to stderr")
    s.add_argument("-o", "--output", default=None)
    r = sub.add_parser("recheck", help="re-run a JSON report and compare check outcomes")
    r.add_argument("report")
    return parser


def _emit(text: str, output: str | None):
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _options(args, system) -> dict:
    opts = dict(system.options)
    if args.schedule:
        opts["schedule"] = parse_schedule(args.schedule)
    if args.epsilon is not None:
        if args.epsilon <= 0:
            raise DocumentError(["--epsilon must be positive"])
        opts["epsilon"] = args.epsilon
    if args.max_depth is not None:
        opts["max_depth"] = args.max_depth
    if isinstance(system, SourceSystem):
        opts["budget"] = resolve_budget(args.budget, system.options)
    return opts


def _render(rep: rp.ReportDocument, fmt: str) -> str:
    if fmt == "json":
        return rep.to_json() + "\n"
    if fmt == "csv":
        return rp.render_csv(rp.primary_rows(rep))
    return rp.render_table(rep)


def _parse_pattern(text: str, src: srcmod.MarkovSource) -> tuple:
    alphabet = [str(a) for a in src.alphabet]
    if " " in text or "," in text:
        parts = text.replace(",", " ").split()
    else:
        parts = list(text)
    lookup = {str(a): a for a in src.alphabet}
    bad = [p for p in parts if p not in lookup]
    if bad:
        raise DocumentError([f"pattern symbol {bad[0]!r} is not in the alphabet {alphabet}"])
    return tuple(lookup[p] for p in parts)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "recheck":
            return _recheck(args.report)
        system = load_document(args.input, getattr(args, "numeric", None))
        if args.command == "sample":
            return _sample(args, system)
        opts = _options(args, system)
        if args.command == "entropy" and not isinstance(system, SourceSystem):
            raise DocumentError(["entropy needs a source document (type 'markov' or 'hmm')"])
        if args.command == "trace" and not isinstance(system, FiniteSystem):
            raise DocumentError(["trace needs a finite-system document (points/map/measure)"])
        rep = rp.run(args.command, system, opts)
    except DocumentError as exc:
        for d in exc.diagnostics:
            print(f"amsdec: invalid input: {d}", file=sys.stderr)
        return EXIT_INPUT
    except srcmod.BudgetError as exc:
        print(f"amsdec: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (OSError, ValueError) as exc:
        print(f"amsdec: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _emit(_render(rep, args.format), args.output)
    for c in rep.checks:
        if not c["pass"]:
            print(f"amsdec: check failed: {c['name']} (max deviation {c['max_deviation']})", file=sys.stderr)
    return EXIT_OK if rep.passed else EXIT_CHECK


def _sample(args, system) -> int:
    if not isinstance(system, SourceSystem):
        raise DocumentError(["sample needs a source document"])
    paths = srcmod.sample_paths(system.source, args.length, args.seed, args.trials)
    _emit("".join(srcmod.format_path(p) + "\n" for p in paths), args.output)
    if args.pattern:
        pat = _parse_pattern(args.pattern, system.source)
        print(f"frequency {args.pattern}: {srcmod.empirical_frequency(paths, pat):.12g}", file=sys.stderr)
    return EXIT_OK


def _recheck(path: str) -> int:
    try:
        old = rp.ReportDocument.from_json(Path(path).read_text())
    except (json.JSONDecodeError, KeyError) as exc:
        raise DocumentError([f"not a report document: {exc}"]) from None
    new = rp.rerun(old)
    before, after = old.check_outcomes(), new.check_outcomes()
    if before != after:
        for name in sorted(set(before) | set(after)):
            if before.get(name) != after.get(name):
                print(f"amsdec: {name}: recorded {before.get(name)}, recomputed {after.get(name)}", file=sys.stderr)
        return EXIT_CHECK
    print(f"{len(after)} checks reproduced; status {'pass' if new.passed else 'fail'}")
    return EXIT_OK if new.passed else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
