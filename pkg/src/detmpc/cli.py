"""Command line: ``detmpc matching|mis|coloring|gen|verify``.

Exit codes: 0 verified success, 1 verification failed, 2 usage error,
3 an algorithm or input error (its module-qualified code is printed).
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .bench import ALGORITHMS, KINDS, ExperimentConfig, generate_graph, parse_params, run_experiment
from .config import RunConfig
from .errors import DetMPCError
from .graph import format_edge_list, read_edge_list


def _field(text: str) -> int | None:
    return None if text == "auto" else int(text)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", help="edge list file ('p n m' header, then 'u v' lines)")
    p.add_argument("--gen", metavar="KIND", choices=KINDS, help="generate the graph instead of reading it")
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="generator parameter")
    p.add_argument("--gen-seed", type=int, default=0)
    p.add_argument("--delta", default="1/8", help="unit fraction 1/k")
    p.add_argument("--space", type=int, default=1 << 16, help="words per machine (S)")
    p.add_argument("--machines", type=int, default=None, help="machine count (M); default unbounded")
    p.add_argument("--field-p", default="auto", help="prime field size or 'auto'")
    p.add_argument("--k", type=int, default=2, help="independence of the selection hash family")
    p.add_argument("--k-conc", type=int, default=4, help="independence of the sampling hash family")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--palettes", help="palette file, lines 'v: c1,c2,...' (coloring only)")
    p.add_argument("--output", "-o", help="solution file (default: stdout)")
    p.add_argument("--metrics", help="per-iteration metrics CSV")
    p.add_argument("--certificates", help="certificates JSON")
    p.add_argument("--summary", help="summary JSON")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="detmpc", description="Deterministic MPC graph algorithms on a simulated cluster.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ALGORITHMS:
        _add_run_flags(sub.add_parser(name, help=f"compute a {name} and verify it"))
    g = sub.add_parser("gen", help="write a generated graph as an edge list")
    g.add_argument("kind", choices=KINDS)
    g.add_argument("params", nargs="*", metavar="KEY=VALUE")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--output", "-o")
    v = sub.add_parser("verify", help="check a solution file against a graph")
    v.add_argument("problem", choices=ALGORITHMS)
    v.add_argument("--input", required=True)
    v.add_argument("--solution", required=True)
    v.add_argument("--palettes")
    return ap


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _run(args) -> int:
    if (args.input is None) == (args.gen is None):
        print("error: give exactly one of --input or --gen", file=sys.stderr)
        return 2
    run = RunConfig(delta=args.delta, space=args.space, machines=args.machines, field_p=_field(args.field_p),
                    k_select=args.k, k_conc=args.k_conc, workers=args.workers)
    cfg = ExperimentConfig(args.command, input=args.input, kind=args.gen, params=parse_params(args.param),
                           gen_seed=args.gen_seed, palettes=args.palettes, run=run,
                           metrics_path=args.metrics, certificates_path=args.certificates, summary_path=args.summary)
    out = run_experiment(cfg)
    s = out.summary
    print(f"{args.command}: n={s['n']} m={s['m']} iterations={s['iterations']} rounds={s['rounds']} "
          f"max_load={s['max_load']} verifier={s['verifier']}", file=sys.stderr)
    if not out.ok:
        print(out.report.line(), file=sys.stderr)
        return 1
    _emit(out.solution, args.output)
    return 0


def _verify(args) -> int:
    from .coloring import default_palettes, read_palettes
    from .oracles import verify_coloring, verify_matching, verify_mis

    g = read_edge_list(args.input)
    rows = [ln.split() for ln in Path(args.solution).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    if args.problem == "mis":
        rep = verify_mis(g, [int(r[0]) for r in rows])
    elif args.problem == "matching":
        rep = verify_matching(g, np.asarray([[int(r[0]), int(r[1])] for r in rows], dtype=np.int64).reshape(-1, 2))
    else:
        pal = read_palettes(args.palettes, g.node_count) if args.palettes else default_palettes(g)
        col = np.full(g.node_count, -1, dtype=np.int64)
        for r in rows:
            col[int(r[0])] = int(r[1])
        rep = verify_coloring(g, pal, col)
    print(rep.line())
    return 0 if rep.ok else 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            g = generate_graph(args.kind, parse_params(args.params), args.seed)
            _emit(format_edge_list(g), args.output)
            return 0
        if args.command == "verify":
            return _verify(args)
        return _run(args)
    except DetMPCError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
