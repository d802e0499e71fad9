"""Command-line entry point: `ragraph <command> FILE ...`.

Exit codes: 0 success, 1 recipe errors, 2 usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import List, Optional

from . import compose, export, planner, provenance
from .diagnostics import (
    DiagnosticError, RecipeError, has_errors, render_all, sort_diagnostics,
)
from .formatter import format_graph
from .graph import GraphError
from .lexicon import default_lexicon, default_temperature_table, load_lexicon, load_temperature_table
from .parser import parse_file
from .validator import CHECKS, UnknownCheckError, explain, run_checks, validate

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser):
    p.add_argument("file", help=".rag recipe file")
    p.add_argument("--lexicon", metavar="PATH", help="technique lexicon JSON (default: bundled)")
    p.add_argument("--temperatures", metavar="PATH", help="temperature phrase table JSON (default: bundled)")
    p.add_argument("--include-dir", metavar="DIR", action="append", default=[],
                   help="extra directory searched for plugin recipes (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ragraph", description="Compile, check and plan recipe action graphs.")
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("check", help="parse and validate a recipe")
    _common(p)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--explain", metavar="CHECK", help="explain one check (V001..V009 or its name)")

    p = sub.add_parser("lint", help="report validator warnings")
    _common(p)
    p.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("plan", help="schedule a validated recipe")
    _common(p)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--limit", type=int, help="also list up to K linearizations")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.add_argument("--overlay-free", action="store_true", help="overlay interjections need no extra worker")
    p.add_argument("--fallback", type=int, default=300, metavar="SECONDS",
                   help="duration for outcome-only processes with no lexicon estimate")
    p.add_argument("--contention", action="store_true", help="append the environment contention report")

    p = sub.add_parser("trace", help="provenance queries")
    _common(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--from", dest="from_", metavar="INGREDIENT", help="where an ingredient ends up")
    g.add_argument("--back", metavar="NODE", help="what went into a node's output")
    p.add_argument("--history", action="store_true", help="with --back: environment history")
    p.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("export", help="write the JSON IR or DOT")
    _common(p)
    p.add_argument("--format", choices=("json", "dot"), default="json")
    p.add_argument("--no-params", action="store_true", help="DOT: omit parameter sub-labels")
    p.add_argument("-o", "--output", metavar="PATH")

    p = sub.add_parser("expand", help="splice plugins into the host recipe")
    _common(p)
    p.add_argument("--plugin", metavar="NODE", help="expand only this plugin (default: all)")
    p.add_argument("--format", choices=("rag", "json"), default="rag")

    p = sub.add_parser("fmt", help="print the canonical formatting")
    _common(p)
    p.add_argument("--check", action="store_true", help="exit 1 if the file is not canonical")
    p.add_argument("--write", action="store_true", help="rewrite the file in place")
    return ap


class _Session:
    def __init__(self, args):
        self.args = args
        for option in ("lexicon", "temperatures"):
            path = getattr(args, option)
            if path and not os.path.isfile(path):
                raise UsageError(f"--{option}: no such file {path}")
        try:
            self.lexicon = load_lexicon(args.lexicon) if args.lexicon else default_lexicon()
            self.temps = (load_temperature_table(args.temperatures) if args.temperatures
                          else default_temperature_table())
        except OSError as exc:
            raise UsageError(str(exc)) from exc

    def parse(self):
        try:
            return parse_file(self.args.file, self.temps)
        except OSError as exc:
            raise UsageError(f"cannot read {self.args.file}: {exc.strerror or exc}") from exc

    def validated(self):
        graph = self.parse()
        v = validate(graph, self.lexicon, include_dirs=self.args.include_dir)
        _print_diags(v.warnings, "text")
        return v


def _print_diags(diags, fmt="text"):
    diags = list(diags)
    if diags and fmt == "text":
        sys.stderr.write(render_all(diags, "text") + "\n")


def _emit(text: str):
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def cmd_check(s: _Session) -> int:
    args = s.args
    graph = s.parse()
    if args.explain:
        _emit(explain(args.explain, graph, s.lexicon, include_dirs=args.include_dir))
        diags = run_checks(graph, s.lexicon, include_dirs=args.include_dir)
        return EXIT_FAIL if has_errors(diags) else EXIT_OK
    diags = sort_diagnostics(list(graph.warnings) + run_checks(graph, s.lexicon, include_dirs=args.include_dir))
    ok = not has_errors(diags)
    if args.format == "json":
        _emit(json.dumps({
            "file": args.file, "ok": ok, "nodes": len(graph.nodes), "edges": len(graph.edges),
            "proof": sorted(c for c in CHECKS if not any(d.code == c and d.severity == "error" for d in diags)),
            "diagnostics": [d.to_dict() for d in diags],
        }, sort_keys=True, indent=2))
    else:
        _print_diags(diags)
        status = "ok" if ok else "FAILED"
        errors = sum(d.severity == "error" for d in diags)
        warnings = len(diags) - errors
        _emit(f"{status}: {args.file}: {len(graph.nodes)} nodes, {len(graph.edges)} edges, "
              f"{errors} error(s), {warnings} warning(s)")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_lint(s: _Session) -> int:
    graph = s.parse()
    diags = sort_diagnostics(list(graph.warnings) + run_checks(graph, s.lexicon, include_dirs=s.args.include_dir))
    warnings = [d for d in diags if d.severity == "warning"]
    if s.args.format == "json":
        _emit(json.dumps([d.to_dict() for d in warnings], sort_keys=True, indent=2))
    elif warnings:
        _emit(render_all(warnings, "text"))
    if has_errors(diags):
        sys.stderr.write(f"{s.args.file}: has errors; run `ragraph check` for details\n")
        return EXIT_FAIL
    return EXIT_OK


def cmd_plan(s: _Session) -> int:
    args = s.args
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    if args.limit is not None and args.limit < 1:
        raise UsageError("--limit must be at least 1")
    v = s.validated()
    policy = planner.DurationPolicy(s.lexicon, args.fallback)
    sched = planner.schedule(v, args.workers, policy, overlay_free=args.overlay_free)
    orders = planner.linearizations(v, args.limit) if args.limit else None
    report = planner.contention_report(v, policy, overlay_free=args.overlay_free) if args.contention else None
    if args.format == "json":
        doc = {"schedule": sched.to_dict()}
        if orders is not None:
            doc["linearizations"] = orders
        if report is not None:
            doc["contention"] = [c.to_dict() for c in report]
        _emit(json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False))
        return EXIT_OK
    out = [sched.table()]
    if orders is not None:
        out.append("")
        out.append(f"linearizations (first {len(orders)}):")
        out.extend(f"  {i + 1}. " + " ".join(o) for i, o in enumerate(orders))
    if report is not None:
        out.append("")
        out.append("contention:")
        for c in report:
            out.append(f"  {', '.join(c.names) or c.environment.label} ({c.environment.label})")
            out.append("    " + " -> ".join(f"{n}[{m}@{planner._num(t)}]" for n, m, t in c.sequence))
            for a, b in c.reuse:
                out.append(f"    reuse: {a} then {b}")
    _emit("\n".join(out))
    return EXIT_OK


def cmd_trace(s: _Session) -> int:
    args = s.args
    v = s.validated()
    if args.from_:
        reached = sorted(provenance.forward(v, args.from_))
        if args.format == "json":
            _emit(json.dumps({"from": args.from_, "reaches": reached}, indent=2))
        else:
            _emit(f"{args.from_} flows into:\n" + "\n".join(f"  {n} ({v.graph.kind_of(n)})" for n in reached))
        return EXIT_OK
    if args.history:
        hist = provenance.environment_history(v, args.back)
        if args.format == "json":
            _emit(json.dumps([{"node": n, "environment": e.label} for n, e in hist], indent=2, ensure_ascii=False))
        else:
            _emit("\n".join(f"{n}: {e.label}" for n, e in hist))
        return EXIT_OK
    tree = provenance.backward(v, args.back)
    if args.format == "json":
        _emit(json.dumps(tree.to_dict(), sort_keys=True, indent=2))
    else:
        _emit(tree.render())
    return EXIT_OK


def cmd_export(s: _Session) -> int:
    args = s.args
    v = s.validated()
    if args.format == "dot":
        text = export.export_dot(v, export.DotOptions(show_params=not args.no_params))
    else:
        text = export.export_json(v)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_expand(s: _Session) -> int:
    args = s.args
    v = s.validated()
    if args.plugin:
        graph = compose.expand(v, args.plugin, include_dirs=args.include_dir, lexicon=s.lexicon)
    else:
        graph = compose.expand_all(v, include_dirs=args.include_dir, lexicon=s.lexicon)
    expanded = validate(graph, s.lexicon, include_dirs=args.include_dir)
    if args.format == "json":
        sys.stdout.write(export.export_json(expanded))
    else:
        sys.stdout.write(format_graph(expanded.graph))
    return EXIT_OK


def cmd_fmt(s: _Session) -> int:
    args = s.args
    graph = s.parse()
    text = format_graph(graph)
    with open(args.file, encoding="utf-8") as fh:
        original = fh.read()
    if args.check:
        if original != text:
            sys.stderr.write(f"{args.file}: not canonically formatted\n")
            return EXIT_FAIL
        return EXIT_OK
    if args.write:
        if original != text:
            with open(args.file, "w", encoding="utf-8") as fh:
                fh.write(text)
        return EXIT_OK
    sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"check": cmd_check, "lint": cmd_lint, "plan": cmd_plan, "trace": cmd_trace,
            "export": cmd_export, "expand": cmd_expand, "fmt": cmd_fmt}


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](_Session(args))
    except UsageError as exc:
        sys.stderr.write(f"ragraph: {exc}\n")
        return EXIT_USAGE
    except UnknownCheckError as exc:
        sys.stderr.write(f"ragraph: {exc.args[0]}\n")
        return EXIT_USAGE
    except DiagnosticError as exc:
        sys.stderr.write(render_all(exc.diagnostics, "text") + "\n")
        return EXIT_FAIL
    except (GraphError, RecipeError) as exc:
        sys.stderr.write(f"ragraph: {exc}\n")
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
