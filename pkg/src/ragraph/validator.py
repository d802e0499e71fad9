"""Global and cross-node checks that turn a RecipeGraph into a ValidatedGraph.

Every check runs on every call and all findings are reported together,
sorted by code then source position.
"""

from __future__ import annotations

import os
from collections import defaultdict
from typing import Dict, Iterable, List, Optional, Sequence

import networkx as nx

from .diagnostics import (
    Diagnostic, RecipeSyntaxError, ValidationError, error, has_errors, sort_diagnostics, warning,
)
from .graph import (
    ActionNode, EnvironmentResolver, GraphError, IngredientRoot, MergeAmbiguityError,
    OUTCOME_CATEGORIES, PPCRef, PlatePayload, PluginPayload, ProcessPayload, RecipeGraph,
    TEMPERATURE_KINDS, TRANSFER_MODES, TRANSFER_SCOPES, INTERJECTION_BEHAVIORS, TransferPayload,
    ValidatedGraph,
)
from .lexicon import TechniqueError, TechniqueLexicon, check_requirement, default_lexicon, resolve

CHECKS = {
    "V001": ("acyclicity", "The action graph has no cycle over material and precedence edges."),
    "V002": ("type_safety", "Every node payload satisfies its type rules and every technique "
                            "reference resolves in the lexicon."),
    "V003": ("single_output", "The recipe has exactly one final output (one sink)."),
    "V004": ("root_rule", "Only named ingredients (and opaque plugins) have no material input."),
    "V005": ("transfer_shape", "Each transfer moves exactly one item (one 'from') to exactly one "
                               "destination (one 'to')."),
    "V006": ("environment", "The environment of every PPC consumed by a process can be computed."),
    "V007": ("from_before_to", "When one transfer empties an environment and another fills it, "
                               "a path in the graph orders the two."),
    "V008": ("interjection", "Interjections target processes, have in-range offsets, and do not "
                             "depend on their parent."),
    "V009": ("plugin_closure", "Every plugin names a recipe that parses and validates on its own."),
}
CHECK_IDS = {name: code for code, (name, _) in CHECKS.items()}


class UnknownCheckError(KeyError):
    pass


def _span(graph, node_id):
    node = graph.nodes.get(node_id)
    return node.span if node is not None else None


class _Context:
    def __init__(self, graph: RecipeGraph, lexicon: TechniqueLexicon, include_dirs, stack, cache):
        self.g = graph
        self.lexicon = lexicon
        self.include_dirs = list(include_dirs)
        self.stack = list(stack)
        self.cache = cache
        self.envs = EnvironmentResolver(graph)
        self.diags: List[Diagnostic] = []

    def err(self, code, message, node=None, nodes=(), span=None, hint=None):
        nodes = tuple(nodes) or ((node,) if node else ())
        self.diags.append(error(code, message, span or (_span(self.g, node) if node else None), hint, nodes))

    def warn(self, code, message, node=None, nodes=(), span=None, hint=None):
        nodes = tuple(nodes) or ((node,) if node else ())
        self.diags.append(warning(code, message, span or (_span(self.g, node) if node else None), hint, nodes))

    def env_of(self, node_id):
        try:
            return self.envs.of_node(node_id)
        except (GraphError, KeyError):
            return None


# V001

def check_acyclicity(ctx: _Context):
    dg = nx.DiGraph()
    dg.add_nodes_from(ctx.g.nodes)
    dg.add_edges_from((e.src, e.dst) for e in ctx.g.node_edges())
    for scc in sorted((sorted(c) for c in nx.strongly_connected_components(dg)), key=lambda c: c[0]):
        start = scc[0]
        if len(scc) == 1 and not dg.has_edge(start, start):
            continue
        cycle_edges = nx.find_cycle(dg.subgraph(scc), source=start)
        path = [u for u, _ in cycle_edges]
        pivot = path.index(min(path))
        path = path[pivot:] + path[:pivot]
        ctx.err("V001", f"cycle: {' -> '.join(path + [path[0]])}", node=path[0], nodes=path)


# V002

def _check_termination(ctx, node_id, cond, top=True):
    if cond.kind == "duration":
        if not isinstance(cond.duration_seconds, int) or cond.duration_seconds <= 0:
            ctx.err("V002", f"{node_id}: duration termination needs a positive whole number of seconds", node_id)
    elif cond.kind == "outcome":
        if not cond.outcome_predicate:
            ctx.err("V002", f"{node_id}: outcome termination needs a predicate", node_id)
        category = cond.outcome_category or "custom"
        if category not in OUTCOME_CATEGORIES:
            ctx.err("V002", f"{node_id}: unknown outcome category {category!r}", node_id)
        elif category != "custom" and ctx.lexicon.outcomes.get(cond.outcome_predicate) != category:
            ctx.err("V002", f"{node_id}: {cond.outcome_predicate!r} is not a {category} outcome in the lexicon",
                    node_id, hint="use a vocabulary term or the custom category")
    elif cond.kind == "compound":
        if cond.combine not in ("all_of", "any_of"):
            ctx.err("V002", f"{node_id}: compound termination needs all_of or any_of", node_id)
        if len(cond.conditions) < 2:
            ctx.err("V002", f"{node_id}: compound termination needs at least two conditions", node_id)
        for sub in cond.conditions:
            _check_termination(ctx, node_id, sub, top=False)
    else:
        ctx.err("V002", f"{node_id}: unknown termination kind {cond.kind!r}", node_id)


def _check_process(ctx, node_id, p: ProcessPayload):
    try:
        resolve(p.technique, ctx.lexicon)
    except TechniqueError as exc:
        ctx.err("V002", f"{node_id}: [{exc.code}] {exc}", node_id)
    t = p.temperature
    if t is not None:
        if t.kind not in TEMPERATURE_KINDS:
            ctx.err("V002", f"{node_id}: unknown temperature kind {t.kind!r}", node_id)
        if t.low_c > t.high_c:
            ctx.err("V002", f"{node_id}: temperature low {t.low_c} above high {t.high_c}", node_id)
        if t.kind == "constant" and t.low_c != t.high_c:
            ctx.err("V002", f"{node_id}: constant temperature with differing bounds", node_id)
        offsets = [o for o, _ in t.ramp_points]
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            ctx.err("V002", f"{node_id}: ramp offsets must strictly increase", node_id)
        if t.kind == "ramp" and not t.ramp_points:
            ctx.err("V002", f"{node_id}: ramp temperature needs points", node_id)
    if p.termination is None:
        ctx.err("V002", f"{node_id}: process needs a termination condition ('until')", node_id)
    else:
        _check_termination(ctx, node_id, p.termination)
    if p.expected_duration_seconds is not None and (
            not isinstance(p.expected_duration_seconds, int) or p.expected_duration_seconds <= 0):
        ctx.err("V002", f"{node_id}: expected duration must be a positive whole number of seconds", node_id)


def _check_transfer(ctx, node_id, p: TransferPayload):
    g = ctx.g
    if p.mode not in TRANSFER_MODES:
        ctx.err("V002", f"{node_id}: unknown transfer mode {p.mode!r}", node_id)
    if p.scope not in TRANSFER_SCOPES:
        ctx.err("V002", f"{node_id}: unknown transfer scope {p.scope!r}", node_id)
    if p.scope == "partial" and p.portion is None:
        ctx.err("V002", f"{node_id}: partial transfer needs a portion", node_id)
    if p.scope == "residual_only" and p.portion is not None:
        ctx.err("V002", f"{node_id}: residual_only transfer cannot carry a portion", node_id)
    if p.portion is not None:
        if p.portion.fraction is not None:
            if not 0 < p.portion.fraction <= 1:
                ctx.err("V002", f"{node_id}: portion fraction {p.portion.fraction} outside (0, 1]", node_id)
        elif p.portion.quantity is None or p.portion.quantity <= 0:
            ctx.err("V002", f"{node_id}: absolute portion needs a positive quantity", node_id)
        elif p.portion.unit not in ctx.lexicon.units:
            ctx.err("V002", f"{node_id}: unknown unit {p.portion.unit!r}", node_id)
    dest = p.destination
    if isinstance(dest, PPCRef):
        target = dest.producing_node
        if target not in g.nodes or g.kind_of(target) not in ("process", "transfer", "plugin"):
            ctx.err("V002", f"{node_id}: destination {target!r} is not a PPC producer", node_id)
    elif dest not in g.environments:
        ctx.err("V002", f"{node_id}: unknown destination environment {dest!r}", node_id)
    if p.mode == "place" and p.scope == "whole":
        for src in g.material_sources(node_id, "from"):
            node = g.nodes[src]
            if isinstance(node, IngredientRoot) and node.ingredient.quantity == 0 \
                    and node.ingredient.unit != "unspecified":
                ctx.err("V002", f"{node_id}: placing a zero-quantity item is a logical handoff; "
                                f"use an order statement instead", node_id)


def check_type_safety(ctx: _Context):
    g = ctx.g
    try:
        check_requirement(g.lexicon_requirement, ctx.lexicon)
    except TechniqueError as exc:
        ctx.err("V002", f"[{exc.code}] {exc}")
    for name, env in g.environments.items():
        if not env.container or not env.location:
            ctx.err("V002", f"environment {name!r} needs a container and a location", span=g.env_spans.get(name))
        if env.geometry is not None and env.geometry.tilt_degrees is not None \
                and not 0 <= env.geometry.tilt_degrees <= 180:
            ctx.err("V002", f"environment {name!r}: tilt {env.geometry.tilt_degrees} outside [0, 180]",
                    span=g.env_spans.get(name))
    tags = defaultdict(list)
    for node in g.nodes.values():
        if isinstance(node, IngredientRoot):
            ing = node.ingredient
            if ing.quantity < 0:
                ctx.err("V002", f"{node.id}: negative quantity", node.id)
            if ing.quantity > 0 and not ing.unit:
                ctx.err("V002", f"{node.id}: quantity needs a unit", node.id)
            if ing.unit and ing.unit not in ctx.lexicon.units:
                ctx.err("V002", f"{node.id}: unknown unit {ing.unit!r}", node.id,
                        hint="known units: " + ", ".join(ctx.lexicon.units))
            if ing.instance_tag is not None:
                if len(ing.instance_tag) != 1 or not ing.instance_tag.isalpha():
                    ctx.err("V002", f"{node.id}: instance tag must be a single letter", node.id)
                tags[(node.environment, ing.instance_tag)].append(node.id)
            if node.environment is not None and node.environment not in g.environments:
                ctx.err("V002", f"{node.id}: unknown environment {node.environment!r}", node.id)
            continue
        p = node.payload
        if isinstance(p, ProcessPayload):
            _check_process(ctx, node.id, p)
        elif isinstance(p, TransferPayload):
            _check_transfer(ctx, node.id, p)
        elif isinstance(p, PlatePayload):
            if g.out_edges(node.id, "material") or g.out_edges(node.id, "interjection"):
                ctx.err("V002", f"{node.id}: a plate is the final assembly and cannot feed other actions", node.id)
        elif isinstance(p, PluginPayload):
            if not p.recipe_ref:
                ctx.err("V002", f"{node.id}: plugin needs a recipe path", node.id)
            for host, _ in p.env_map:
                if host not in g.environments:
                    ctx.err("V002", f"{node.id}: unknown host environment {host!r}", node.id)
    for (env, tag), ids in sorted(tags.items(), key=lambda kv: (kv[0][0] or "", kv[0][1])):
        if len(ids) > 1:
            ctx.err("V002", f"instance tag {tag!r} used by {', '.join(ids)} in the same environment",
                    ids[1], nodes=ids)


# V003

def sinks(graph: RecipeGraph) -> List[str]:
    flowing = {e.src for e in graph.node_edges(("material", "interjection"))}
    return sorted(n for n in graph.nodes if n not in flowing)


def check_single_output(ctx: _Context):
    found = sinks(ctx.g)
    if len(found) != 1:
        if found:
            message = f"{len(found)} final outputs: {', '.join(found)}"
            hint = "aggregate them in a plate or a merging action"
        else:
            message, hint = "no final output", None
        ctx.err("V003", message, nodes=found, span=_span(ctx.g, found[0]) if found else None, hint=hint)


# V004

def check_root_rule(ctx: _Context):
    g = ctx.g
    for node in g.nodes.values():
        incoming = g.material_sources(node.id)
        if isinstance(node, IngredientRoot):
            if incoming:
                ctx.err("V004", f"ingredient {node.id!r} cannot consume {', '.join(incoming)}", node.id)
        elif node.kind != "plugin" and not incoming:
            ctx.err("V004", f"{node.kind} {node.id!r} has no material input", node.id,
                    hint="only named ingredients can start a lineage")


# V005

def check_transfer_shape(ctx: _Context):
    g = ctx.g
    for e in g.edges:
        if e.kind != "material" or e.dst not in g.nodes:
            continue
        is_transfer = g.kind_of(e.dst) == "transfer"
        if e.role in ("from", "to") and not is_transfer:
            ctx.err("V005", f"'{e.role}' edge {e.src} -> {e.dst} must end at a transfer", e.dst, span=e.span)
        if e.role == "input" and is_transfer:
            ctx.err("V005", f"transfer {e.dst!r} takes 'from'/'to' edges, not 'input' ({e.src})", e.dst, span=e.span)
    for tid in g.ids_of_kind("transfer"):
        froms = g.in_edges(tid, "material", "from")
        tos = g.in_edges(tid, "material", "to")
        if len(froms) != 1:
            ctx.err("V005", f"transfer {tid!r} has {len(froms)} 'from' edges; exactly one is required", tid)
        if len(tos) != 1:
            ctx.err("V005", f"transfer {tid!r} has {len(tos)} destinations; exactly one is required", tid)
            continue
        dest = g.nodes[tid].payload.destination
        want = dest.producing_node if isinstance(dest, PPCRef) else dest
        if tos[0].src != want:
            ctx.err("V005", f"transfer {tid!r}: 'to' edge from {tos[0].src!r} disagrees with destination {want!r}", tid)


# V006

def check_environment(ctx: _Context):
    g = ctx.g
    for pid in g.ids_of_kind("process"):
        try:
            ctx.envs.of_node(pid)
        except MergeAmbiguityError as exc:
            ctx.warn("V006", f"merge ambiguity at {pid!r}: {exc}", pid,
                     hint="transfer the inputs into one environment before merging")
        except (GraphError, KeyError):
            continue  # reported by V001/V002


# V007

def happens_before(graph: RecipeGraph) -> Dict[str, set]:
    """Descendants under material+precedence edges, with interjected actions
    placed after their parent's predecessors and before its successors."""
    dg = nx.DiGraph()
    dg.add_nodes_from(graph.nodes)
    dg.add_edges_from((e.src, e.dst) for e in graph.node_edges())
    base_pred = {n: list(dg.predecessors(n)) for n in dg}
    base_succ = {n: list(dg.successors(n)) for n in dg}
    for e in graph.node_edges(("interjection",)):
        for p in base_pred.get(e.dst, ()):
            dg.add_edge(p, e.src)
        for s in base_succ.get(e.dst, ()):
            dg.add_edge(e.src, s)
    return {n: nx.descendants(dg, n) for n in dg}


def environment_moves(graph: RecipeGraph, envs: EnvironmentResolver):
    """Per environment: (fills, evacuations) as lists of transfer ids."""
    moves = defaultdict(lambda: ([], []))
    for tid in graph.ids_of_kind("transfer"):
        try:
            dest_env = envs.of_node(tid)
        except (GraphError, KeyError):
            continue
        if not dest_env.is_unassigned:
            moves[dest_env][0].append(tid)
        for src in graph.material_sources(tid, "from"):
            try:
                src_env = envs.of_node(src)
            except (GraphError, KeyError):
                continue
            if not src_env.is_unassigned and src_env != dest_env:
                moves[src_env][1].append(tid)
    return moves


def check_from_before_to(ctx: _Context):
    g = ctx.g
    reach = happens_before(g)
    names = defaultdict(list)
    for name, env in g.environments.items():
        names[env].append(name)
    for env, (fills, evacs) in sorted(environment_moves(g, ctx.envs).items(), key=lambda kv: kv[0].label):
        for out in sorted(set(evacs)):
            for inn in sorted(set(fills)):
                if out == inn or inn in reach[out] or out in reach[inn]:
                    continue
                where = "/".join(sorted(names.get(env, []))) or env.label
                ctx.err("V007", f"{out!r} empties {where} ({env.label}) and {inn!r} fills it, "
                                f"but nothing orders them", out, nodes=(out, inn),
                        hint=f"add 'order {out} -> {inn}' if the environment must be vacated first")


# V008

def _parent_duration(graph, parent_id):
    p = graph.nodes[parent_id].payload
    if p.expected_duration_seconds is not None:
        return p.expected_duration_seconds
    if p.termination is not None:
        return p.termination.duration_bound()
    return None


def check_interjections(ctx: _Context):
    g = ctx.g
    seen = defaultdict(list)
    reach = None
    for e in g.edges:
        if e.kind != "interjection":
            continue
        label = f"interjection {e.src} -> {e.dst}"
        seen[e.src].append(e.dst)
        if e.dst not in g.nodes or g.kind_of(e.dst) != "process":
            ctx.err("V008", f"{label}: target must be a process", e.src, span=e.span)
            continue
        if e.src not in g.nodes or isinstance(g.nodes[e.src], IngredientRoot):
            ctx.err("V008", f"{label}: the interjected element must be an action", e.src, span=e.span)
            continue
        if g.out_edges(e.src, "material"):
            ctx.err("V008", f"{label}: an interjected action feeds its parent only", e.src, span=e.span)
        if e.behavior not in INTERJECTION_BEHAVIORS:
            ctx.err("V008", f"{label}: unknown behavior {e.behavior!r}", e.src, span=e.span)
        if e.behavior == "repeating" and not (e.repeat_every_seconds and e.repeat_every_seconds > 0):
            ctx.err("V008", f"{label}: repeating interjection needs a positive interval", e.src, span=e.span)
        if (e.offset_fraction is None) == (e.offset_seconds is None):
            ctx.err("V008", f"{label}: give exactly one of a fractional or an absolute offset", e.src, span=e.span)
            continue
        parent_duration = _parent_duration(g, e.dst)
        if e.offset_fraction is not None:
            if not 0 < e.offset_fraction < 1:
                ctx.err("V008", f"{label}: fractional offset {e.offset_fraction} outside (0, 1)", e.src, span=e.span)
            elif parent_duration is None:
                ctx.warn("V008", f"{label}: fractional offset on {e.dst!r}, whose length is only known "
                                 f"by outcome", e.src, span=e.span, hint=f"add 'expect' to {e.dst}")
        else:
            if e.offset_seconds < 0 or (parent_duration is not None and e.offset_seconds >= parent_duration):
                ctx.err("V008", f"{label}: offset {e.offset_seconds} s outside the parent's "
                                f"{parent_duration} s", e.src, span=e.span)
        if reach is None:
            reach = happens_before(g)
        # mutual reachability is a cycle, reported by V001
        if e.src in reach.get(e.dst, ()) and e.dst not in reach.get(e.src, ()):
            ctx.err("V008", f"{label}: the interjected action depends on its own parent", e.src, span=e.span)
    for src, parents in sorted(seen.items()):
        if len(parents) > 1:
            ctx.err("V008", f"{src!r} is interjected into several processes: {', '.join(parents)}", src)


# V009

def resolve_plugin_path(graph: RecipeGraph, recipe_ref: str, include_dirs: Sequence[str] = ()) -> Optional[str]:
    candidates = []
    if os.path.isabs(recipe_ref):
        candidates.append(recipe_ref)
    else:
        if graph.source_path:
            candidates.append(os.path.join(os.path.dirname(graph.source_path), recipe_ref))
        candidates.extend(os.path.join(d, recipe_ref) for d in include_dirs)
        candidates.append(os.path.abspath(recipe_ref))
    for c in candidates:
        if os.path.isfile(c):
            return os.path.abspath(c)
    return None


def load_plugin(path, lexicon, include_dirs, stack, cache):
    """Parse and validate a plugin recipe; returns (graph or None, diagnostics)."""
    if path in cache:
        return cache[path]
    from .parser import parse_file
    try:
        sub = parse_file(path)
    except RecipeSyntaxError as exc:
        result = (None, exc.diagnostics)
    except OSError as exc:
        result = (None, [error("C001", f"cannot read {path}: {exc}")])
    else:
        diags = run_checks(sub, lexicon, include_dirs=include_dirs, _stack=stack + [path], _cache=cache)
        result = (None if has_errors(diags) else sub, diags)
    cache[path] = result
    return result


def check_plugin_closure(ctx: _Context):
    g = ctx.g
    for pid in g.ids_of_kind("plugin"):
        payload = g.nodes[pid].payload
        if payload.expanded:
            continue
        path = resolve_plugin_path(g, payload.recipe_ref, ctx.include_dirs)
        if path is None:
            ctx.err("V009", f"plugin {pid!r}: recipe {payload.recipe_ref!r} not found", pid,
                    hint="check the path or pass --include-dir")
            continue
        if path in ctx.stack:
            chain = ctx.stack[ctx.stack.index(path):] + [path]
            ctx.err("V009", f"plugin {pid!r}: [C002] import cycle "
                            f"{' -> '.join(os.path.basename(p) for p in chain)}", pid)
            continue
        sub, diags = load_plugin(path, ctx.lexicon, ctx.include_dirs, ctx.stack, ctx.cache)
        errors = [d for d in diags if d.severity == "error"]
        if errors:
            nested = "; ".join(f"{os.path.basename(path)}: [{d.code}] {d.message}" for d in errors[:5])
            ctx.err("V009", f"plugin {pid!r} does not validate: {nested}", pid)
            continue
        sub_env_names = set(sub.environments)
        for _, inner in payload.env_map:
            if inner not in sub_env_names:
                ctx.err("V009", f"plugin {pid!r}: {os.path.basename(path)} has no environment {inner!r}", pid)


CHECK_FUNCS = {
    "V001": check_acyclicity,
    "V002": check_type_safety,
    "V003": check_single_output,
    "V004": check_root_rule,
    "V005": check_transfer_shape,
    "V006": check_environment,
    "V007": check_from_before_to,
    "V008": check_interjections,
    "V009": check_plugin_closure,
}


def run_checks(graph: RecipeGraph, lexicon: Optional[TechniqueLexicon] = None, *,
               include_dirs: Iterable[str] = (), only: Iterable[str] = None,
               _stack=None, _cache=None) -> List[Diagnostic]:
    """Run the check suite and return every diagnostic, sorted."""
    lexicon = lexicon or default_lexicon()
    stack = _stack if _stack is not None else ([graph.source_path] if graph.source_path else [])
    ctx = _Context(graph, lexicon, include_dirs, stack, {} if _cache is None else _cache)
    for code in (only or CHECK_FUNCS):
        CHECK_FUNCS[code](ctx)
    return sort_diagnostics(ctx.diags)


def validate(graph: RecipeGraph, lexicon: Optional[TechniqueLexicon] = None, *,
             include_dirs: Iterable[str] = ()) -> ValidatedGraph:
    """Validate `graph`; raises ValidationError with every error (and warning) found."""
    if isinstance(graph, ValidatedGraph):
        graph = graph.graph
    lexicon = lexicon or default_lexicon()
    diags = run_checks(graph, lexicon, include_dirs=include_dirs)
    if has_errors(diags):
        raise ValidationError(diags)
    failed = {d.code for d in diags if d.severity == "error"}
    proof = [code for code in CHECKS if code not in failed]
    return ValidatedGraph(graph.copy(), proof, (lexicon.name, lexicon.version),
                          list(graph.warnings) + diags)


def _check_code(check_id: str) -> str:
    if check_id in CHECKS:
        return check_id
    if check_id in CHECK_IDS:
        return CHECK_IDS[check_id]
    raise UnknownCheckError(f"unknown check {check_id!r}; known: "
                            + ", ".join(f"{c} ({n})" for c, (n, _) in CHECKS.items()))


def explain(check_id: str, graph, lexicon: Optional[TechniqueLexicon] = None, *,
            include_dirs: Iterable[str] = ()) -> str:
    """Human-readable report for one check: the rule, then each finding with its subgraph."""
    code = _check_code(check_id)
    if isinstance(graph, ValidatedGraph):
        graph = graph.graph
    name, rule = CHECKS[code]
    diags = run_checks(graph, lexicon, include_dirs=include_dirs, only=[code])
    lines = [f"{code} {name}", f"  rule: {rule}"]
    if not diags:
        lines.append("  result: no violations")
        return "\n".join(lines)
    lines.append(f"  result: {len(diags)} finding(s)")
    for d in diags:
        lines.append(f"  - {d.severity}: {d.message}")
        if d.span:
            lines.append(f"    at {d.span}")
        involved = [n for n in d.nodes if n in graph.nodes]
        if involved:
            lines.append("    nodes: " + ", ".join(f"{n} ({graph.kind_of(n)})" for n in involved))
            envs = EnvironmentResolver(graph)
            for n in involved:
                if graph.kind_of(n) == "transfer":
                    try:
                        lines.append(f"      {n}: into {envs.of_node(n).label}")
                    except (GraphError, KeyError):
                        pass
            local = [e for e in graph.edges if e.src in involved or e.dst in involved]
            for e in sorted(local, key=lambda e: e.sort_key()):
                tag = e.role or e.kind
                lines.append(f"      {e.src} -[{tag}]-> {e.dst}")
        if d.hint:
            lines.append(f"    hint: {d.hint}")
    return "\n".join(lines)
